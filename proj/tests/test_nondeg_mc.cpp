#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "kickhj/nondeg_mc.hpp"

using namespace kickhj;
using fixture::cos_basis;

namespace {

constexpr double kTwoPi = 6.283185307179586;

template <class Fn>
GridField tabulate(int n, Fn fn) {
  GridField f(1, n);
  for (std::size_t i = 0; i < f.size(); ++i) {
    double x = f.point(i)(0);
    f[i] = fn(x >= 0.5 ? x - 1.0 : x);
  }
  return f;
}

PotentialBasis constants_basis() { return PotentialBasis(1, {FourierFunction(1, {{{0}, 1.0, 0.0}})}); }

}  // namespace

TEST_CASE("second_subderivative examples") {
  const Vec x0 = Vec::Zero(1), e = Vec::Ones(1);
  auto quad = tabulate(256, [](double x) { return 0.5 * 7.0 * x * x; });
  CHECK(second_subderivative(quad, x0, e, {0.125, 0.0625, 0.03125}) == doctest::Approx(7.0).epsilon(1e-10));
  CHECK(second_subderivative(quad, x0, -e, {0.125, 0.0625, 0.03125}) == doctest::Approx(7.0).epsilon(1e-10));

  auto cube = tabulate(256, [](double x) { return -std::abs(x * x * x); });
  const double tmax = 0.1;
  double q = second_subderivative(cube, x0, e, default_taus(cube, tmax));
  CHECK(q <= 0.0);
  CHECK(q >= -3.0 * tmax);

  auto c = tabulate(256, [](double x) { return 1.0 - std::cos(kTwoPi * x); });
  double qc = second_subderivative(c, x0, e, {0.04, 0.02, 0.01});
  CHECK(qc == doctest::Approx(39.33748972655127).epsilon(1e-10));
  CHECK(std::abs(qc - kTwoPi * kTwoPi) / (kTwoPi * kTwoPi) < 0.05);

  // taus below 3h are ignored
  CHECK_THROWS_AS(second_subderivative(c, x0, e, {0.005}), std::invalid_argument);
  CHECK(second_subderivative(c, x0, e, {0.04, 0.005}) == second_subderivative(c, x0, e, {0.04}));

  auto kink = tabulate(256, [](double x) { return std::abs(x); });
  CHECK_THROWS_AS(second_subderivative(kink, x0, e, {0.04}), SubdifferentialError);
}

TEST_CASE("default_taus start at 3h and double") {
  GridField f(1, 256);
  auto t = default_taus(f, 0.1);
  REQUIRE(!t.empty());
  CHECK(t.back() == doctest::Approx(3.0 / 256));
  CHECK(t.front() <= 0.1);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) CHECK(t[k] == doctest::Approx(2 * t[k + 1]));
}

TEST_CASE("barrier_family reproduces the barrier at xi_0") {
  auto r = fixture::make_run(1, 256, 10, 60);
  GridField psi = barrier_base(r.minus.at(0), r.plus.at(1), r.b, r.force.basis);
  auto F = tabulate_basis(psi, r.force.basis);
  GridField H = barrier_family(psi, F, r.force.kicks.xi(0));
  CHECK(quotient_distance(H, r.barrier0) < 1e-12);
  CHECK(psi.min() == 0.0);
}

TEST_CASE("envelope of a constant psi with one cosine") {
  // G(c) = min_x -c cos(2 pi x) = -|c|, kink at 0
  GridField psi(1, 128, 0.0);
  auto basis = cos_basis();
  auto env = subderivative_set_probe(psi, basis, Vec::Zero(1), Vec::Ones(1), 0.01, 10);
  REQUIRE(env.G.size() == 21);
  for (std::size_t k = 0; k < env.t.size(); ++k) CHECK(env.G[k] == doctest::Approx(-std::abs(env.t[k])).epsilon(1e-12));
  CHECK(env.concave);
  REQUIRE(env.kinks.size() == 1);
  CHECK(std::abs(env.kinks[0]) < 1e-12);
  CHECK(env.gap0 < 1e-9);

  // away from the kink the derivative is -F(x(c))
  auto env2 = subderivative_set_probe(psi, basis, Vec::Constant(1, 0.3), Vec::Ones(1), 0.01, 10);
  CHECK(env2.kinks.empty());
  CHECK(env2.dG == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(env2.envelope_error <= 2 * env2.step);
  CHECK(env2.envelope_ok);
}

TEST_CASE("envelope and duality on a seeded barrier") {
  auto r = fixture::make_run(2, 256, 10, 60);
  GridField psi = barrier_base(r.minus.at(0), r.plus.at(1), r.b, r.force.basis);
  Vec dir = Vec::Zero(2);
  dir(0) = 1.0;
  auto env = subderivative_set_probe(psi, r.force.basis, r.force.kicks.xi(0), dir, 0.01, 10);
  CHECK(env.concave);
  if (env.gap0 > 1e-9) CHECK(env.envelope_error <= 2 * env.step);
  auto dual = duality_spot_check(psi, r.force.basis, r.force.kicks.xi(0), 200, 1);
  CHECK(dual.checked > 0);
  CHECK(dual.violations == 0);
}

TEST_CASE("family experiment: embedding basis against the constants-only control") {
  auto r = fixture::make_run(1, 256, 10, 60);
  GridField psi = barrier_base(r.minus.at(0), r.plus.at(1), r.b, r.force.basis);
  FamilyOptions fo;
  fo.n_samples = 500;
  fo.seed = 1;
  auto fam = barrier_family_experiment(psi, r.force.basis, *r.force.kicks.density(), fo);
  CHECK(fam.rows.size() == 500);
  CHECK(fam.fraction_valid >= 0.95);
  CHECK_FALSE(fam.assumption_failure);
  CHECK(fam.inv_a.cap_change < 0.1);
  CHECK(fam.inv_sqrt_b.cap_change < 0.1);
  for (const auto& row : fam.rows) CHECK(row.growth_ok);

  // same seed, same rows
  auto again = barrier_family_experiment(psi, r.force.basis, *r.force.kicks.density(), fo);
  for (std::size_t k = 0; k < fam.rows.size(); ++k) {
    CHECK(again.rows[k].c == fam.rows[k].c);
    const double a1 = again.rows[k].a_hat, a0 = fam.rows[k].a_hat;
    CHECK((a1 == a0 || (std::isnan(a1) && std::isnan(a0))));
  }

  GridField flat(1, 256, 0.0);
  auto ctrl = barrier_family_experiment(flat, constants_basis(), DensitySpec::isotropic_gaussian(1, 1.0), fo);
  CHECK(ctrl.assumption_failure);
  CHECK(ctrl.fraction_valid == 0.0);
  for (const auto& row : ctrl.rows) CHECK(row.status == "non_unique");
}
