#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"

using namespace kickhj;
using fixture::zero_force;

namespace {

constexpr double kTwoPi = 6.283185307179586;

GridField one_minus_cos(int n, double k = 1.0) {
  GridField f(1, n);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1.0 - std::cos(kTwoPi * k * f.point(i)(0));
  return f;
}

GridField bowl(int n, double a, double centre) {
  GridField f(1, n);
  for (std::size_t i = 0; i < f.size(); ++i) {
    double r = torus_distance(f.point(i), Vec::Constant(1, centre));
    f[i] = 0.5 * a * r * r;
  }
  return f;
}

}  // namespace

TEST_CASE("barrier is psi- minus psi+ with minimum zero") {
  GridField a = one_minus_cos(64);
  GridField z = barrier(a, a);
  CHECK(z.max() == 0.0);
  GridField b = barrier(a + 3.0, GridField(1, 64, -1.0));
  CHECK(b.min() == 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-14));
  CHECK_THROWS_AS(barrier(a, GridField(1, 32)), std::invalid_argument);
}

TEST_CASE("find_global_minimizer: single cosine well") {
  GridField f = one_minus_cos(256);
  auto gm = find_global_minimizer(f);
  CHECK(gm.unique);
  CHECK(std::isinf(gm.gap));
  CHECK(gm.grid_index == 0);
  CHECK(torus_distance(gm.x0.coords(), Vec::Zero(1)) < 1e-12);
  // central second difference at N = 256
  CHECK(gm.hess_est(0, 0) == doctest::Approx(39.47643585111655).epsilon(1e-10));
}

TEST_CASE("find_global_minimizer: two equal wells give zero gap") {
  GridField f = one_minus_cos(256, 2.0);
  auto gm = find_global_minimizer(f);
  CHECK_FALSE(gm.unique);
  CHECK(std::abs(gm.gap) < 1e-12);
  // lift one well a little
  for (std::size_t i = 100; i < 156; ++i) f[i] += 1e-3;
  auto gm2 = find_global_minimizer(f);
  CHECK(gm2.unique);
  CHECK(gm2.gap == doctest::Approx(1e-3).epsilon(1e-9));
  CHECK(gm2.grid_index == 0);
}

TEST_CASE("find_global_minimizer: sub-grid refinement of an off-grid bowl") {
  GridField f = bowl(128, 4.0, 0.3 + 0.3 / 128);
  auto gm = find_global_minimizer(f);
  CHECK(torus_distance(gm.x0.coords(), Vec::Constant(1, 0.3 + 0.3 / 128)) < 1e-9);
}

TEST_CASE("nondeg_probe: cosine well and exact bowl") {
  GridField f = one_minus_cos(256);
  auto p = nondeg_probe(f, TorusPoint(Vec::Zero(1)), 0.05);
  CHECK_FALSE(p.degenerate);
  CHECK(p.b_hat == doctest::Approx(19.59693164898585).epsilon(1e-10));
  CHECK(std::abs(p.b_hat - 2 * M_PI * M_PI) / (2 * M_PI * M_PI) < 0.05);
  CHECK(p.r_hat <= 0.05 + 1e-12);

  GridField q = bowl(256, 6.0, 0.0);
  auto pq = nondeg_probe(q, TorusPoint(Vec::Zero(1)), 0.2);
  CHECK(pq.b_hat == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(pq.upper_ratio == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(pq.upper_ok);
  auto steep = nondeg_probe(q, TorusPoint(Vec::Zero(1)), 0.2, 2.0);
  CHECK_FALSE(steep.upper_ok);

  auto flat = nondeg_probe(GridField(1, 64), TorusPoint(Vec::Zero(1)), 0.2);
  CHECK(flat.degenerate);
}

TEST_CASE("extract_orbit: free rotation with b = 1/2") {
  auto f = zero_force(1, -400, 400);
  Vec b = Vec::Constant(1, 0.5);
  auto sm = solve_backward(f, b, 64, -30);
  auto sp = solve_forward(f, b, 64, 30);
  auto minus = propagate_backward(sm.history.at(-30), f, b, 30);
  auto plus = propagate_forward(sp.history.at(30), f, b, -30);
  auto gm = find_global_minimizer(barrier(minus.at(0), plus.at(0)));
  CHECK_FALSE(gm.unique);
  ExtractOptions eo;
  eo.pad = 5;
  auto ex = extract_orbit(gm, minus, plus, f, b, 10, eo);
  CHECK(ex.degenerate);
  CHECK(ex.v0_grid(0) == doctest::Approx(0.5).epsilon(1e-14));
  for (int j = -10; j <= 10; ++j) CHECK(ex.orbit.at(j).v(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ex.max_validation < 1e-12);
}

TEST_CASE("extract_orbit: seeded run") {
  auto r = fixture::make_run(5, 256, 200, 80);
  CHECK(r.gm.unique);
  ExtractOptions eo;
  eo.pad = 40;
  auto ex = extract_orbit(r.gm, r.minus, r.plus, r.force, r.b, 30, eo);
  CHECK_FALSE(ex.degenerate);
  CHECK(ex.gradient_spread <= 100 * r.minus.at(0).h());
  CHECK(ex.max_validation < 2.0 / 256);
  CHECK(ex.source.euler_lagrange < 1e-10);
  CHECK(ex.orbit.max_step_residual(r.force) < 1e-10);
  // v0 from the grid gradient against the refined velocity
  CHECK(std::abs(ex.v0_grid(0) - ex.orbit.at(0).v(0)) < 0.05);

  // screen rejects when the slope allowance is absurdly small
  ExtractOptions strict = eo;
  strict.screen_slope = 0.0;
  if (ex.gradient_spread > 0.0) CHECK_THROWS_AS(extract_orbit(r.gm, r.minus, r.plus, r.force, r.b, 30, strict),
                                                SubdifferentialError);
}

TEST_CASE("minimiser location is stable under grid refinement") {
  auto a = fixture::make_run(2, 256, 40, 60);
  auto b = fixture::make_run(2, 512, 40, 60);
  CHECK(torus_distance(a.gm.x0.coords(), b.gm.x0.coords()) <= 2.0 / 256);
  CHECK(torus_distance(a.orbit.at(0).x.coords(), b.orbit.at(0).x.coords()) < 1e-8);
}

TEST_CASE("barrier decays along backward minimisers") {
  auto r = fixture::make_run(3, 256, 20, 60);
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < 256; i += 13) starts.push_back(i);
  auto rep = barrier_decay(r.minus, r.plus, 0, starts, 15, 10.0 / 256);
  CHECK(rep.ok);
  CHECK(rep.gaps.size() == starts.size());
  for (const auto& g : rep.gaps) {
    CHECK(g.size() == 16);
    CHECK(g.back() <= g.front() + 10.0 / 256);
  }
}
