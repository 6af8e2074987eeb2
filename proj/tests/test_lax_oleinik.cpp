#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"

using namespace kickhj;
using fixture::kicked;
using fixture::zero_force;

namespace {

GridField cos_field(int n) {
  GridField f(1, n);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::cos(2 * M_PI * f.point(i)(0));
  return f;
}

GridField random_field(int n, std::uint64_t seed) {
  GridField f(1, n);
  CounterStream s(seed, 0);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = s.normal();
  return f;
}

}  // namespace

TEST_CASE("quotient_distance examples") {
  GridField g = random_field(64, 1), f = g + 5.0;
  CHECK(quotient_distance(f, g) == doctest::Approx(0.0).epsilon(1e-14));
  GridField c = cos_field(64), z(1, 64);
  CHECK(quotient_distance(c, z) == doctest::Approx(1.0).epsilon(1e-14));
  GridField h = random_field(64, 2);
  CHECK(quotient_distance(g, h) == quotient_distance(h, g));
}

TEST_CASE("apply_backward: zero potential fixes zero and shifts constants") {
  auto basis = PotentialBasis::default_basis(1);
  GridField z(1, 32);
  GridField out = apply_backward(z, Vec::Zero(1), basis, Vec::Zero(2));
  CHECK(out.max() == 0.0);
  CHECK(out.min() == 0.0);
  CHECK(out.time == 1);
  auto f = kicked(1, 0.3, 3, 0, 0);
  GridField phi = random_field(32, 3);
  GridField a = apply_backward(phi, Vec::Zero(1), f.basis, f.kicks.xi(0));
  GridField b = apply_backward(phi + 2.5, Vec::Zero(1), f.basis, f.kicks.xi(0));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] - a[i] == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("apply_backward: discrete Moreau envelope of cos(2 pi x), N = 64") {
  auto basis = PotentialBasis::default_basis(1);
  GridField phi = cos_field(64);
  GridField out = apply_backward(phi, Vec::Zero(1), basis, Vec::Zero(2));
  for (std::size_t x = 0; x < phi.size(); ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < phi.size(); ++y) {
      double d = std::abs(phi.point(x)(0) - phi.point(y)(0));
      d = std::min(d, 1.0 - d);
      best = std::min(best, phi[y] + 0.5 * d * d);
    }
    CHECK(out[x] <= phi[x]);
    CHECK(out[x] == doctest::Approx(best).epsilon(1e-14));
  }
}

TEST_CASE("apply_backward and apply_forward equal the O(N^2) double loop exactly") {
  auto f = kicked(1, 0.5, 11, 0, 0);
  const Vec b = Vec::Constant(1, 0.3);
  GridField phi = random_field(32, 5);
  GridField out = apply_backward(phi, b, f.basis, f.kicks.xi(0));
  GridField fwd = apply_forward(phi, b, f.basis, f.kicks.xi(0));
  for (std::size_t x = 0; x < phi.size(); ++x) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t y = 0; y < phi.size(); ++y) {
      lo = std::min(lo, phi[y] + action_one_step(phi.point(y), phi.point(x), b, f.basis, f.kicks.xi(0)).value);
      hi = std::max(hi, phi[y] - action_one_step(phi.point(x), phi.point(y), b, f.basis, f.kicks.xi(0)).value);
    }
    CHECK(out[x] == lo);
    CHECK(fwd[x] == hi);
  }
}

TEST_CASE("apply_forward after apply_backward lies below phi") {
  auto f = kicked(1, 0.5, 12, 0, 0);
  GridField phi = random_field(32, 6);
  GridField back = apply_forward(apply_backward(phi, Vec::Zero(1), f.basis, f.kicks.xi(0)), Vec::Zero(1), f.basis,
                                 f.kicks.xi(0));
  for (std::size_t i = 0; i < phi.size(); ++i) CHECK(back[i] <= phi[i] + 1e-12);
  GridField z(1, 32);
  GridField zf = apply_forward(z, Vec::Zero(1), f.basis, Vec::Zero(2));
  CHECK(zf.max() == 0.0);
  CHECK(zf.min() == 0.0);
}

TEST_CASE("apply_backward: monotone and non-expansive") {
  auto f = kicked(1, 0.4, 13, 0, 0);
  GridField a = random_field(64, 7), b = a;
  CounterStream s(8, 0);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += std::abs(s.normal());
  GridField Ka = apply_backward(a, Vec::Zero(1), f.basis, f.kicks.xi(0));
  GridField Kb = apply_backward(b, Vec::Zero(1), f.basis, f.kicks.xi(0));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(Ka[i] <= Kb[i]);
  CHECK(quotient_distance(Ka, Kb) <= quotient_distance(a, b) + 1e-14);
}

TEST_CASE("apply_backward: windowed search matches the exact pass") {
  auto f = kicked(1, 0.2, 14, 0, 0);
  GridField phi = apply_backward(GridField(1, 128), Vec::Zero(1), f.basis, f.kicks.xi(0));
  Pointers ptr;
  GridField exact = apply_backward(phi, Vec::Zero(1), f.basis, f.kicks.xi(0), {}, &ptr);
  // window just wide enough for the exact displacements
  int reach = 0;
  for (std::size_t x = 0; x < ptr.size(); ++x) {
    int dx = std::abs(static_cast<int>(x) - static_cast<int>(ptr[x]));
    reach = std::max(reach, std::min(dx, 128 - dx));
  }
  REQUIRE(2 * reach + 3 < 128);
  LaxOleinikOptions opt;
  opt.window_cells = reach + 1;
  GridField win = apply_backward(phi, Vec::Zero(1), f.basis, f.kicks.xi(0), opt);
  for (std::size_t i = 0; i < exact.size(); ++i) CHECK(win[i] == exact[i]);
}

TEST_CASE("apply_backward: d = 2 agrees with brute force") {
  auto f = kicked(2, 0.3, 15, 0, 0);
  Vec b(2);
  b << 0.1, -0.2;
  GridField phi(2, 8);
  CounterStream s(9, 0);
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = 0.1 * s.normal();
  GridField out = apply_backward(phi, b, f.basis, f.kicks.xi(0));
  for (std::size_t x = 0; x < phi.size(); ++x) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < phi.size(); ++y)
      lo = std::min(lo, phi[y] + action_one_step(phi.point(y), phi.point(x), b, f.basis, f.kicks.xi(0)).value);
    CHECK(out[x] == lo);
  }
}

TEST_CASE("solve: zero potential gives zero at every depth") {
  auto f = zero_force(1, -400, 400);
  auto r = solve_backward(f, Vec::Zero(1), 32, 0);
  CHECK(r.history.at(0).max() == 0.0);
  CHECK(r.report.converged);
  auto p = solve_forward(f, Vec::Zero(1), 32, 0);
  CHECK(p.history.at(0).max() == 0.0);
}

TEST_CASE("solve: seeded kicked run converges, fixed point, semiconcavity") {
  auto f = kicked(1, 0.1, 1, -700, 700);
  const Vec b = Vec::Zero(1);
  SolveOptions so;
  so.keep = 2;
  auto r = solve_backward(f, b, 256, 0, so);
  CHECK(r.report.converged);
  CHECK(r.report.final_distance < 1e-6);
  for (std::size_t k = 1; k < r.report.curve.size(); ++k)
    CHECK((r.report.curve[k].second <= r.report.curve[k - 1].second || r.report.curve[k].second < 1e-12));
  // K psi^-(., -1) = psi^-(., 0)
  GridField next = apply_backward(r.history.at(-1), b, f.basis, f.kicks.xi(-1));
  CHECK(quotient_distance(next, r.history.at(0)) < 1e-6);
  const double h = 1.0 / 256;
  CHECK(max_second_difference(r.history.at(0)) <= 1.0 + 20 * h);

  auto p = solve_forward(f, b, 256, 0, so);
  CHECK(p.report.converged);
  GridField neg = p.history.at(0);
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -neg[i];
  CHECK(max_second_difference(neg) <= 1.0 + f.c2(0) + 20 * h);
  // one more step backward from 0 in the forward solution
  GridField prev = apply_forward(p.history.at(1), b, f.basis, f.kicks.xi(0));
  CHECK(quotient_distance(prev, p.history.at(0)) < 1e-6);
}

TEST_CASE("propagate keeps pointers consistent with the fields") {
  auto f = kicked(1, 0.1, 2, -400, 400);
  const Vec b = Vec::Zero(1);
  auto r = solve_backward(f, b, 64, -10);
  auto h = propagate_backward(r.history.at(-10), f, b, 5);
  CHECK(h.t_first == -10);
  CHECK(h.t_last() == 5);
  Pointers ptr;
  GridField raw = apply_backward(h.at(2), b, f.basis, f.kicks.xi(2), {}, &ptr);
  CHECK(ptr == h.pointer(3));
  CHECK(quotient_distance(raw, h.at(3)) < 1e-12);
}

TEST_CASE("field files round trip") {
  GridField f = random_field(16, 4);
  f.time = -3;
  f.seed = 99;
  write_field(f, "/tmp/kickhj_test_field");
  GridField g = read_field("/tmp/kickhj_test_field");
  CHECK(g.time == -3);
  CHECK(g.seed == 99);
  CHECK(g.values() == f.values());
}
