#include <doctest.h>

#include <cmath>

#include "kickhj/potentials.hpp"

using namespace kickhj;

namespace {

const double kPi = 3.14159265358979323846;

PotentialBasis cos_basis() { return PotentialBasis(1, {FourierFunction(1, {{{1}, 1.0, 0.0}})}); }

PotentialBasis mixed_basis2() {
  return PotentialBasis(2, {FourierFunction(2, {{{1, 0}, 1.0, 0.5}, {{1, 1}, 0.0, 0.3}}),
                            FourierFunction(2, {{{0, 2}, -0.7, 0.0}, {{2, -1}, 0.2, 0.1}})});
}

Vec v1(double a) { return Vec::Constant(1, a); }

}  // namespace

TEST_CASE("eval_kick: zero coefficients give zeros") {
  auto basis = PotentialBasis::default_basis(2);
  KickValue k = eval_kick(basis, Vec::Zero(4), Vec::Constant(2, 0.37));
  CHECK(k.value == 0.0);
  CHECK(k.gradient.isZero(0.0));
  CHECK(k.hessian.isZero(0.0));
}

TEST_CASE("eval_kick: cosine at 0") {
  KickValue k = eval_kick(cos_basis(), v1(1.0), v1(0.0));
  CHECK(k.value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(k.gradient(0)) < 1e-15);
  CHECK(k.hessian(0, 0) == doctest::Approx(-39.478417604357434).epsilon(1e-14));
}

TEST_CASE("eval_kick: 0.1 cos at 1/4 against symbolic oracle") {
  KickValue k = eval_kick(cos_basis(), v1(0.1), v1(0.25));
  CHECK(std::abs(k.value) < 1e-16);
  CHECK(k.gradient(0) == doctest::Approx(-0.62831853071795865).epsilon(1e-14));
  CHECK(std::abs(k.hessian(0, 0)) < 1e-15);
}

TEST_CASE("eval_kick: derivatives match central differences") {
  auto basis = mixed_basis2();
  Vec xi(2);
  xi << 0.8, -0.45;
  CounterStream s(7, 0);
  const double h = 1e-4;
  for (int t = 0; t < 20; ++t) {
    Vec x(2);
    x << s.uniform(), s.uniform();
    KickValue k = eval_kick(basis, xi, x);
    for (int a = 0; a < 2; ++a) {
      Vec e = Vec::Zero(2);
      e(a) = h;
      double g = (kick_value(basis, xi, x + e) - kick_value(basis, xi, x - e)) / (2 * h);
      CHECK(std::abs(g - k.gradient(a)) <= 1e-6 * std::max(1.0, std::abs(k.gradient(a))));
      Vec hc = (kick_gradient(basis, xi, x + e) - kick_gradient(basis, xi, x - e)) / (2 * h);
      CHECK((hc - k.hessian.col(a)).norm() <= 1e-6 * std::max(1.0, k.hessian.norm()));
    }
  }
}

TEST_CASE("eval_kick: periodic in each unit direction") {
  auto basis = mixed_basis2();
  Vec xi(2);
  xi << 0.3, 1.1;
  Vec x(2);
  x << 0.123, 0.789;
  KickValue k0 = eval_kick(basis, xi, x);
  for (int a = 0; a < 2; ++a) {
    Vec y = x;
    y(a) += 1.0;
    KickValue k1 = eval_kick(basis, xi, y);
    CHECK(k1.value == doctest::Approx(k0.value).epsilon(1e-12));
    CHECK((k1.gradient - k0.gradient).norm() < 1e-11);
    CHECK((k1.hessian - k0.hessian).norm() < 1e-10);
  }
}

TEST_CASE("c2_norm: zero, homogeneity and dense sampling bound") {
  auto basis = mixed_basis2();
  CHECK(c2_norm(basis, Vec::Zero(2)) == 0.0);
  Vec xi(2);
  xi << 0.6, -0.25;
  CHECK(c2_norm(basis, 2.0 * xi) == doctest::Approx(2.0 * c2_norm(basis, xi)).epsilon(1e-14));
  const double bound = c2_norm(basis, xi);
  CounterStream s(11, 0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Vec x(2);
    x << s.uniform(), s.uniform();
    KickValue k = eval_kick(basis, xi, x);
    worst = std::max(worst, std::abs(k.value) + k.gradient.norm() + k.hessian.norm());
  }
  CHECK(worst <= bound);
}

TEST_CASE("sample_kicks: singular Gaussian is rejected") {
  CHECK_THROWS(DensitySpec::gaussian(Vec::Zero(2), Mat::Zero(2, 2)));
  Mat c(2, 2);
  c << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS(DensitySpec::gaussian(Vec::Zero(2), c));
}

TEST_CASE("sample_kicks: per-index streams agree across windows") {
  auto spec = DensitySpec::isotropic_gaussian(3, 0.5);
  auto a = sample_kicks(spec, 42, -5, 0);
  auto b = sample_kicks(spec, 42, -10, 5);
  for (int j = -5; j <= 0; ++j) CHECK(a.xi(j) == b.xi(j));
  CHECK_THROWS_AS(a.xi(1), WindowError);
  auto c = sample_kicks(spec, 42, -5, 0);
  CHECK(a == c);
  auto d = sample_kicks(spec, 43, -5, 0);
  CHECK(!(a == d));
}

TEST_CASE("sample_kicks: Gaussian(0, I) empirical mean") {
  auto spec = DensitySpec::isotropic_gaussian(2, 1.0);
  auto k = sample_kicks(spec, 5, 0, 99999);
  Vec mean = Vec::Zero(2);
  for (int j = 0; j <= 99999; ++j) mean += k.xi(j);
  mean /= 100000.0;
  CHECK(std::abs(mean(0)) < 0.02);
  CHECK(std::abs(mean(1)) < 0.02);
}

TEST_CASE("sample_kicks: product density marginals") {
  std::vector<Marginal> ms(2);
  ms[0].kind = Marginal::Kind::Uniform;
  ms[0].p1 = -1.0;
  ms[0].p2 = 2.0;
  ms[1].kind = Marginal::Kind::Laplace;
  ms[1].p1 = 0.5;
  ms[1].p2 = 0.25;
  auto spec = DensitySpec::product(ms);
  auto k = sample_kicks(spec, 9, 0, 19999);
  double lo = 1e9, hi = -1e9, m1 = 0.0;
  for (int j = 0; j < 20000; ++j) {
    lo = std::min(lo, k.xi(j)(0));
    hi = std::max(hi, k.xi(j)(0));
    m1 += k.xi(j)(1);
  }
  CHECK(lo >= -1.0);
  CHECK(hi <= 2.0);
  CHECK(m1 / 20000 == doctest::Approx(0.5).epsilon(0.02));
  CHECK(spec.pdf(Vec::Constant(2, 3.0)) == 0.0);
}

TEST_CASE("shift: identity, group property, definition") {
  auto spec = DensitySpec::isotropic_gaussian(2, 0.3);
  auto k = sample_kicks(spec, 3, -10, 10);
  CHECK(shift(k, 0) == k);
  CHECK(shift(shift(k, 3), -3) == k);
  CHECK(shift(k, 2).xi(0) == k.xi(2));
}

TEST_CASE("torus helpers") {
  CHECK(reduce_unit(-0.25) == doctest::Approx(0.75));
  CHECK(reduce_unit(1.0) == 0.0);
  Vec a = v1(0.95), b = v1(0.05);
  CHECK(torus_delta(a, b)(0) == doctest::Approx(-0.1));
  CHECK(torus_distance(a, b) == doctest::Approx(0.1));
  CHECK(std::abs(kPi - 3.14159265358979) < 1e-12);
}
