#include "kickhj/potentials.hpp"

#include <cmath>
#include <numbers>

namespace kickhj {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double reduce_unit(double t) {
  double r = t - std::floor(t);
  return r >= 1.0 ? 0.0 : r;
}

Vec reduce(const Vec& lifted) {
  Vec r(lifted.size());
  for (Eigen::Index k = 0; k < lifted.size(); ++k) r(k) = reduce_unit(lifted(k));
  return r;
}

Vec torus_delta(const Vec& a, const Vec& b) {
  Vec d = a - b;
  for (Eigen::Index k = 0; k < d.size(); ++k) d(k) -= std::floor(d(k) + 0.5);
  return d;
}

double torus_distance(const Vec& a, const Vec& b) { return torus_delta(a, b).norm(); }

TorusPoint::TorusPoint(const Vec& lifted) {
  if (lifted.size() < 1 || lifted.size() > 3)
    throw DimensionError("torus dimension must be 1, 2 or 3");
  coords_ = reduce(lifted);
}

TorusPoint TorusPoint::from_coords(std::initializer_list<double> c) {
  Vec v(static_cast<Eigen::Index>(c.size()));
  Eigen::Index k = 0;
  for (double t : c) v(k++) = t;
  return TorusPoint(v);
}

FourierFunction::FourierFunction(int dim, std::vector<FourierTerm> terms)
    : dim_(dim), terms_(std::move(terms)) {
  if (dim < 1 || dim > 3) throw DimensionError("basis dimension must be 1, 2 or 3");
  for (const auto& t : terms_) {
    if (static_cast<int>(t.k.size()) != dim)
      throw DimensionError("Fourier frequency has wrong dimension");
    double kn = 0.0;
    for (int c : t.k) kn += double(c) * c;
    kn = std::sqrt(kn);
    c2_bound_ += (std::abs(t.cos_coef) + std::abs(t.sin_coef)) *
                 (1.0 + kTwoPi * kn + kTwoPi * kTwoPi * kn * kn);
  }
}

double FourierFunction::value(const Vec& x) const {
  double v = 0.0;
  for (const auto& t : terms_) {
    double ph = 0.0;
    for (int a = 0; a < dim_; ++a) ph += t.k[a] * x(a);
    ph *= kTwoPi;
    v += t.cos_coef * std::cos(ph) + t.sin_coef * std::sin(ph);
  }
  return v;
}

void FourierFunction::eval(const Vec& x, double& val, Vec& grad, Mat& hess) const {
  val = 0.0;
  grad.setZero(dim_);
  hess.setZero(dim_, dim_);
  for (const auto& t : terms_) {
    double ph = 0.0;
    for (int a = 0; a < dim_; ++a) ph += t.k[a] * x(a);
    ph *= kTwoPi;
    double c = std::cos(ph), s = std::sin(ph);
    val += t.cos_coef * c + t.sin_coef * s;
    // d/dx_a = 2 pi k_a (-a sin + b cos)
    double g = -t.cos_coef * s + t.sin_coef * c;
    double h = -t.cos_coef * c - t.sin_coef * s;
    for (int a = 0; a < dim_; ++a) {
      grad(a) += kTwoPi * t.k[a] * g;
      for (int b = 0; b < dim_; ++b) hess(a, b) += kTwoPi * kTwoPi * t.k[a] * t.k[b] * h;
    }
  }
}

PotentialBasis::PotentialBasis(int dim, std::vector<FourierFunction> functions)
    : dim_(dim), functions_(std::move(functions)) {
  if (dim < 1 || dim > 3) throw DimensionError("basis dimension must be 1, 2 or 3");
  if (functions_.empty()) throw DimensionError("basis must contain at least one function");
  for (const auto& f : functions_)
    if (f.dim() != dim) throw DimensionError("basis function dimension mismatch");
}

PotentialBasis PotentialBasis::default_basis(int dim) {
  std::vector<FourierFunction> fs;
  for (int a = 0; a < dim; ++a) {
    std::vector<int> k(dim, 0);
    k[a] = 1;
    fs.emplace_back(dim, std::vector<FourierTerm>{{k, 1.0, 0.0}});
    fs.emplace_back(dim, std::vector<FourierTerm>{{k, 0.0, 1.0}});
  }
  return PotentialBasis(dim, std::move(fs));
}

static void check_xi(const PotentialBasis& basis, const Vec& xi) {
  if (xi.size() != basis.count())
    throw DimensionError("kick vector has length " + std::to_string(xi.size()) +
                         " but basis has " + std::to_string(basis.count()) + " functions");
}

KickValue eval_kick(const PotentialBasis& basis, const Vec& xi, const Vec& x) {
  check_xi(basis, xi);
  require_dim(x, basis.dim(), "eval_kick point");
  KickValue out;
  out.gradient.setZero(basis.dim());
  out.hessian.setZero(basis.dim(), basis.dim());
  double v;
  Vec g;
  Mat h;
  for (int i = 0; i < basis.count(); ++i) {
    if (xi(i) == 0.0) continue;
    basis.function(i).eval(x, v, g, h);
    out.value += xi(i) * v;
    out.gradient += xi(i) * g;
    out.hessian += xi(i) * h;
  }
  return out;
}

KickValue eval_kick(const PotentialBasis& basis, const Vec& xi, const TorusPoint& x) {
  return eval_kick(basis, xi, x.coords());
}

double kick_value(const PotentialBasis& basis, const Vec& xi, const Vec& x) {
  check_xi(basis, xi);
  double v = 0.0;
  for (int i = 0; i < basis.count(); ++i)
    if (xi(i) != 0.0) v += xi(i) * basis.function(i).value(x);
  return v;
}

Vec kick_gradient(const PotentialBasis& basis, const Vec& xi, const Vec& x) {
  return eval_kick(basis, xi, x).gradient;
}

double c2_norm(const PotentialBasis& basis, const Vec& xi) {
  check_xi(basis, xi);
  double c = 0.0;
  for (int i = 0; i < basis.count(); ++i) c += std::abs(xi(i)) * basis.function(i).c2_bound();
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

CounterStream::CounterStream(std::uint64_t seed, std::int64_t index)
    : key_(splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(index) +
                                                    0xD1B54A32D192ED03ULL))) {}

std::uint64_t CounterStream::next_u64() {
  ++counter_;
  return splitmix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double CounterStream::uniform() {
  // 53 random bits, shifted off zero
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterStream::normal() {
  double u1 = uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double CounterStream::laplace() {
  double u = uniform() - 0.5;
  return u < 0 ? std::log(1.0 + 2.0 * u) : -std::log(1.0 - 2.0 * u);
}

double Marginal::pdf(double t) const {
  switch (kind) {
    case Kind::Normal: {
      double z = (t - p1) / p2;
      return std::exp(-0.5 * z * z) / (p2 * std::sqrt(kTwoPi));
    }
    case Kind::Uniform:
      return (t >= p1 && t <= p2) ? 1.0 / (p2 - p1) : 0.0;
    case Kind::Laplace:
      return std::exp(-std::abs(t - p1) / p2) / (2.0 * p2);
  }
  return 0.0;
}

double Marginal::sup_density() const {
  switch (kind) {
    case Kind::Normal: return 1.0 / (p2 * std::sqrt(kTwoPi));
    case Kind::Uniform: return 1.0 / (p2 - p1);
    case Kind::Laplace: return 1.0 / (2.0 * p2);
  }
  return 0.0;
}

// second moment, used through E|xi| <= sqrt(E|xi|^2)
double Marginal::mean_abs_bound() const {
  switch (kind) {
    case Kind::Normal: return p1 * p1 + p2 * p2;
    case Kind::Uniform: return (p1 * p1 + p1 * p2 + p2 * p2) / 3.0;
    case Kind::Laplace: return p1 * p1 + 2.0 * p2 * p2;
  }
  return 0.0;
}

double Marginal::draw(CounterStream& s) const {
  switch (kind) {
    case Kind::Normal: return p1 + p2 * s.normal();
    case Kind::Uniform: return p1 + (p2 - p1) * s.uniform();
    case Kind::Laplace: return p1 + p2 * s.laplace();
  }
  return 0.0;
}

DensitySpec DensitySpec::gaussian(const Vec& mean, const Mat& covariance) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw DimensionError("covariance shape does not match mean");
  if ((covariance - covariance.transpose()).norm() > 1e-12 * (1.0 + covariance.norm()))
    throw NotPositiveDefiniteError("covariance is not symmetric");
  Eigen::LLT<Mat> llt(covariance);
  if (llt.info() != Eigen::Success || min_eigenvalue(covariance) <= 0.0)
    throw NotPositiveDefiniteError("covariance is not positive definite");
  DensitySpec d;
  d.rep_ = GaussianDensity{mean, covariance, llt.matrixL()};
  d.mean_abs_ = std::sqrt(mean.squaredNorm() + covariance.trace());
  return d;
}

DensitySpec DensitySpec::isotropic_gaussian(int m, double sigma) {
  return gaussian(Vec::Zero(m), sigma * sigma * Mat::Identity(m, m));
}

DensitySpec DensitySpec::product(std::vector<Marginal> marginals) {
  if (marginals.empty()) throw DimensionError("product density needs at least one marginal");
  double second = 0.0;
  for (const auto& m : marginals) {
    bool ok = m.kind == Marginal::Kind::Uniform ? m.p2 > m.p1 : m.p2 > 0.0;
    if (!ok) throw std::invalid_argument("marginal density has invalid parameters");
    second += m.mean_abs_bound();
  }
  DensitySpec d;
  d.rep_ = ProductDensity{std::move(marginals)};
  d.mean_abs_ = std::sqrt(second);
  return d;
}

int DensitySpec::dim() const {
  if (is_gaussian()) return static_cast<int>(as_gaussian().mean.size());
  return static_cast<int>(as_product().marginals.size());
}

double DensitySpec::pdf(const Vec& c) const {
  if (c.size() != dim()) throw DimensionError("density argument has wrong dimension");
  if (is_gaussian()) {
    const auto& g = as_gaussian();
    Vec z = g.chol.triangularView<Eigen::Lower>().solve(c - g.mean);
    double logdet = 2.0 * g.chol.diagonal().array().log().sum();
    return std::exp(-0.5 * z.squaredNorm() - 0.5 * logdet -
                    0.5 * dim() * std::log(kTwoPi));
  }
  double p = 1.0;
  const auto& ms = as_product().marginals;
  for (int i = 0; i < dim(); ++i) p *= ms[i].pdf(c(i));
  return p;
}

Vec DensitySpec::draw(CounterStream& s) const {
  Vec out(dim());
  if (is_gaussian()) {
    const auto& g = as_gaussian();
    Vec z(dim());
    for (int i = 0; i < dim(); ++i) z(i) = s.normal();
    out = g.mean + g.chol * z;
  } else {
    const auto& ms = as_product().marginals;
    for (int i = 0; i < dim(); ++i) out(i) = ms[i].draw(s);
  }
  return out;
}

KickSequence::KickSequence(std::uint64_t seed, int j_min, int j_max, std::vector<Vec> xi,
                           std::shared_ptr<const DensitySpec> density)
    : seed_(seed), j_min_(j_min), j_max_(j_max), xi_(std::move(xi)), density_(std::move(density)) {
  if (j_max < j_min) throw WindowError("kick window is empty");
  if (static_cast<int>(xi_.size()) != j_max - j_min + 1)
    throw DimensionError("kick vector count does not match window");
}

const Vec& KickSequence::xi(int j) const {
  if (!contains(j))
    throw WindowError("kick index " + std::to_string(j) + " outside window [" +
                      std::to_string(j_min_) + ", " + std::to_string(j_max_) + "]");
  return xi_[j - j_min_];
}

bool KickSequence::operator==(const KickSequence& o) const {
  if (seed_ != o.seed_ || j_min_ != o.j_min_ || j_max_ != o.j_max_) return false;
  for (std::size_t i = 0; i < xi_.size(); ++i)
    if (xi_[i] != o.xi_[i]) return false;
  return true;
}

KickSequence sample_kicks(const DensitySpec& spec, std::uint64_t seed, int j_min, int j_max) {
  if (j_max < j_min) throw WindowError("kick window is empty");
  std::vector<Vec> xi;
  xi.reserve(j_max - j_min + 1);
  for (int j = j_min; j <= j_max; ++j) {
    CounterStream s(seed, j);
    xi.push_back(spec.draw(s));
  }
  return KickSequence(seed, j_min, j_max, std::move(xi), std::make_shared<DensitySpec>(spec));
}

KickSequence shift(const KickSequence& kicks, int m) {
  std::vector<Vec> xi;
  xi.reserve(kicks.size());
  for (int j = kicks.j_min(); j <= kicks.j_max(); ++j) xi.push_back(kicks.xi(j));
  return KickSequence(kicks.seed(), kicks.j_min() - m, kicks.j_max() - m, std::move(xi),
                      kicks.density());
}

}  // namespace kickhj
