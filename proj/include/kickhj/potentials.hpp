#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "kickhj/linalg.hpp"

namespace kickhj {

class WindowError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

// Point of T^d with coordinates reduced to [0,1).
class TorusPoint {
public:
  TorusPoint() = default;
  explicit TorusPoint(const Vec& lifted);
  static TorusPoint from_coords(std::initializer_list<double> c);

  int dim() const { return static_cast<int>(coords_.size()); }
  const Vec& coords() const { return coords_; }
  double operator[](int k) const { return coords_(k); }

private:
  Vec coords_;
};

double reduce_unit(double t);
Vec reduce(const Vec& lifted);
// representative of a - b in [-1/2, 1/2)^d
Vec torus_delta(const Vec& a, const Vec& b);
double torus_distance(const Vec& a, const Vec& b);

struct FourierTerm {
  std::vector<int> k;
  double cos_coef = 0.0;
  double sin_coef = 0.0;
};

// Finite real Fourier series sum_k a_k cos(2 pi k.x) + b_k sin(2 pi k.x).
class FourierFunction {
public:
  FourierFunction() = default;
  FourierFunction(int dim, std::vector<FourierTerm> terms);

  int dim() const { return dim_; }
  const std::vector<FourierTerm>& terms() const { return terms_; }

  double value(const Vec& x) const;
  // value, gradient and Hessian in one pass
  void eval(const Vec& x, double& val, Vec& grad, Mat& hess) const;
  // sum over terms of (|a|+|b|)(1 + 2 pi |k| + 4 pi^2 |k|^2)
  double c2_bound() const { return c2_bound_; }

private:
  int dim_ = 0;
  std::vector<FourierTerm> terms_;
  double c2_bound_ = 0.0;
};

class PotentialBasis {
public:
  PotentialBasis() = default;
  PotentialBasis(int dim, std::vector<FourierFunction> functions);

  // cos/sin of each coordinate: M = 2d
  static PotentialBasis default_basis(int dim);

  int dim() const { return dim_; }
  int count() const { return static_cast<int>(functions_.size()); }
  const FourierFunction& function(int i) const { return functions_.at(i); }
  const std::vector<FourierFunction>& functions() const { return functions_; }

private:
  int dim_ = 0;
  std::vector<FourierFunction> functions_;
};

struct KickValue {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

KickValue eval_kick(const PotentialBasis& basis, const Vec& xi, const Vec& x);
KickValue eval_kick(const PotentialBasis& basis, const Vec& xi, const TorusPoint& x);
double kick_value(const PotentialBasis& basis, const Vec& xi, const Vec& x);
Vec kick_gradient(const PotentialBasis& basis, const Vec& xi, const Vec& x);

double c2_norm(const PotentialBasis& basis, const Vec& xi);

// Counter-based stream: the k-th draw is a pure function of (key, k).
class CounterStream {
public:
  CounterStream(std::uint64_t seed, std::int64_t index);
  std::uint64_t next_u64();
  double uniform();       // (0,1)
  double normal();        // Box-Muller, one draw per pair of uniforms
  double laplace();       // unit scale

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

struct Marginal {
  enum class Kind { Normal, Uniform, Laplace };
  Kind kind = Kind::Normal;
  double p1 = 0.0;  // mean / lower / location
  double p2 = 1.0;  // sd / upper / scale

  double pdf(double t) const;
  double sup_density() const;
  double mean_abs_bound() const;
  double draw(CounterStream& s) const;
};

struct GaussianDensity {
  Vec mean;
  Mat covariance;
  Mat chol;  // lower factor
};

struct ProductDensity {
  std::vector<Marginal> marginals;
};

class DensitySpec {
public:
  static DensitySpec gaussian(const Vec& mean, const Mat& covariance);
  static DensitySpec isotropic_gaussian(int m, double sigma);
  static DensitySpec product(std::vector<Marginal> marginals);

  int dim() const;
  bool is_gaussian() const { return std::holds_alternative<GaussianDensity>(rep_); }
  const GaussianDensity& as_gaussian() const { return std::get<GaussianDensity>(rep_); }
  const ProductDensity& as_product() const { return std::get<ProductDensity>(rep_); }

  // declared bound for E|xi| (Euclidean)
  double mean_abs_bound() const { return mean_abs_; }
  double pdf(const Vec& c) const;
  Vec draw(CounterStream& s) const;

private:
  std::variant<GaussianDensity, ProductDensity> rep_;
  double mean_abs_ = 0.0;
};

class KickSequence {
public:
  KickSequence() = default;
  KickSequence(std::uint64_t seed, int j_min, int j_max, std::vector<Vec> xi,
               std::shared_ptr<const DensitySpec> density);

  std::uint64_t seed() const { return seed_; }
  int j_min() const { return j_min_; }
  int j_max() const { return j_max_; }
  int size() const { return j_max_ - j_min_ + 1; }
  bool contains(int j) const { return j >= j_min_ && j <= j_max_; }
  const Vec& xi(int j) const;
  const std::shared_ptr<const DensitySpec>& density() const { return density_; }

  bool operator==(const KickSequence& o) const;

private:
  std::uint64_t seed_ = 0;
  int j_min_ = 0, j_max_ = -1;
  std::vector<Vec> xi_;
  std::shared_ptr<const DensitySpec> density_;
};

KickSequence sample_kicks(const DensitySpec& spec, std::uint64_t seed, int j_min, int j_max);
KickSequence shift(const KickSequence& kicks, int m);

// Basis plus realization; the j-th kicked potential.
struct KickedForce {
  PotentialBasis basis;
  KickSequence kicks;

  int dim() const { return basis.dim(); }
  KickValue eval(int j, const Vec& x) const { return eval_kick(basis, kicks.xi(j), x); }
  double value(int j, const Vec& x) const { return kick_value(basis, kicks.xi(j), x); }
  Vec gradient(int j, const Vec& x) const { return kick_gradient(basis, kicks.xi(j), x); }
  double c2(int j) const { return c2_norm(basis, kicks.xi(j)); }
};

}  // namespace kickhj
