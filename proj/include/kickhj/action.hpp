#pragma once

#include <vector>

#include "kickhj/dynamics.hpp"

namespace kickhj {

struct AxisKinetic {
  double value;
  int lift;
};

// min over k in [-R, R] of 0.5 t^2 - b t with t = xp - x + k; ties go to the smaller k
AxisKinetic axis_kinetic(double x, double xp, double b, int lift_radius);

struct OneStepAction {
  double value = 0.0;
  Eigen::VectorXi lift;
};

OneStepAction action_one_step(const Vec& x, const Vec& xp, const Vec& b, const PotentialBasis& basis,
                              const Vec& xi, int lift_radius = 2);
OneStepAction action_one_step(const TorusPoint& x, const TorusPoint& xp, const Vec& b,
                              const PotentialBasis& basis, const Vec& xi, int lift_radius = 2);

// Per-axis kinetic tables between grid points, stored target-major: t[a][ix * N + iy].
// kinetic(y, x) reproduces the kinetic part of action_one_step bit for bit.
class GridKinetic {
public:
  GridKinetic(int dim, int n, const Vec& b, int lift_radius);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double axis_value(int a, int ix, int iy) const { return val_[a][static_cast<std::size_t>(ix) * n_ + iy]; }
  int axis_lift(int a, int ix, int iy) const { return lift_[a][static_cast<std::size_t>(ix) * n_ + iy]; }
  // values over sources iy for a fixed target ix
  const double* axis_row(int a, int ix) const { return val_[a].data() + static_cast<std::size_t>(ix) * n_; }
  // values over targets ix for a fixed source iy
  const double* axis_row_from(int a, int iy) const { return val_src_[a].data() + static_cast<std::size_t>(iy) * n_; }
  double kinetic(std::size_t y, std::size_t x) const;
  // lifted displacement from grid point y to grid point x
  Vec displacement(std::size_t y, std::size_t x) const;

private:
  int dim_, n_;
  std::vector<std::vector<double>> val_, val_src_;
  std::vector<std::vector<int>> lift_;
};

struct Configuration {
  int m = 0, n = 0;
  std::vector<Vec> lifted;  // x~_m .. x~_n
  Vec b;
  double action = 0.0;       // after refinement
  double grid_action = 0.0;  // dynamic-programming value

  const Vec& at(int j) const { return lifted.at(j - m); }
  int dim() const { return static_cast<int>(b.size()); }
  // v_j = x~_{j+1} - x~_j + grad F_j(x~_j) for j < n, v_n = x~_n - x~_{n-1}
  Vec velocity(int j, const KickedForce& force) const;
  OrbitSegment orbit(const KickedForce& force) const;
};

// sum 0.5|x~_{j+1}-x~_j|^2 - b.(x~_n - x~_m) - sum F_j(x~_j)
double configuration_action(const std::vector<Vec>& lifted, int m, const Vec& b, const KickedForce& force);

struct RefineResult {
  int iterations = 0;
  double gradient_norm = 0.0;
};

// Damped Newton on the interior points with both endpoints fixed.
RefineResult refine_configuration(std::vector<Vec>& lifted, int m, const KickedForce& force, int max_iters,
                                  double tol = 1e-13);
// max-norm of the Euler-Lagrange residual at interior points
double euler_lagrange_residual(const std::vector<Vec>& lifted, int m, const KickedForce& force);

Configuration action(int m, int n, const TorusPoint& x, const TorusPoint& xp, const Vec& b,
                     const KickedForce& force, int grid_n, int refine_iters, int lift_radius = 2);

struct MinimizerIdentityReport {
  double additivity_residual = 0.0;
  double derivative_residual = 0.0;   // max |FD d2 A_{m,k} - (v_k - b)|
  double max_second_difference = 0.0; // of A_{m,n}(x_m, .) at x_n
  double euler_lagrange = 0.0;
  bool semiconcave = true;
};

MinimizerIdentityReport verify_minimizer_identities(const Configuration& cfg, const KickedForce& force,
                                                    int lift_radius = 2, double fd_step = 1e-4,
                                                    double tol = 1e-4);

}  // namespace kickhj
