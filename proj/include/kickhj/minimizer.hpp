#pragma once

#include <limits>
#include <vector>

#include "kickhj/lax_oleinik.hpp"

namespace kickhj {

class SubdifferentialError : public std::runtime_error {
public:
  SubdifferentialError(const std::string& msg, double spread) : std::runtime_error(msg), spread(spread) {}
  double spread;
};

// psi_minus - psi_plus normalised to min 0
GridField barrier(const GridField& psi_minus, const GridField& psi_plus);

struct GlobalMinimizer {
  TorusPoint x0;            // sub-grid refined
  std::size_t grid_index = 0;
  double gap = std::numeric_limits<double>::infinity();  // +inf when there is a single well
  bool unique = true;       // gap > gap_tol
  Mat hess_est;
};

GlobalMinimizer find_global_minimizer(const GridField& dpsi, int refine = 1, double gap_tol = 1e-9,
                                      int separation_cells = 5);

struct NondegProbe {
  double b_hat = 0.0;
  double r_hat = 0.0;
  bool degenerate = false;
  double upper_ratio = 0.0;  // sup of (f(y)-f(x0))/|y-x0|^2 on the accepted radius
  bool upper_ok = true;
};

NondegProbe nondeg_probe(const GridField& dpsi, const TorusPoint& x0, double r_max,
                         double upper_const = std::numeric_limits<double>::infinity(), double tol = 1e-6);

struct MinimizingOrbit {
  Configuration config;
  OrbitSegment orbit;
  std::vector<std::size_t> grid_path;  // grid index per time in [config.m, config.n]
  double euler_lagrange = 0.0;
  int newton_iterations = 0;
};

// Grid minimiser through (anchor, anchor_index): psi^- pointers into the past, psi^+ pointers into
// the future, then Newton refinement of the lifted interior points.
MinimizingOrbit minimizing_orbit(const ViscosityHistory& minus, const ViscosityHistory& plus,
                                 const KickedForce& force, const Vec& b, int anchor, std::size_t anchor_index,
                                 int lo, int hi, int refine_iters = 30, int lift_radius = 2);

struct ExtractOptions {
  int pad = 20;
  int refine_iters = 30;
  double screen_slope = 100.0;  // one-sided differences must agree within screen_slope * h
  double gap_tol = 1e-9;
  int lift_radius = 2;
};

struct OrbitExtraction {
  OrbitSegment orbit;  // [-horizon, horizon]
  MinimizingOrbit source;
  Vec v0_grid;
  double gradient_spread = 0.0;
  std::vector<double> validation;  // j = -horizon..-1
  double max_validation = 0.0;
  bool degenerate = false;
  double x0_shift = 0.0;
};

// minus must cover [-horizon-pad, 0] and plus [0, horizon+pad]
OrbitExtraction extract_orbit(const GlobalMinimizer& gm, const ViscosityHistory& minus,
                              const ViscosityHistory& plus, const KickedForce& force, const Vec& b,
                              int horizon, const ExtractOptions& opt = {});

struct BarrierDecayReport {
  std::vector<std::vector<double>> gaps;  // per test orbit, j = t0, t0-1, ...
  double max_increase = 0.0;              // largest step-wise increase into the past
  bool ok = true;
};

// Backward minimisers from the given grid points at time t0 follow psi^- pointers; the normalised
// barrier along them must not increase into the past beyond slack.
BarrierDecayReport barrier_decay(const ViscosityHistory& minus, const ViscosityHistory& plus, int t0,
                                 const std::vector<std::size_t>& starts, int depth, double slack);

}  // namespace kickhj
