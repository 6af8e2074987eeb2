#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kickhj/action.hpp"
#include "kickhj/grid_field.hpp"

namespace kickhj {

struct LaxOleinikOptions {
  int lift_radius = 2;
  // 0: exact search over all grid points; otherwise per-axis window of this many cells
  int window_cells = 0;
};

using Pointers = std::vector<std::uint32_t>;

// output(x) = min_y phi(y) + A(y, x); time advances by one
GridField apply_backward(const GridField& phi, const Vec& b, const PotentialBasis& basis, const Vec& xi,
                         const LaxOleinikOptions& opt = {}, Pointers* argmin = nullptr);
GridField apply_backward(const GridField& phi, const GridKinetic& kin, const PotentialBasis& basis,
                         const Vec& xi, const LaxOleinikOptions& opt = {}, Pointers* argmin = nullptr);
// output(x) = max_y phi(y) - A(x, y); time goes back by one
GridField apply_forward(const GridField& phi, const Vec& b, const PotentialBasis& basis, const Vec& xi,
                        const LaxOleinikOptions& opt = {}, Pointers* argmax = nullptr);
GridField apply_forward(const GridField& phi, const GridKinetic& kin, const PotentialBasis& basis,
                        const Vec& xi, const LaxOleinikOptions& opt = {}, Pointers* argmax = nullptr);

// Fields over consecutive times with optimal-neighbour pointers.
// Backward history: pointer(t)[x] is the argmin at time t-1 (empty at t_first).
// Forward history: pointer(t)[x] is the argmax at time t+1 (empty at t_last).
struct ViscosityHistory {
  int t_first = 0;
  std::vector<GridField> fields;
  std::vector<Pointers> pointers;

  int t_last() const { return t_first + static_cast<int>(fields.size()) - 1; }
  bool covers(int t) const { return t >= t_first && t <= t_last(); }
  const GridField& at(int t) const;
  const Pointers& pointer(int t) const;
};

struct ConvergenceReport {
  std::vector<std::pair<int, double>> curve;  // (depth, quotient distance to previous depth)
  int achieved_depth = 0;
  bool converged = false;
  double final_distance = 0.0;
  double geometric_rate = 0.0;  // per unit depth, fitted on distances above rounding level
};

struct SolveOptions {
  int initial_depth = 8;
  int max_depth = 256;
  double tol = 1e-10;
  int keep = 1;  // number of trailing times kept in the history
  LaxOleinikOptions lo;
};

struct SolveResult {
  ViscosityHistory history;
  ConvergenceReport report;
};

// psi^- at t_end (and up to keep-1 earlier times) by depth doubling from phi = 0
SolveResult solve_backward(const KickedForce& force, const Vec& b, int grid_n, int t_end,
                           const SolveOptions& opt = {});
// psi^+ at t_start (and up to keep-1 later times)
SolveResult solve_forward(const KickedForce& force, const Vec& b, int grid_n, int t_start,
                          const SolveOptions& opt = {});

// Push a backward solution at start.time forward to time t_to, keeping every field.
ViscosityHistory propagate_backward(const GridField& start, const KickedForce& force, const Vec& b, int t_to,
                                    const LaxOleinikOptions& opt = {});
// Pull a forward solution at start.time back to time t_to.
ViscosityHistory propagate_forward(const GridField& start, const KickedForce& force, const Vec& b, int t_to,
                                   const LaxOleinikOptions& opt = {});

}  // namespace kickhj
