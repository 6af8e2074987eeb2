#include "kickhj/lax_oleinik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kickhj/parallel.hpp"

namespace kickhj {

namespace {

std::vector<double> potential_on_grid(const GridField& g, const PotentialBasis& basis, const Vec& xi) {
  std::vector<double> F(g.size());
  for (std::size_t y = 0; y < g.size(); ++y) F[y] = kick_value(basis, xi, g.point(y));
  return F;
}

void check_kinetic(const GridField& phi, const GridKinetic& kin, const PotentialBasis& basis) {
  if (kin.dim() != phi.dim() || kin.n() != phi.n())
    throw DimensionError("kinetic table does not match grid resolution");
  if (basis.dim() != phi.dim()) throw DimensionError("basis dimension does not match grid");
}

// candidate sources for target x: all points, or a per-axis window
template <class Fn>
void for_each_source(const GridField& g, std::size_t x, int window, Fn&& fn) {
  const std::size_t G = g.size();
  const int n = g.n(), d = g.dim();
  if (window <= 0 || 2 * window + 1 >= n) {
    for (std::size_t y = 0; y < G; ++y) fn(y);
    return;
  }
  std::vector<int> base = g.multi_index(x), mi(d);
  int span = 2 * window + 1;
  int total = 1;
  for (int a = 0; a < d; ++a) total *= span;
  for (int c = 0; c < total; ++c) {
    int r = c;
    for (int a = 0; a < d; ++a) {
      mi[a] = base[a] + (r % span) - window;
      r /= span;
    }
    fn(g.flat_index(mi));
  }
}

}  // namespace

GridField apply_backward(const GridField& phi, const Vec& b, const PotentialBasis& basis, const Vec& xi,
                         const LaxOleinikOptions& opt, Pointers* argmin) {
  GridKinetic kin(phi.dim(), phi.n(), b, opt.lift_radius);
  return apply_backward(phi, kin, basis, xi, opt, argmin);
}

GridField apply_backward(const GridField& phi, const GridKinetic& kin, const PotentialBasis& basis,
                         const Vec& xi, const LaxOleinikOptions& opt, Pointers* argmin) {
  check_kinetic(phi, kin, basis);
  const std::size_t G = phi.size();
  std::vector<double> F = potential_on_grid(phi, basis, xi);
  GridField out(phi.dim(), phi.n());
  out.time = phi.time + 1;
  out.seed = phi.seed;
  if (argmin) argmin->assign(G, 0);
  const bool dense1 = phi.dim() == 1 && opt.window_cells <= 0;
  parallel_for(G, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t x = lo; x < hi; ++x) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      if (dense1) {
        const double* row = kin.axis_row(0, static_cast<int>(x));
        for (std::size_t y = 0; y < G; ++y) {
          double c = phi[y] + (row[y] - F[y]);
          if (c < best) {
            best = c;
            arg = y;
          }
        }
      } else {
        for_each_source(phi, x, opt.window_cells, [&](std::size_t y) {
          double c = phi[y] + (kin.kinetic(y, x) - F[y]);
          if (c < best || (c == best && y < arg)) {
            best = c;
            arg = y;
          }
        });
      }
      out[x] = best;
      if (argmin) (*argmin)[x] = static_cast<std::uint32_t>(arg);
    }
  });
  return out;
}

GridField apply_forward(const GridField& phi, const Vec& b, const PotentialBasis& basis, const Vec& xi,
                        const LaxOleinikOptions& opt, Pointers* argmax) {
  GridKinetic kin(phi.dim(), phi.n(), b, opt.lift_radius);
  return apply_forward(phi, kin, basis, xi, opt, argmax);
}

GridField apply_forward(const GridField& phi, const GridKinetic& kin, const PotentialBasis& basis,
                        const Vec& xi, const LaxOleinikOptions& opt, Pointers* argmax) {
  check_kinetic(phi, kin, basis);
  const std::size_t G = phi.size();
  std::vector<double> F = potential_on_grid(phi, basis, xi);
  GridField out(phi.dim(), phi.n());
  out.time = phi.time - 1;
  out.seed = phi.seed;
  if (argmax) argmax->assign(G, 0);
  const bool dense1 = phi.dim() == 1 && opt.window_cells <= 0;
  parallel_for(G, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t x = lo; x < hi; ++x) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      const double Fx = F[x];
      if (dense1) {
        const double* row = kin.axis_row_from(0, static_cast<int>(x));
        for (std::size_t y = 0; y < G; ++y) {
          double c = phi[y] - (row[y] - Fx);
          if (c > best) {
            best = c;
            arg = y;
          }
        }
      } else {
        for_each_source(phi, x, opt.window_cells, [&](std::size_t y) {
          double c = phi[y] - (kin.kinetic(x, y) - Fx);
          if (c > best || (c == best && y < arg)) {
            best = c;
            arg = y;
          }
        });
      }
      out[x] = best;
      if (argmax) (*argmax)[x] = static_cast<std::uint32_t>(arg);
    }
  });
  return out;
}

const GridField& ViscosityHistory::at(int t) const {
  if (!covers(t))
    throw WindowError("viscosity history has no field at time " + std::to_string(t));
  return fields[t - t_first];
}

const Pointers& ViscosityHistory::pointer(int t) const {
  if (!covers(t)) throw WindowError("viscosity history has no pointers at time " + std::to_string(t));
  return pointers[t - t_first];
}

namespace {

void subtract_min(GridField& f) {
  double m = f.min();
  for (auto& v : f.values()) v -= m;
}

double fitted_rate(const std::vector<std::pair<int, double>>& curve) {
  // least-squares slope of log distance against depth, above rounding level
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (auto [depth, dist] : curve) {
    if (!(dist > 1e-13)) continue;
    double lx = depth, ly = std::log(dist);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++k;
  }
  if (k < 2) return 0.0;
  double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return std::exp(slope);
}

template <bool Backward>
SolveResult solve_impl(const KickedForce& force, const Vec& b, int grid_n, int t0, const SolveOptions& opt) {
  if (opt.initial_depth < 1 || opt.max_depth < opt.initial_depth)
    throw std::invalid_argument("solve depths must satisfy 1 <= initial_depth <= max_depth");
  int lo = Backward ? t0 - opt.max_depth : t0;
  int hi = Backward ? t0 - 1 : t0 + opt.max_depth - 1;
  if (!force.kicks.contains(lo) || !force.kicks.contains(hi))
    throw WindowError("kick window does not cover the solve depth");
  GridKinetic kin(force.dim(), grid_n, b, opt.lo.lift_radius);
  const int keep = std::max(1, opt.keep);

  SolveResult res;
  GridField prev;
  bool have_prev = false;
  int depth = opt.initial_depth;
  while (true) {
    GridField phi(force.dim(), grid_n, 0.0);
    phi.seed = force.kicks.seed();
    phi.time = Backward ? t0 - depth : t0 + depth;
    ViscosityHistory hist;
    for (int s = 0; s < depth; ++s) {
      Pointers ptr;
      int j = Backward ? t0 - depth + s : t0 + depth - 1 - s;
      phi = Backward ? apply_backward(phi, kin, force.basis, force.kicks.xi(j), opt.lo, &ptr)
                     : apply_forward(phi, kin, force.basis, force.kicks.xi(j), opt.lo, &ptr);
      subtract_min(phi);
      if (depth - s <= keep) {
        hist.fields.push_back(phi);
        hist.pointers.push_back(std::move(ptr));
      }
    }
    if (Backward) {
      hist.t_first = t0 - static_cast<int>(hist.fields.size()) + 1;
    } else {
      std::reverse(hist.fields.begin(), hist.fields.end());
      std::reverse(hist.pointers.begin(), hist.pointers.end());
      hist.t_first = t0;
    }
    if (hist.fields.size() > 1) {
      // the oldest kept field's pointers refer outside the history
      if (Backward) hist.pointers.front().clear();
      else hist.pointers.back().clear();
    } else {
      hist.pointers.front().clear();
    }
    res.history = std::move(hist);
    res.report.achieved_depth = depth;
    const GridField& cur = res.history.at(t0);
    if (have_prev) {
      double qd = quotient_distance(cur, prev);
      res.report.curve.emplace_back(depth, qd);
      res.report.final_distance = qd;
      if (qd < opt.tol) {
        res.report.converged = true;
        break;
      }
    }
    if (depth >= opt.max_depth) break;
    prev = cur;
    have_prev = true;
    depth = std::min(2 * depth, opt.max_depth);
  }
  res.report.geometric_rate = fitted_rate(res.report.curve);
  return res;
}

}  // namespace

SolveResult solve_backward(const KickedForce& force, const Vec& b, int grid_n, int t_end, const SolveOptions& opt) {
  return solve_impl<true>(force, b, grid_n, t_end, opt);
}

SolveResult solve_forward(const KickedForce& force, const Vec& b, int grid_n, int t_start, const SolveOptions& opt) {
  return solve_impl<false>(force, b, grid_n, t_start, opt);
}

ViscosityHistory propagate_backward(const GridField& start, const KickedForce& force, const Vec& b, int t_to,
                                    const LaxOleinikOptions& opt) {
  if (t_to < start.time) throw std::invalid_argument("propagate_backward runs forward in time");
  GridKinetic kin(start.dim(), start.n(), b, opt.lift_radius);
  ViscosityHistory h;
  h.t_first = start.time;
  h.fields.push_back(start);
  h.pointers.emplace_back();
  for (int t = start.time; t < t_to; ++t) {
    Pointers ptr;
    GridField next = apply_backward(h.fields.back(), kin, force.basis, force.kicks.xi(t), opt, &ptr);
    subtract_min(next);
    h.fields.push_back(std::move(next));
    h.pointers.push_back(std::move(ptr));
  }
  return h;
}

ViscosityHistory propagate_forward(const GridField& start, const KickedForce& force, const Vec& b, int t_to,
                                   const LaxOleinikOptions& opt) {
  if (t_to > start.time) throw std::invalid_argument("propagate_forward runs backward in time");
  GridKinetic kin(start.dim(), start.n(), b, opt.lift_radius);
  std::vector<GridField> fields{start};
  std::vector<Pointers> ptrs{Pointers{}};
  for (int t = start.time; t > t_to; --t) {
    Pointers ptr;
    GridField next = apply_forward(fields.back(), kin, force.basis, force.kicks.xi(t - 1), opt, &ptr);
    subtract_min(next);
    fields.push_back(std::move(next));
    ptrs.push_back(std::move(ptr));
  }
  std::reverse(fields.begin(), fields.end());
  std::reverse(ptrs.begin(), ptrs.end());
  ViscosityHistory h;
  h.t_first = t_to;
  h.fields = std::move(fields);
  h.pointers = std::move(ptrs);
  return h;
}

}  // namespace kickhj
