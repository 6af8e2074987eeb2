#include "kickhj/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kickhj {

GridField barrier(const GridField& psi_minus, const GridField& psi_plus) {
  require_same_shape(psi_minus, psi_plus, "barrier");
  GridField d = (psi_minus - psi_plus).normalized_min0();
  d.time = psi_minus.time;
  return d;
}

namespace {

// offsets of the 3^d stencil, centre excluded when skip_centre
std::vector<std::vector<int>> stencil3(int d, bool skip_centre) {
  std::vector<std::vector<int>> out;
  int total = 1;
  for (int a = 0; a < d; ++a) total *= 3;
  for (int c = 0; c < total; ++c) {
    std::vector<int> off(d);
    int r = c;
    bool centre = true;
    for (int a = 0; a < d; ++a) {
      off[a] = r % 3 - 1;
      r /= 3;
      centre = centre && off[a] == 0;
    }
    if (centre && skip_centre) continue;
    out.push_back(off);
  }
  return out;
}

std::size_t offset_index(const GridField& f, std::size_t idx, const std::vector<int>& off) {
  std::vector<int> mi = f.multi_index(idx);
  for (std::size_t a = 0; a < off.size(); ++a) mi[a] += off[a];
  return f.flat_index(mi);
}

Mat fd_hessian(const GridField& f, std::size_t idx) {
  const int d = f.dim();
  const double n2 = static_cast<double>(f.n()) * f.n();
  Mat H(d, d);
  for (int a = 0; a < d; ++a) {
    H(a, a) = f.second_diff(idx, a);
    for (int b = a + 1; b < d; ++b) {
      auto at = [&](int sa, int sb) { return f[f.shifted(f.shifted(idx, a, sa), b, sb)]; };
      H(a, b) = H(b, a) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) * 0.25 * n2;
    }
  }
  return H;
}

// quadratic fit on the 3^d stencil; returns the offset of the vertex in cells
Vec quadratic_vertex(const GridField& f, std::size_t idx) {
  const int d = f.dim();
  auto st = stencil3(d, false);
  const int nb = 1 + d + d * (d + 1) / 2;
  Mat X(static_cast<Eigen::Index>(st.size()), nb);
  Vec y(static_cast<Eigen::Index>(st.size()));
  for (std::size_t r = 0; r < st.size(); ++r) {
    int c = 0;
    X(r, c++) = 1.0;
    for (int a = 0; a < d; ++a) X(r, c++) = st[r][a];
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) X(r, c++) = (a == b ? 0.5 : 1.0) * st[r][a] * st[r][b];
    y(r) = f[offset_index(f, idx, st[r])] - f[idx];
  }
  Vec coef = X.colPivHouseholderQr().solve(y);
  Vec g = coef.segment(1, d);
  Mat H(d, d);
  int c = 1 + d;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) H(a, b) = H(b, a) = coef(c++);
  Vec off = Vec::Zero(d);
  Eigen::LLT<Mat> llt(H);
  if (llt.info() == Eigen::Success) off = -llt.solve(g);
  for (int a = 0; a < d; ++a) off(a) = std::clamp(off(a), -1.0, 1.0);
  return off;
}

}  // namespace

GlobalMinimizer find_global_minimizer(const GridField& dpsi, int refine, double gap_tol, int separation_cells) {
  GlobalMinimizer gm;
  const std::size_t idx = dpsi.argmin();
  gm.grid_index = idx;
  Vec x = dpsi.point(idx);
  if (refine > 0) x += quadratic_vertex(dpsi, idx) * dpsi.h();
  gm.x0 = TorusPoint(x);
  gm.hess_est = fd_hessian(dpsi, idx);

  const double fmin = dpsi[idx];
  const Vec p0 = dpsi.point(idx);
  const auto nbrs = stencil3(dpsi.dim(), true);
  const double sep = separation_cells * dpsi.h() - 1e-12;
  double second = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dpsi.size(); ++i) {
    if (dpsi[i] >= second) continue;
    if (torus_distance(dpsi.point(i), p0) < sep) continue;
    bool local = true;
    for (const auto& o : nbrs)
      if (dpsi[offset_index(dpsi, i, o)] < dpsi[i]) {
        local = false;
        break;
      }
    if (local) second = dpsi[i];
  }
  gm.gap = second - fmin;
  gm.unique = gm.gap > gap_tol;
  return gm;
}

NondegProbe nondeg_probe(const GridField& dpsi, const TorusPoint& x0, double r_max, double upper_const, double tol) {
  require_dim(x0.coords(), dpsi.dim(), "nondeg_probe centre");
  const std::size_t c = dpsi.nearest_index(x0.coords());
  const Vec pc = dpsi.point(c);
  const double rmin = 3.0 * dpsi.h() - 1e-12;
  struct Sample {
    double dist, q;
    std::size_t idx;
  };
  std::vector<Sample> s;
  for (std::size_t i = 0; i < dpsi.size(); ++i) {
    double r = torus_distance(dpsi.point(i), pc);
    if (r < rmin || r > r_max + 1e-12) continue;
    s.push_back({r, (dpsi[i] - dpsi[c]) / (r * r), i});
  }
  NondegProbe out;
  if (s.empty()) {
    out.degenerate = true;
    return out;
  }
  std::stable_sort(s.begin(), s.end(), [](const Sample& a, const Sample& b) { return a.dist < b.dist; });
  double running = std::numeric_limits<double>::infinity();
  double upper = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t k = 0; k < s.size(); ++k) {
    double next = std::min(running, s[k].q);
    // keep whole distance shells together
    if (next <= 0.0) break;
    running = next;
    upper = std::max(upper, s[k].q);
    bool shell_end = k + 1 == s.size() || s[k + 1].dist > s[k].dist + 1e-12;
    if (shell_end) {
      out.b_hat = running;
      out.r_hat = s[k].dist;
      out.upper_ratio = upper;
      any = true;
    }
  }
  if (!any) {
    out.degenerate = true;
    out.b_hat = s.front().q;
    for (const auto& e : s) upper = std::max(upper, e.q);
    out.upper_ratio = upper;
  }
  out.upper_ok = out.upper_ratio <= upper_const + tol;
  return out;
}

MinimizingOrbit minimizing_orbit(const ViscosityHistory& minus, const ViscosityHistory& plus,
                                 const KickedForce& force, const Vec& b, int anchor, std::size_t anchor_index,
                                 int lo, int hi, int refine_iters, int lift_radius) {
  if (lo > anchor || hi < anchor) throw std::invalid_argument("anchor outside orbit window");
  if (!minus.covers(lo) || !minus.covers(anchor) || !plus.covers(anchor) || !plus.covers(hi))
    throw WindowError("viscosity histories do not cover the orbit window");
  const GridField& g = minus.at(anchor);
  const int d = g.dim();
  MinimizingOrbit mo;
  mo.grid_path.assign(hi - lo + 1, 0);
  mo.grid_path[anchor - lo] = anchor_index;
  for (int t = anchor; t > lo; --t) mo.grid_path[t - 1 - lo] = minus.pointer(t)[mo.grid_path[t - lo]];
  for (int t = anchor; t < hi; ++t) mo.grid_path[t + 1 - lo] = plus.pointer(t)[mo.grid_path[t - lo]];

  GridKinetic kin(d, g.n(), b, lift_radius);
  Configuration& cfg = mo.config;
  cfg.m = lo;
  cfg.n = hi;
  cfg.b = b;
  cfg.lifted.resize(hi - lo + 1);
  cfg.lifted[0] = g.point(mo.grid_path[0]);
  for (int k = 1; k <= hi - lo; ++k)
    cfg.lifted[k] = cfg.lifted[k - 1] + kin.displacement(mo.grid_path[k - 1], mo.grid_path[k]);
  cfg.grid_action = configuration_action(cfg.lifted, lo, b, force);
  RefineResult rr = refine_configuration(cfg.lifted, lo, force, refine_iters);
  mo.newton_iterations = rr.iterations;
  cfg.action = configuration_action(cfg.lifted, lo, b, force);
  mo.euler_lagrange = euler_lagrange_residual(cfg.lifted, lo, force);
  mo.orbit = cfg.orbit(force);
  return mo;
}

OrbitExtraction extract_orbit(const GlobalMinimizer& gm, const ViscosityHistory& minus,
                              const ViscosityHistory& plus, const KickedForce& force, const Vec& b,
                              int horizon, const ExtractOptions& opt) {
  OrbitExtraction ex;
  ex.degenerate = !gm.unique;
  const GridField& psi0 = minus.at(0);
  const std::size_t idx0 = gm.grid_index;
  ex.gradient_spread = psi0.one_sided_spread(idx0);
  if (ex.gradient_spread > opt.screen_slope * psi0.h())
    throw SubdifferentialError("psi^- is not differentiable at the minimiser: one-sided spread " +
                                   std::to_string(ex.gradient_spread),
                               ex.gradient_spread);
  ex.v0_grid = psi0.central_gradient(idx0) + b;
  ex.source = minimizing_orbit(minus, plus, force, b, 0, idx0, -horizon - opt.pad, horizon + opt.pad,
                               opt.refine_iters, opt.lift_radius);
  std::vector<PhasePoint> pts;
  for (int j = -horizon; j <= horizon; ++j) pts.push_back(ex.source.orbit.at(j));
  ex.orbit = OrbitSegment(-horizon, std::move(pts));
  for (int j = -horizon; j < 0; ++j) {
    const std::size_t gj = ex.source.grid_path[j - ex.source.config.m];
    double r = torus_distance(ex.orbit.at(j).x.coords(), psi0.point(gj));
    ex.validation.push_back(r);
    ex.max_validation = std::max(ex.max_validation, r);
  }
  ex.x0_shift = torus_distance(ex.orbit.at(0).x.coords(), gm.x0.coords());
  return ex;
}

BarrierDecayReport barrier_decay(const ViscosityHistory& minus, const ViscosityHistory& plus, int t0,
                                 const std::vector<std::size_t>& starts, int depth, double slack) {
  std::vector<GridField> B;
  for (int t = t0; t >= t0 - depth; --t) B.push_back(barrier(minus.at(t), plus.at(t)));
  BarrierDecayReport rep;
  for (std::size_t s : starts) {
    std::vector<double> g{B[0][s]};
    std::size_t y = s;
    for (int k = 1; k <= depth; ++k) {
      y = minus.pointer(t0 - k + 1)[y];
      g.push_back(B[k][y]);
      rep.max_increase = std::max(rep.max_increase, g.back() - g[g.size() - 2]);
    }
    rep.gaps.push_back(std::move(g));
  }
  rep.ok = rep.max_increase <= slack;
  return rep;
}

}  // namespace kickhj
