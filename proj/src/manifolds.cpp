#include "kickhj/manifolds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>

#include "kickhj/parallel.hpp"

namespace kickhj {

AdmissibleGraph::AdmissibleGraph(GraphSide side, int site, int dim, double rho, int nodes_per_axis)
    : side_(side), site_(site), dim_(dim), rho_(rho), n_(nodes_per_axis) {
  if (nodes_per_axis < 5 || nodes_per_axis % 2 == 0)
    throw std::invalid_argument("graph stencil needs an odd number (>= 5) of nodes per axis");
  if (!(rho > 0.0)) throw std::invalid_argument("graph radius must be positive");
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n_);
  values_.assign(total, Vec::Zero(dim));
}

AdmissibleGraph AdmissibleGraph::flat(GraphSide side, int site, int dim, double rho, int nodes_per_axis) {
  return AdmissibleGraph(side, site, dim, rho, nodes_per_axis);
}

Vec AdmissibleGraph::node(std::size_t k) const {
  Vec u(dim_);
  for (int a = 0; a < dim_; ++a) {
    int i = static_cast<int>(k % n_);
    k /= n_;
    u(a) = rho_ * (2.0 * i - (n_ - 1)) / (n_ - 1);
  }
  return u;
}

bool AdmissibleGraph::in_domain(const Vec& u, double slack) const {
  return u.cwiseAbs().maxCoeff() <= rho_ * (1.0 + slack);
}

namespace {

// cubic Lagrange weights and their t-derivatives on nodes i0..i0+3
void lagrange4(double t, int i0, double w[4], double dw[4]) {
  for (int m = 0; m < 4; ++m) {
    double pm = i0 + m, num = 1.0, den = 1.0, dsum = 0.0;
    for (int q = 0; q < 4; ++q) {
      if (q == m) continue;
      den *= pm - (i0 + q);
      num *= t - (i0 + q);
    }
    for (int q = 0; q < 4; ++q) {
      if (q == m) continue;
      double prod = 1.0;
      for (int r = 0; r < 4; ++r)
        if (r != m && r != q) prod *= t - (i0 + r);
      dsum += prod;
    }
    w[m] = num / den;
    dw[m] = dsum / den;
  }
}

}  // namespace

Vec AdmissibleGraph::eval(const Vec& u) const {
  Vec out = Vec::Zero(dim_);
  std::vector<int> i0(dim_);
  std::vector<std::array<double, 4>> w(dim_), dw(dim_);
  for (int a = 0; a < dim_; ++a) {
    double t = (u(a) + rho_) / (2.0 * rho_) * (n_ - 1);
    i0[a] = std::clamp(static_cast<int>(std::floor(t)) - 1, 0, n_ - 4);
    lagrange4(t, i0[a], w[a].data(), dw[a].data());
  }
  int combos = 1;
  for (int a = 0; a < dim_; ++a) combos *= 4;
  for (int c = 0; c < combos; ++c) {
    int r = c;
    double wt = 1.0;
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < dim_; ++a) {
      int m = r % 4;
      r /= 4;
      wt *= w[a][m];
      idx += stride * (i0[a] + m);
      stride *= n_;
    }
    if (wt != 0.0) out += wt * values_[idx];
  }
  return out;
}

Mat AdmissibleGraph::derivative(const Vec& u) const {
  Mat D = Mat::Zero(dim_, dim_);
  std::vector<int> i0(dim_);
  std::vector<std::array<double, 4>> w(dim_), dw(dim_);
  const double scale = (n_ - 1) / (2.0 * rho_);
  for (int a = 0; a < dim_; ++a) {
    double t = (u(a) + rho_) / (2.0 * rho_) * (n_ - 1);
    i0[a] = std::clamp(static_cast<int>(std::floor(t)) - 1, 0, n_ - 4);
    lagrange4(t, i0[a], w[a].data(), dw[a].data());
  }
  int combos = 1;
  for (int a = 0; a < dim_; ++a) combos *= 4;
  for (int c = 0; c < combos; ++c) {
    std::vector<int> m(dim_);
    int r = c;
    std::size_t idx = 0, stride = 1;
    for (int a = 0; a < dim_; ++a) {
      m[a] = r % 4;
      r /= 4;
      idx += stride * (i0[a] + m[a]);
      stride *= n_;
    }
    for (int col = 0; col < dim_; ++col) {
      double wt = 1.0;
      for (int a = 0; a < dim_; ++a) wt *= (a == col ? dw[a][m[a]] * scale : w[a][m[a]]);
      if (wt != 0.0) D.col(col) += wt * values_[idx];
    }
  }
  return D;
}

double AdmissibleGraph::lipschitz() const {
  std::vector<std::size_t> inside;
  for (std::size_t k = 0; k < values_.size(); ++k)
    if (node(k).norm() <= rho_ * (1.0 + 1e-12)) inside.push_back(k);
  double L = 0.0;
  for (std::size_t i = 0; i < inside.size(); ++i) {
    Vec ui = node(inside[i]);
    for (std::size_t j = i + 1; j < inside.size(); ++j) {
      double du = (node(inside[j]) - ui).norm();
      L = std::max(L, (values_[inside[j]] - values_[inside[i]]).norm() / du);
    }
  }
  return L;
}

double AdmissibleGraph::sup_distance(const AdmissibleGraph& other) const {
  double s = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    Vec u = node(k);
    if (!other.in_domain(u)) continue;
    s = std::max(s, (values_[k] - other.eval(u)).norm());
  }
  return s;
}

LocalChart::LocalChart(const Vec& x_lifted, const Vec& v, const Mat& U, const Mat& S)
    : x_(x_lifted), v_(v), conj_(conjugator(U, S)) {}

void LocalChart::offsets_to_local(const Vec& dx, const Vec& dv, Vec& u, Vec& s) const {
  const int d = static_cast<int>(x_.size());
  Vec z(2 * d);
  z << dx, dv;
  Vec w = conj_.Q_inv * z;
  u = w.head(d);
  s = w.tail(d);
}

void LocalChart::to_local(const PhasePoint& p, Vec& u, Vec& s) const {
  offsets_to_local(torus_delta(p.x.coords(), x_), p.v - v_, u, s);
}

void LocalChart::local_to_offsets(const Vec& u, const Vec& s, Vec& dx, Vec& dv) const {
  const int d = static_cast<int>(x_.size());
  Vec w(2 * d);
  w << u, s;
  Vec z = conj_.Q * w;
  dx = z.head(d);
  dv = z.tail(d);
}

PhasePoint LocalChart::from_local(const Vec& u, const Vec& s) const {
  Vec dx, dv;
  local_to_offsets(u, s, dx, dv);
  return {TorusPoint(x_ + dx), v_ + dv};
}

LocalMap::LocalMap(const LocalChart& from, const LocalChart& to, const PotentialBasis& basis, const Vec& xi)
    : from_(from), to_(to), basis_(basis), xi_(xi), d_(basis.dim()) {
  g0_ = kick_gradient(basis_, xi_, from_.base_x());
}

void LocalMap::apply(const Vec& u, const Vec& s, Vec& u1, Vec& s1) const {
  Vec dx, dv;
  from_.local_to_offsets(u, s, dx, dv);
  Vec g = kick_gradient(basis_, xi_, Vec(from_.base_x() + dx)) - g0_;
  Vec dv1 = dv - g;
  Vec dx1 = dx + dv1;
  to_.offsets_to_local(dx1, dv1, u1, s1);
}

Mat LocalMap::jacobian(const Vec& u, const Vec& s) const {
  Vec dx, dv;
  from_.local_to_offsets(u, s, dx, dv);
  BlockJacobian J = kickhj::jacobian(Vec(from_.base_x() + dx), basis_, xi_);
  return to_.Q_inv() * J.full() * from_.Q();
}

LinearChartMap::LinearChartMap(Mat J) : J_(std::move(J)) {
  if (J_.rows() != J_.cols() || J_.rows() % 2) throw DimensionError("linear chart map must be 2d x 2d");
}

void LinearChartMap::apply(const Vec& u, const Vec& s, Vec& u1, Vec& s1) const {
  const int d = dim();
  Vec z(2 * d);
  z << u, s;
  Vec w = J_ * z;
  u1 = w.head(d);
  s1 = w.tail(d);
}

double admissible_radius(const AdmissibleGraph& W, const ChartMap& map, double lambda, TransformStep& step) {
  const int d = W.dim();
  const double up = std::exp(0.5 * lambda), down = std::exp(-0.5 * lambda);
  const Mat J0 = map.jacobian(Vec::Zero(d), Vec::Zero(d));
  struct NodeCheck {
    double r;
    bool pass;
    double cone, expansion, sigma;
  };
  std::vector<NodeCheck> checks;
  for (std::size_t k = 0; k < W.node_count(); ++k) {
    Vec u = W.node(k);
    double r = u.norm();
    if (r > W.rho() * (1.0 + 1e-12)) continue;
    const Vec& s = W.value(k);
    Mat J = map.jacobian(u, s);
    double a = conorm(J.topLeftCorner(d, d)) - op_norm(J.topRightCorner(d, d));
    double gamma = a > 0 ? (op_norm(J.bottomLeftCorner(d, d)) + op_norm(J.bottomRightCorner(d, d))) / a
                         : std::numeric_limits<double>::infinity();
    double expansion = std::numeric_limits<double>::infinity();
    if (r > 0) {
      Vec u1, s1;
      map.apply(u, s, u1, s1);
      expansion = u1.norm() / r / up;
    }
    checks.push_back({r, a >= up && gamma <= down, gamma / down, expansion, op_norm(J - J0)});
  }
  std::stable_sort(checks.begin(), checks.end(), [](const NodeCheck& a, const NodeCheck& b) { return a.r < b.r; });
  double radius = 0.0;
  std::size_t k = 0;
  while (k < checks.size()) {
    // all nodes on the same sphere must pass together
    std::size_t e = k;
    bool ok = true;
    while (e < checks.size() && checks[e].r <= checks[k].r + 1e-12 * W.rho()) ok = checks[e++].pass && ok;
    if (!ok) break;
    radius = checks[k].r;
    k = e;
  }
  step.lambda = lambda;
  step.rho = radius;
  step.sigma = 0.0;
  step.worst_cone = 0.0;
  step.min_expansion = std::numeric_limits<double>::infinity();
  for (const auto& c : checks) {
    if (c.r > radius) break;
    step.sigma = std::max(step.sigma, c.sigma);
    step.worst_cone = std::max(step.worst_cone, c.cone);
    step.min_expansion = std::min(step.min_expansion, c.expansion);
  }
  step.paper_condition = std::exp(lambda) - 2.0 * step.sigma > up;
  return radius;
}

namespace {

AdmissibleGraph resample(const AdmissibleGraph& W, double rho) {
  AdmissibleGraph out(W.side(), W.site(), W.dim(), rho, W.nodes_per_axis());
  for (std::size_t k = 0; k < out.node_count(); ++k) {
    Vec u = out.node(k);
    out.value(k) = u.isZero(0.0) ? Vec::Zero(W.dim()) : W.eval(u);
  }
  return out;
}

}  // namespace

AdmissibleGraph graph_transform(const AdmissibleGraph& W, const ChartMap& map, double rho_next) {
  const int d = W.dim();
  AdmissibleGraph out(W.side(), W.site() + 1, d, rho_next, W.nodes_per_axis());
  const Mat J0 = map.jacobian(Vec::Zero(d), Vec::Zero(d));
  const Mat A0 = J0.topLeftCorner(d, d) + J0.topRightCorner(d, d) * W.derivative(Vec::Zero(d));
  const Eigen::PartialPivLU<Mat> lu0(A0);
  std::vector<char> covered(out.node_count(), 1);
  parallel_for(out.node_count(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      const Vec target = out.node(k);
      Vec u = lu0.solve(target), u1, s1;
      for (int it = 0; it < 60; ++it) {
        Vec s = W.eval(u);
        map.apply(u, s, u1, s1);
        Vec r = u1 - target;
        if (r.norm() <= 1e-15 * (1.0 + target.norm())) break;
        Mat J = map.jacobian(u, s);
        Mat G = J.topLeftCorner(d, d) + J.topRightCorner(d, d) * W.derivative(u);
        u -= G.partialPivLu().solve(r);
      }
      if (!W.in_domain(u, 1e-9)) {
        covered[k] = 0;
        continue;
      }
      map.apply(u, W.eval(u), u1, s1);
      out.value(k) = s1;
    }
  });
  if (std::find(covered.begin(), covered.end(), 0) != covered.end())
    throw std::runtime_error("graph transform: image of the graph does not cover radius " + std::to_string(rho_next));
  return out;
}

ManifoldResult unstable_manifold(const Configuration& cfg, const KickedForce& force, const GreenSweep& green,
                                 int site, const ManifoldOptions& opt) {
  const int d = force.dim();
  const int start = site - opt.depth;
  if (start < cfg.m || site > cfg.n || !green.covers(start) || !green.covers(site))
    throw WindowError("orbit or Green bundles do not cover the manifold window");
  std::vector<LocalChart> charts;
  charts.reserve(opt.depth + 1);
  for (int j = start; j <= site; ++j) charts.emplace_back(cfg.at(j), cfg.velocity(j, force), green.u(j), green.s(j));

  ManifoldResult res;
  res.graph = AdmissibleGraph::flat(GraphSide::Unstable, start, d, opt.rho, opt.nodes_per_axis);
  for (int j = start; j < site; ++j) {
    const double gap = green.gap(j);
    const double lambda = std::min(0.5 * std::log1p(gap / (1.0 + force.c2(j))), 1.0);
    LocalMap map(charts[j - start], charts[j + 1 - start], force.basis, force.kicks.xi(j));
    TransformStep step;
    step.site = j;
    double r = admissible_radius(res.graph, map, lambda, step);
    res.steps.push_back(step);
    if (!(r > 0.0)) {
      res.ok = false;
      res.failure = "cone conditions fail at the orbit point, site " + std::to_string(j);
      return res;
    }
    if (r < res.graph.rho()) res.graph = resample(res.graph, r);
    double rho_next = std::min(opt.rho, std::exp(0.5 * lambda) * r);
    try {
      res.graph = graph_transform(res.graph, map, rho_next);
    } catch (const std::runtime_error& e) {
      res.ok = false;
      res.failure = e.what();
      return res;
    }
  }
  if (res.graph.rho() < opt.rho_floor) {
    res.ok = false;
    res.failure = "admissible radius " + std::to_string(res.graph.rho()) + " below floor";
  }
  res.tangency = res.graph.derivative(Vec::Zero(d)).norm();
  return res;
}

GradientGraphReport compare_gradient_graph(const GridField& psi, const Vec& b, const AdmissibleGraph& W,
                                           const LocalChart& chart, double r, double screen_slope,
                                           bool degenerate) {
  GradientGraphReport rep;
  if (degenerate) {
    rep.skipped = true;
    return rep;
  }
  const Vec x0 = reduce(chart.base_x());
  const std::size_t G = psi.size();
  std::vector<char> candidate(G, 0);
  std::vector<double> dist(G, 0.0), radius(G, 0.0);
  for (std::size_t i = 0; i < G; ++i) {
    Vec x = psi.point(i);
    double rad = torus_distance(x, x0);
    if (rad > r) continue;
    ++rep.points_in_radius;
    radius[i] = rad;
    if (psi.one_sided_spread(i) > screen_slope * psi.h()) continue;
    ++rep.points_screened;
    PhasePoint p{TorusPoint(x), psi.central_gradient(i) + b};
    Vec u, s;
    chart.to_local(p, u, s);
    if (!W.in_domain(u)) continue;
    dist[i] = (s - W.eval(u)).norm();
    rep.sup_distance_all = std::max(rep.sup_distance_all, dist[i]);
    candidate[i] = 1;
  }
  rep.screen_fraction = rep.points_in_radius ? double(rep.points_screened) / rep.points_in_radius : 0.0;
  // connected component of candidates around the grid point nearest x0
  const std::size_t c = psi.nearest_index(x0);
  if (!candidate[c]) return rep;
  std::vector<char> seen(G, 0);
  std::deque<std::size_t> queue{c};
  seen[c] = 1;
  while (!queue.empty()) {
    std::size_t i = queue.front();
    queue.pop_front();
    ++rep.points_accepted;
    rep.sup_distance = std::max(rep.sup_distance, dist[i]);
    rep.max_spread = std::max(rep.max_spread, psi.one_sided_spread(i));
    rep.radius_reached = std::max(rep.radius_reached, radius[i]);
    for (int a = 0; a < psi.dim(); ++a)
      for (int o : {-1, 1}) {
        std::size_t nb = psi.shifted(i, a, o);
        if (candidate[nb] && !seen[nb]) {
          seen[nb] = 1;
          queue.push_back(nb);
        }
      }
  }
  return rep;
}

}  // namespace kickhj
