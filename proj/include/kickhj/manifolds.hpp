#pragma once

#include <vector>

#include "kickhj/action.hpp"
#include "kickhj/grid_field.hpp"
#include "kickhj/lyapunov.hpp"

namespace kickhj {

enum class GraphSide { Unstable, Stable };

// s = phi(u) sampled on a tensor stencil over [-rho, rho]^d, cubic Lagrange interpolation.
class AdmissibleGraph {
public:
  AdmissibleGraph() = default;
  AdmissibleGraph(GraphSide side, int site, int dim, double rho, int nodes_per_axis);

  static AdmissibleGraph flat(GraphSide side, int site, int dim, double rho, int nodes_per_axis);

  GraphSide side() const { return side_; }
  int site() const { return site_; }
  int dim() const { return dim_; }
  double rho() const { return rho_; }
  int nodes_per_axis() const { return n_; }
  std::size_t node_count() const { return values_.size(); }
  Vec node(std::size_t k) const;
  const Vec& value(std::size_t k) const { return values_[k]; }
  Vec& value(std::size_t k) { return values_[k]; }
  bool in_domain(const Vec& u, double slack = 1e-12) const;

  Vec eval(const Vec& u) const;
  Mat derivative(const Vec& u) const;
  // empirical Lipschitz constant over stencil pairs inside the ball of radius rho
  double lipschitz() const;
  // sup |phi - other| over this graph's nodes inside both domains
  double sup_distance(const AdmissibleGraph& other) const;

private:
  GraphSide side_ = GraphSide::Unstable;
  int site_ = 0, dim_ = 1;
  double rho_ = 0.0;
  int n_ = 0;
  std::vector<Vec> values_;
};

// Affine chart P_j(u, s) = z_j + Q_j (u, s) around an orbit point with lifted base position.
class LocalChart {
public:
  LocalChart(const Vec& x_lifted, const Vec& v, const Mat& U, const Mat& S);
  const Vec& base_x() const { return x_; }
  const Vec& base_v() const { return v_; }
  const Mat& Q() const { return conj_.Q; }
  const Mat& Q_inv() const { return conj_.Q_inv; }
  // offsets (dx, dv) with dx taken on the torus
  void to_local(const PhasePoint& p, Vec& u, Vec& s) const;
  void offsets_to_local(const Vec& dx, const Vec& dv, Vec& u, Vec& s) const;
  PhasePoint from_local(const Vec& u, const Vec& s) const;
  void local_to_offsets(const Vec& u, const Vec& s, Vec& dx, Vec& dv) const;

private:
  Vec x_, v_;
  Conjugator conj_;
};

// A map between local charts, (u, s) -> (u', s').
class ChartMap {
public:
  virtual ~ChartMap() = default;
  virtual void apply(const Vec& u, const Vec& s, Vec& u1, Vec& s1) const = 0;
  virtual Mat jacobian(const Vec& u, const Vec& s) const = 0;
  virtual int dim() const = 0;
};

// Phi_j written in the charts at j and j+1, evaluated through offsets from the orbit.
class LocalMap : public ChartMap {
public:
  LocalMap(const LocalChart& from, const LocalChart& to, const PotentialBasis& basis, const Vec& xi);
  void apply(const Vec& u, const Vec& s, Vec& u1, Vec& s1) const override;
  Mat jacobian(const Vec& u, const Vec& s) const override;
  int dim() const override { return d_; }

private:
  const LocalChart& from_;
  const LocalChart& to_;
  const PotentialBasis& basis_;
  Vec xi_;
  Vec g0_;
  int d_;
};

// (u, s) -> J (u, s)
class LinearChartMap : public ChartMap {
public:
  explicit LinearChartMap(Mat J);
  void apply(const Vec& u, const Vec& s, Vec& u1, Vec& s1) const override;
  Mat jacobian(const Vec&, const Vec&) const override { return J_; }
  int dim() const override { return static_cast<int>(J_.rows() / 2); }

private:
  Mat J_;
};

struct TransformStep {
  int site = 0;          // graph site before the step
  double rho = 0.0;      // admissible radius used at this site
  double lambda = 0.0;   // min(0.5 log(1 + m(U-S)/(1+C)), 1)
  double sigma = 0.0;    // sup ||DPhi~(p) - DPhi~(0)|| over graph points
  double min_expansion = 0.0;  // min over nodes of |u'| / |u| divided by e^{lambda/2}
  double worst_cone = 0.0;     // max over nodes of gamma_p e^{lambda/2}
  bool paper_condition = false;  // e^lambda - 2 sigma > e^{lambda/2}
};

// Local cone check on the graph points; returns the largest stencil radius (<= W.rho) on which every
// node passes, recording sigma, cone and expansion diagnostics in step.
double admissible_radius(const AdmissibleGraph& W, const ChartMap& map, double lambda, TransformStep& step);

// G(W) = Phi~_j(W) intersected with the box of radius rho_next, resampled on the stencil.
AdmissibleGraph graph_transform(const AdmissibleGraph& W, const ChartMap& map, double rho_next);

struct ManifoldOptions {
  int depth = 30;
  double rho = 0.5;          // target radius in local coordinates
  int nodes_per_axis = 129;
  double rho_floor = 0.0;    // failure when the radius at the target site drops below this
};

struct ManifoldResult {
  AdmissibleGraph graph;
  std::vector<TransformStep> steps;
  bool ok = true;
  std::string failure;
  double tangency = 0.0;  // |D phi(0)|
};

// orbit: refined minimiser (lifted positions in cfg), green: sweep covering [site-depth, site+1]
ManifoldResult unstable_manifold(const Configuration& cfg, const KickedForce& force, const GreenSweep& green,
                                 int site, const ManifoldOptions& opt);

struct GradientGraphReport {
  bool skipped = false;
  std::size_t points_in_radius = 0;
  std::size_t points_screened = 0;     // differentiable
  std::size_t points_accepted = 0;     // connected smooth neighbourhood inside the chart
  double screen_fraction = 0.0;
  double sup_distance = 0.0;           // over the accepted neighbourhood
  double sup_distance_all = 0.0;       // over all screened points inside the chart
  double max_spread = 0.0;             // largest |D+ - D-| on the accepted neighbourhood
  double radius_reached = 0.0;         // largest |x - x0| in the accepted neighbourhood
};

// Gradient graph (x, grad psi(x) + b) near x0 against the graph W in the chart at the same site.
GradientGraphReport compare_gradient_graph(const GridField& psi, const Vec& b, const AdmissibleGraph& W,
                                           const LocalChart& chart, double r, double screen_slope,
                                           bool degenerate = false);

}  // namespace kickhj
