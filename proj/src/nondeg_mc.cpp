#include "kickhj/nondeg_mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kickhj/parallel.hpp"

namespace kickhj {

double second_subderivative(const GridField& f, const Vec& x0, const Vec& w, const std::vector<double>& taus,
                            double screen_slope) {
  require_dim(x0, f.dim(), "second_subderivative x0");
  require_dim(w, f.dim(), "second_subderivative direction");
  const double h = f.h();
  const double f0 = f.interpolate(x0);
  Vec grad(f.dim());
  for (int a = 0; a < f.dim(); ++a) {
    Vec e = Vec::Zero(f.dim());
    e(a) = h;
    double fp = f.interpolate(x0 + e), fm = f.interpolate(x0 - e);
    double spread = std::abs((fp - f0) - (f0 - fm)) / h;
    if (spread > screen_slope * h)
      throw SubdifferentialError("one-sided differences disagree at x0 along axis " + std::to_string(a), spread);
    grad(a) = (fp - fm) / (2.0 * h);
  }
  const Vec u = w.normalized();
  double best = std::numeric_limits<double>::infinity();
  for (double tau : taus) {
    if (tau < 3.0 * h - 1e-15) continue;
    double q = 2.0 * (f.interpolate(x0 + tau * u) - f0 - tau * grad.dot(u)) / (tau * tau);
    best = std::min(best, q);
  }
  if (!std::isfinite(best)) throw std::invalid_argument("second_subderivative: no tau >= 3h in the list");
  return best;
}

std::vector<double> default_taus(const GridField& f, double tau_max) {
  std::vector<double> t;
  for (double tau = 3.0 * f.h(); tau <= tau_max + 1e-15; tau *= 2.0) t.push_back(tau);
  std::reverse(t.begin(), t.end());
  return t;
}

GridField barrier_base(const GridField& psi_minus0, const GridField& psi_plus1, const Vec& b,
                       const PotentialBasis& basis, const LaxOleinikOptions& opt) {
  require_same_shape(psi_minus0, psi_plus1, "barrier_base");
  GridField T = apply_forward(psi_plus1, b, basis, Vec::Zero(basis.count()), opt);
  GridField psi = psi_minus0 - T;
  return psi + (-psi.min());
}

std::vector<GridField> tabulate_basis(const GridField& like, const PotentialBasis& basis) {
  std::vector<GridField> out;
  for (int i = 0; i < basis.count(); ++i) {
    GridField g(like.dim(), like.n());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = basis.function(i).value(g.point(k));
    out.push_back(std::move(g));
  }
  return out;
}

GridField barrier_family(const GridField& psi, const std::vector<GridField>& F, const Vec& c) {
  GridField H = psi;
  for (std::size_t k = 0; k < H.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) s += c(i) * F[i][k];
    H[k] = psi[k] - s;
  }
  return H;
}

namespace {

TruncatedMean truncated(const std::vector<double>& v, double cap) {
  TruncatedMean t;
  t.cap = cap;
  if (v.empty()) return t;
  auto mean = [&](std::size_t n, double cp) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::min(v[i], cp);
    return s / n;
  };
  t.mean = mean(v.size(), cap);
  t.mean_cap2 = mean(v.size(), 2.0 * cap);
  t.cap_change = std::abs(t.mean_cap2 - t.mean) / std::max(t.mean, 1e-300);
  std::size_t half = std::max<std::size_t>(1, v.size() / 2);
  t.mean_half = mean(half, cap);
  t.sample_change = std::abs(t.mean - t.mean_half) / std::max(t.mean, 1e-300);
  return t;
}

std::uint64_t family_key(std::uint64_t seed) { return splitmix64(seed ^ 0x6e6f6e646567ULL); }

}  // namespace

FamilyReport barrier_family_experiment(const GridField& psi, const PotentialBasis& basis,
                                       const DensitySpec& density, const FamilyOptions& opt) {
  if (opt.n_samples < 2) throw std::invalid_argument("barrier_family_experiment needs n_samples >= 2");
  const auto F = tabulate_basis(psi, basis);
  const auto taus = default_taus(psi, opt.tau_max);
  const int d = psi.dim();
  FamilyReport rep;
  rep.rows.resize(opt.n_samples);
  const std::uint64_t key = family_key(opt.seed);

  parallel_for(opt.n_samples, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      FamilyRow& row = rep.rows[r];
      row.row = static_cast<int>(r);
      CounterStream s(key, static_cast<std::int64_t>(r));
      row.c = density.draw(s);
      GridField H = barrier_family(psi, F, row.c);
      H = H + (-H.min());
      GlobalMinimizer gm = find_global_minimizer(H, 1, opt.gap_tol);
      row.x = H.point(gm.grid_index);
      row.gap = gm.gap;
      try {
        double a = std::numeric_limits<double>::infinity();
        for (int ax = 0; ax < d; ++ax)
          for (double sg : {1.0, -1.0}) {
            Vec w = Vec::Zero(d);
            w(ax) = sg;
            a = std::min(a, second_subderivative(H, row.x, w, taus, opt.screen_slope));
          }
        row.a_hat = a;
      } catch (const SubdifferentialError&) {
        row.a_hat = std::numeric_limits<double>::quiet_NaN();
        row.status = "screen_failure";
      }
      NondegProbe np = nondeg_probe(H, TorusPoint(row.x), opt.r_max);
      row.b_hat = np.degenerate ? 0.0 : np.b_hat;
      row.r_hat = np.r_hat;
      if (!np.degenerate) {
        // quadratic growth on a 4x refined set of interpolated points
        const double h = H.h(), h0 = H[gm.grid_index];
        const int steps = static_cast<int>(std::floor(np.r_hat / h)) * 4;
        for (int ax = 0; ax < d && row.growth_ok; ++ax)
          for (int k = -steps; k <= steps; ++k) {
            double t = k * h / 4.0;
            if (std::abs(t) < 3.0 * h || std::abs(t) > np.r_hat) continue;
            Vec y = row.x;
            y(ax) += t;
            if (H.interpolate(y) - h0 < row.b_hat * t * t - 1e-12) {
              row.growth_ok = false;
              break;
            }
          }
      }
      if (row.status.empty()) {
        if (!(row.gap > opt.gap_tol))
          row.status = "non_unique";
        else if (np.degenerate || !(row.a_hat > 0.0))
          row.status = "degenerate";
        else
          row.status = "ok";
      }
    }
  });

  std::vector<double> inv_a, inv_sqrt_b;
  int valid = 0;
  for (const auto& row : rep.rows) {
    if (row.gap > opt.gap_tol && row.a_hat > 0.0) ++valid;
    inv_a.push_back(row.a_hat > 0.0 ? 1.0 / row.a_hat : std::numeric_limits<double>::infinity());
    inv_sqrt_b.push_back(row.b_hat > 0.0 ? 1.0 / std::sqrt(row.b_hat) : std::numeric_limits<double>::infinity());
  }
  const double n = opt.n_samples;
  rep.fraction_valid = valid / n;
  rep.fraction_se = std::sqrt(rep.fraction_valid * (1.0 - rep.fraction_valid) / n);
  rep.inv_a = truncated(inv_a, opt.cap_a);
  rep.inv_sqrt_b = truncated(inv_sqrt_b, opt.cap_b);
  rep.assumption_failure = rep.fraction_valid < opt.valid_fraction;
  rep.integrability_ok = rep.inv_a.cap_change < opt.cap_tol && rep.inv_sqrt_b.cap_change < opt.cap_tol;
  return rep;
}

EnvelopeReport subderivative_set_probe(const GridField& psi, const PotentialBasis& basis, const Vec& c0,
                                       const Vec& direction, double step, int half_width, double tol,
                                       double kink_slope) {
  if (half_width < 1 || !(step > 0)) throw std::invalid_argument("subderivative_set_probe: bad c-grid");
  require_dim(c0, basis.count(), "subderivative_set_probe c0");
  require_dim(direction, basis.count(), "subderivative_set_probe direction");
  const auto F = tabulate_basis(psi, basis);
  EnvelopeReport rep;
  rep.step = step;
  std::size_t centre_idx = 0;
  for (int k = -half_width; k <= half_width; ++k) {
    double t = k * step;
    GridField H = barrier_family(psi, F, Vec(c0 + t * direction));
    std::size_t i = H.argmin();
    rep.t.push_back(t);
    rep.G.push_back(H[i]);
    rep.x.push_back(H.point(i));
    if (k == 0) {
      centre_idx = i;
      rep.gap0 = find_global_minimizer(H).gap;
    }
  }
  const int c = half_width;
  rep.dG = (rep.G[c + 1] - rep.G[c - 1]) / (2.0 * step);
  double e = 0.0;
  for (std::size_t i = 0; i < F.size(); ++i) e -= direction(i) * F[i][centre_idx];
  rep.expected_dG = e;
  rep.envelope_error = std::abs(rep.dG - rep.expected_dG);
  rep.envelope_ok = rep.envelope_error <= 2.0 * step;
  rep.max_second_difference = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < rep.G.size(); ++k) {
    double d2 = rep.G[k + 1] - 2.0 * rep.G[k] + rep.G[k - 1];
    rep.max_second_difference = std::max(rep.max_second_difference, d2);
    double jump = ((rep.G[k] - rep.G[k - 1]) - (rep.G[k + 1] - rep.G[k])) / step;
    if (jump > kink_slope) rep.kinks.push_back(rep.t[k]);
  }
  rep.concave = rep.max_second_difference <= tol;
  return rep;
}

DualityReport duality_spot_check(const GridField& psi, const PotentialBasis& basis, const Vec& c, int pairs,
                                 std::uint64_t seed, int max_cells, double w_scale, double tol) {
  const auto F = tabulate_basis(psi, basis);
  const int d = psi.dim(), M = basis.count();
  GridField H = barrier_family(psi, F, c);
  const std::size_t x = H.argmin();
  auto G = [&](const Vec& cc) { return barrier_family(psi, F, cc).min(); };
  const double G0 = H[x];
  DualityReport rep;
  rep.min_slack = std::numeric_limits<double>::infinity();
  CounterStream s(splitmix64(seed ^ 0x6475616cULL), 0);
  for (int p = 0; p < pairs; ++p) {
    std::size_t xp = x, xm = x;
    bool zero = true;
    for (int a = 0; a < d; ++a) {
      int k = static_cast<int>(std::floor(s.uniform() * (2 * max_cells + 1))) - max_cells;
      if (k != 0) zero = false;
      xp = H.shifted(xp, a, k);
      xm = H.shifted(xm, a, -k);
    }
    if (zero) continue;
    Vec w(M);
    for (int i = 0; i < M; ++i) w(i) = w_scale * s.normal();
    double cross = 0.0;
    for (int i = 0; i < M; ++i) cross += w(i) * (F[i][xp] - F[i][xm]);
    double lhs = H[xp] + H[xm] - 2.0 * G0 - cross;
    double rhs = G(Vec(c + w)) + G(Vec(c - w)) - 2.0 * G0;
    double slack = lhs - rhs;
    ++rep.checked;
    rep.min_slack = std::min(rep.min_slack, slack);
    if (slack < -tol) ++rep.violations;
  }
  return rep;
}

}  // namespace kickhj
