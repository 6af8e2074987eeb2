#include "kickhj/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

namespace kickhj {

Conjugator conjugator(const Mat& U, const Mat& S) {
  if (U.rows() != S.rows() || U.cols() != S.cols()) throw DimensionError("conjugator: U and S differ in shape");
  const int d = static_cast<int>(U.rows());
  Mat G = sym_inv_sqrt(U - S);
  Mat I = Mat::Identity(d, d);
  Mat left(2 * d, 2 * d), right(2 * d, 2 * d), diag = Mat::Zero(2 * d, 2 * d);
  left << I, I, U, S;
  right << -S, I, U, -I;
  diag.topLeftCorner(d, d) = G;
  diag.bottomRightCorner(d, d) = G;
  return {left * diag, diag * right};
}

ConjugatedStep conjugate_step(const BlockJacobian& J, const Mat& U_j, const Mat& S_j, const Mat& U_j1,
                              const Mat& S_j1, int site) {
  const int d = J.dim();
  ConjugatedStep cs;
  cs.site = site;
  Conjugator c0 = conjugator(U_j, S_j);
  Conjugator c1 = conjugator(U_j1, S_j1);
  cs.Q = c0.Q;
  cs.Q_inv = c0.Q_inv;
  Mat half_next = sym_sqrt(U_j1 - S_j1);
  Mat inv_half = sym_inv_sqrt(U_j - S_j);
  cs.M = half_next * (J.A + J.B * U_j) * inv_half;
  cs.N = half_next * (J.A + J.B * S_j) * inv_half;
  Mat sand = c1.Q_inv * J.full() * c0.Q;
  cs.offdiag = std::max(sand.topRightCorner(d, d).cwiseAbs().maxCoeff(),
                        sand.bottomLeftCorner(d, d).cwiseAbs().maxCoeff());
  cs.block_err = std::max((sand.topLeftCorner(d, d) - cs.M).cwiseAbs().maxCoeff(),
                          (sand.bottomRightCorner(d, d) - cs.N).cwiseAbs().maxCoeff());
  return cs;
}

double block_bootstrap_se(const std::vector<double>& x, const BootstrapOptions& opt) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  std::size_t L = opt.block > 0 ? static_cast<std::size_t>(opt.block)
                                : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::cbrt(double(n)))));
  L = std::min(L, n);
  const std::size_t starts = n - L + 1;
  std::vector<double> means;
  means.reserve(opt.resamples);
  for (int r = 0; r < opt.resamples; ++r) {
    CounterStream s(opt.seed, r);
    double acc = 0.0;
    std::size_t taken = 0;
    while (taken < n) {
      std::size_t b = static_cast<std::size_t>(s.next_u64() % starts);
      for (std::size_t k = 0; k < L && taken < n; ++k, ++taken) acc += x[b + k];
    }
    means.push_back(acc / n);
  }
  double mu = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  return std::sqrt(var / (means.size() - 1));
}

namespace {

// one QR step of Y = A Q; returns log|R_ii| and overwrites Q
Vec qr_step(const Mat& A, Mat& Q) {
  Mat Y = A * Q;
  Eigen::HouseholderQR<Mat> qr(Y);
  Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  Mat Qn = qr.householderQ() * Mat::Identity(Y.rows(), Y.cols());
  Vec inc(Y.cols());
  for (Eigen::Index i = 0; i < Y.cols(); ++i) {
    if (R(i, i) < 0) Qn.col(i) = -Qn.col(i);
    inc(i) = std::log(std::abs(R(i, i)));
  }
  Q = Qn;
  return inc;
}

}  // namespace

SpectrumReport lyapunov_spectrum(const OrbitSegment& orbit, const KickedForce& force, int first_site, int n_steps,
                                 LyapunovMethod method, const GreenSweep* green, const BootstrapOptions& boot) {
  if (n_steps < 1) throw std::invalid_argument("lyapunov_spectrum needs n_steps >= 1");
  if (!orbit.covers(first_site, first_site + n_steps))
    throw WindowError("orbit too short for " + std::to_string(n_steps) + " steps");
  if (!orbit.has_jacobians()) throw std::logic_error("orbit Jacobians not computed");
  if (method == LyapunovMethod::Conjugated && !green)
    throw std::invalid_argument("conjugated method needs Green bundles");
  if (green && !(green->covers(first_site) && green->covers(first_site + n_steps)))
    throw WindowError("Green sweep does not cover the exponent window");

  const int d = force.dim();
  const int cols = method == LyapunovMethod::QR ? 2 * d : d;
  SpectrumReport rep;
  rep.method = method;
  rep.n_steps = n_steps;
  std::vector<std::vector<double>> inc(cols, std::vector<double>(n_steps));
  std::vector<Vec> cum(n_steps);
  Mat Q = Mat::Identity(cols, cols);
  Vec acc = Vec::Zero(cols);
  rep.min_expansion_margin = rep.min_expansion_margin_literal = std::numeric_limits<double>::infinity();

  for (int t = 0; t < n_steps; ++t) {
    const int j = first_site + t;
    const BlockJacobian& J = orbit.jacobian_at(j);
    std::optional<ConjugatedStep> cs;
    if (green) {
      cs = conjugate_step(J, green->u(j), green->s(j), green->u(j + 1), green->s(j + 1), j);
      double m = green->gap(j);
      double cj = force.c2(j);
      double lit = 0.5 * std::log1p(m / (1.0 + cj));
      // one-step Green gap 2I - Hess F_j enters the sharp form of the bound
      Mat Hj = eval_kick(force.basis, force.kicks.xi(j), orbit.at(j).x).hessian;
      double k1 = op_norm(2.0 * Mat::Identity(d, d) - Hj);
      double sharp = 0.5 * std::log1p(m / std::max(1.0 + cj, k1));
      double lm = std::log(conorm(cs->M));
      rep.lower_integrand.push_back(lit);
      rep.min_expansion_margin = std::min(rep.min_expansion_margin, lm - sharp);
      rep.min_expansion_margin_literal = std::min(rep.min_expansion_margin_literal, lm - lit);
    }
    Vec step = method == LyapunovMethod::QR ? qr_step(J.full(), Q) : qr_step(cs->M, Q);
    for (int i = 0; i < cols; ++i) inc[i][t] = step(i);
    acc += step;
    cum[t] = acc / double(t + 1);
  }

  std::vector<double> raw(cols), se(cols);
  for (int i = 0; i < cols; ++i) {
    raw[i] = acc(i) / n_steps;
    se[i] = block_bootstrap_se(inc[i], boot);
  }
  // map column series onto the full ascending spectrum
  std::vector<int> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return raw[a] < raw[b]; });
  // column carrying lambda_{d+1}
  int top_col = method == LyapunovMethod::QR ? order[d] : order[0];
  if (method == LyapunovMethod::QR) {
    for (int i : order) {
      rep.exponents.push_back(raw[i]);
      rep.standard_errors.push_back(se[i]);
    }
    for (int t = 0; t < n_steps; ++t) {
      std::vector<double> row;
      for (int i : order) row.push_back(cum[t](i));
      rep.running.push_back(std::move(row));
    }
  } else {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      rep.exponents.push_back(-raw[*it]);
      rep.standard_errors.push_back(se[*it]);
    }
    for (int i : order) {
      rep.exponents.push_back(raw[i]);
      rep.standard_errors.push_back(se[i]);
    }
    for (int t = 0; t < n_steps; ++t) {
      std::vector<double> row;
      for (auto it = order.rbegin(); it != order.rend(); ++it) row.push_back(-cum[t](*it));
      for (int i : order) row.push_back(cum[t](i));
      rep.running.push_back(std::move(row));
    }
  }
  if (green) {
    rep.lower_bound = std::accumulate(rep.lower_integrand.begin(), rep.lower_integrand.end(), 0.0) / n_steps;
    rep.lower_bound_se = block_bootstrap_se(rep.lower_integrand, boot);
    std::vector<double> diff(n_steps);
    for (int t = 0; t < n_steps; ++t) diff[t] = inc[top_col][t] - rep.lower_integrand[t];
    rep.top_minus_bound_se = block_bootstrap_se(diff, boot);
  }
  return rep;
}

}  // namespace kickhj
