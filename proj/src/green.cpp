#include "kickhj/green.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kickhj {

namespace {

Mat solve_right(const Mat& num, const Mat& den, int site, const char* what) {
  double cond = condition_number(den);
  if (!(cond < kConjugateCondition))
    throw ConjugatePointError(std::string(what) + ": conjugate point at site " + std::to_string(site) +
                                  " (condition number " + std::to_string(cond) + ")",
                              site, cond);
  // num * den^{-1} = (den^{-T} num^T)^T
  return symmetrize(den.transpose().partialPivLu().solve(num.transpose()).transpose());
}

}  // namespace

Mat advance_unstable(const Mat& U, const BlockJacobian& J, int site) {
  return solve_right(J.C + J.D * U, J.A + J.B * U, site, "advance_unstable");
}

Mat advance_stable(const Mat& S, const BlockJacobian& J, int site) {
  return solve_right(-J.C.transpose() + J.A.transpose() * S, J.D.transpose() - J.B.transpose() * S, site,
                     "advance_stable");
}

Mat unstable_seed(const BlockJacobian& J_prev) {
  return symmetrize(J_prev.B.transpose().partialPivLu().solve(J_prev.D.transpose()).transpose());
}

Mat stable_seed(const BlockJacobian& J) { return symmetrize(-J.B.partialPivLu().solve(J.A)); }

double transversality(const Mat& U, const Mat& S) { return min_eigenvalue(U - S); }

GreenBundlesResult green_bundles(const OrbitSegment& orbit, int k_max, int site, double tol, double chain_tol) {
  if (k_max < 1) throw std::invalid_argument("green_bundles needs k_max >= 1");
  if (!orbit.covers(site - k_max, site + k_max))
    throw WindowError("orbit does not cover [site - k_max, site + k_max]");
  GreenBundlesResult res;
  for (int k = 1; k <= k_max; ++k) {
    Mat U = unstable_seed(orbit.jacobian_at(site - k));
    for (int t = site - k + 1; t < site; ++t) U = advance_unstable(U, orbit.jacobian_at(t), t);
    Mat S = stable_seed(orbit.jacobian_at(site + k - 1));
    for (int t = site + k - 2; t >= site; --t) S = advance_stable(S, orbit.jacobian_at(t), t);
    GreenBundleState st{site, k, U, S, transversality(U, S)};
    res.states.push_back(std::move(st));
  }
  res.min_ledger = std::numeric_limits<double>::infinity();
  for (int k = 1; k < k_max; ++k) {
    const auto& a = res.states[k - 1];
    const auto& b = res.states[k];
    GreenLedgerRow row;
    row.k = k;
    row.u_step = min_eigenvalue(a.U - b.U);
    row.s_step = min_eigenvalue(b.S - a.S);
    row.gap = a.conorm;
    row.increment = (b.U - a.U).norm() + (b.S - a.S).norm();
    res.min_ledger = std::min({res.min_ledger, row.u_step, row.s_step, row.gap});
    if (!res.converged && row.increment < tol) {
      res.converged = true;
      res.converged_depth = k;
    }
    res.ledger.push_back(row);
  }
  if (k_max == 1) res.min_ledger = res.states[0].conorm;
  res.chain_ok = res.min_ledger > -chain_tol;
  return res;
}

GreenSweep green_sweep(const OrbitSegment& orbit) {
  if (orbit.size() < 3) throw WindowError("green_sweep needs at least three orbit points");
  GreenSweep g;
  g.first = orbit.first() + 1;
  const int last = orbit.last() - 1;
  const int n = last - g.first + 1;
  g.U.resize(n);
  g.S.resize(n);
  g.U[0] = unstable_seed(orbit.jacobian_at(orbit.first()));
  for (int t = g.first; t < last; ++t) g.U[t + 1 - g.first] = advance_unstable(g.U[t - g.first], orbit.jacobian_at(t), t);
  g.S[n - 1] = stable_seed(orbit.jacobian_at(last));
  for (int t = last - 1; t >= g.first; --t) g.S[t - g.first] = advance_stable(g.S[t + 1 - g.first], orbit.jacobian_at(t), t);
  return g;
}

}  // namespace kickhj
