#pragma once

#include <vector>

#include "kickhj/dynamics.hpp"

namespace kickhj {

class ConjugatePointError : public std::runtime_error {
public:
  ConjugatePointError(const std::string& msg, int site, double condition)
      : std::runtime_error(msg), site(site), condition(condition) {}
  int site;
  double condition;
};

struct GreenBundleState {
  int site = 0;
  int k = 0;
  Mat U, S;
  double conorm = 0.0;  // m(U - S)
};

constexpr double kConjugateCondition = 1e12;

// (C + D U)(A + B U)^{-1}, symmetrised; site is only used in the error message
Mat advance_unstable(const Mat& U, const BlockJacobian& J, int site = 0);
// pulls S at site j+1 back through J_j with the inverse blocks, symmetrised
Mat advance_stable(const Mat& S, const BlockJacobian& J, int site = 0);
// vertical pushed through J_{j-1}: D B^{-1}
Mat unstable_seed(const BlockJacobian& J_prev);
// vertical pulled back through J_j: -B^{-1} A
Mat stable_seed(const BlockJacobian& J);

double transversality(const Mat& U, const Mat& S);

struct GreenLedgerRow {
  int k = 0;
  double u_step = 0.0;  // min eig(U_k - U_{k+1})
  double s_step = 0.0;  // min eig(S_{k+1} - S_k)
  double gap = 0.0;     // min eig(U_k - S_k)
  double increment = 0.0;
};

struct GreenBundlesResult {
  std::vector<GreenBundleState> states;  // k = 1..k_max
  std::vector<GreenLedgerRow> ledger;    // k = 1..k_max-1
  bool chain_ok = true;
  bool converged = false;
  int converged_depth = 0;
  double min_ledger = 0.0;
};

GreenBundlesResult green_bundles(const OrbitSegment& orbit, int k_max, int site, double tol = 1e-10,
                                 double chain_tol = 1e-8);

// U from a forward sweep, S from a backward sweep, defined on [first, last].
struct GreenSweep {
  int first = 0;
  std::vector<Mat> U, S;
  int last() const { return first + static_cast<int>(U.size()) - 1; }
  bool covers(int j) const { return j >= first && j <= last(); }
  const Mat& u(int j) const { return U.at(j - first); }
  const Mat& s(int j) const { return S.at(j - first); }
  double gap(int j) const { return transversality(u(j), s(j)); }
};

// Sites [orbit.first()+1, orbit.last()-1]; only sites at least burn-in away from the ends are
// converged, callers trim accordingly.
GreenSweep green_sweep(const OrbitSegment& orbit);

}  // namespace kickhj
