#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kickhj/minimizer.hpp"

namespace kickhj {

// min over taus (>= 3h) of 2[f(x0 + tau w) - f(x0) - <grad f(x0), tau w>] / tau^2.
// Off-grid values are multilinear interpolants; throws SubdifferentialError when f fails the
// one-sided difference screen at x0.
double second_subderivative(const GridField& f, const Vec& x0, const Vec& w, const std::vector<double>& taus,
                            double screen_slope = 100.0);

// taus = 3h * 2^k up to tau_max
std::vector<double> default_taus(const GridField& f, double tau_max = 0.1);

// Part of the barrier at time 0 that does not depend on xi_0:
// psi(x) = psi^-(x, 0) - max_y [psi^+(y, 1) - A(x, y)], so that the barrier is psi - sum c_i F_i.
GridField barrier_base(const GridField& psi_minus0, const GridField& psi_plus1, const Vec& b,
                       const PotentialBasis& basis, const LaxOleinikOptions& opt = {});

// basis functions tabulated on the grid of f, one field per function
std::vector<GridField> tabulate_basis(const GridField& like, const PotentialBasis& basis);

// H(x, c) = psi(x) - sum_i c_i F_i(x)
GridField barrier_family(const GridField& psi, const std::vector<GridField>& F, const Vec& c);

struct FamilyOptions {
  int n_samples = 500;
  std::uint64_t seed = 0;
  double gap_tol = 1e-9;
  double r_max = 0.2;
  double tau_max = 0.1;
  double screen_slope = 100.0;
  double cap_a = 10.0;       // truncation for a_hat^-1, doubled once
  double cap_b = 10.0;       // truncation for b_hat^-1/2
  double valid_fraction = 0.95;
  double cap_tol = 0.1;
};

struct FamilyRow {
  int row = 0;
  Vec c, x;
  double gap = 0.0;
  double a_hat = 0.0;
  double b_hat = 0.0;
  double r_hat = 0.0;
  bool growth_ok = true;
  std::string status;  // ok | non_unique | screen_failure | degenerate
};

struct TruncatedMean {
  double cap = 0.0;
  double mean = 0.0;          // all rows, cap
  double mean_cap2 = 0.0;     // all rows, 2 cap
  double cap_change = 0.0;    // relative
  double mean_half = 0.0;     // first half of the rows, cap
  double sample_change = 0.0; // relative
};

struct FamilyReport {
  std::vector<FamilyRow> rows;
  double fraction_valid = 0.0;
  double fraction_se = 0.0;  // binomial
  TruncatedMean inv_a, inv_sqrt_b;
  bool assumption_failure = false;
  bool integrability_ok = false;
};

FamilyReport barrier_family_experiment(const GridField& psi, const PotentialBasis& basis,
                                       const DensitySpec& density, const FamilyOptions& opt);

struct EnvelopeReport {
  double step = 0.0;
  std::vector<double> t, G;
  std::vector<Vec> x;
  double gap0 = 0.0;
  double dG = 0.0;            // central difference at t = 0
  double expected_dG = 0.0;   // -<F(x(c0)), direction>
  double envelope_error = 0.0;
  bool envelope_ok = false;
  double max_second_difference = 0.0;
  bool concave = false;
  std::vector<double> kinks;  // t where one-sided slopes differ by more than kink_slope
};

// G(c0 + t dir) = min_x H(x, c0 + t dir) for t = k step, |k| <= half_width
EnvelopeReport subderivative_set_probe(const GridField& psi, const PotentialBasis& basis, const Vec& c0,
                                       const Vec& direction, double step, int half_width, double tol = 1e-6,
                                       double kink_slope = 0.1);

struct DualityReport {
  int checked = 0;
  int violations = 0;
  double min_slack = 0.0;
};

// [H(x+v,c) + H(x-v,c) - 2H(x,c)] - <w, F(x+v) - F(x-v)> >= G(c+w) + G(c-w) - 2G(c)
// at the grid argmin x of H(., c), for grid offsets v and random w.
DualityReport duality_spot_check(const GridField& psi, const PotentialBasis& basis, const Vec& c, int pairs,
                                 std::uint64_t seed, int max_cells = 3, double w_scale = 0.05,
                                 double tol = 1e-10);

}  // namespace kickhj
