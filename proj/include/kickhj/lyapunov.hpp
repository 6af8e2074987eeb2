#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kickhj/green.hpp"

namespace kickhj {

struct Conjugator {
  Mat Q, Q_inv;
};

// Q = [[I, I], [U, S]] diag(G, G), G = (U - S)^{-1/2}; Q_inv = diag(G, G) [[-S, I], [U, -I]]
Conjugator conjugator(const Mat& U, const Mat& S);

struct ConjugatedStep {
  int site = 0;
  Mat Q, Q_inv, M, N;
  double offdiag = 0.0;   // largest off-diagonal block entry of Q_{j+1}^{-1} J Q_j
  double block_err = 0.0; // diagonal blocks of the sandwich vs M, N
};

ConjugatedStep conjugate_step(const BlockJacobian& J, const Mat& U_j, const Mat& S_j, const Mat& U_j1,
                              const Mat& S_j1, int site = 0);

enum class LyapunovMethod { QR, Conjugated };

struct BootstrapOptions {
  int resamples = 200;
  int block = 0;  // 0: n^{1/3}
  std::uint64_t seed = 0x5EEDULL;
};

// moving-block bootstrap standard error of the mean of a stationary series
double block_bootstrap_se(const std::vector<double>& x, const BootstrapOptions& opt = {});

struct SpectrumReport {
  LyapunovMethod method = LyapunovMethod::QR;
  int n_steps = 0;
  std::vector<double> exponents;        // ascending
  std::vector<double> standard_errors;  // aligned with exponents
  std::vector<std::vector<double>> running;  // running averages per step, ascending order at the end
  std::vector<double> lower_integrand;  // 0.5 log(1 + m(U_j - S_j) / (1 + C_j))
  double lower_bound = 0.0;
  double lower_bound_se = 0.0;
  double top_minus_bound_se = 0.0;  // paired SE of lambda_{d+1} - lower bound
  // per-step M expansion check: log m(M_j) - integrand_j, minimum over steps
  double min_expansion_margin = 0.0;
  double min_expansion_margin_literal = 0.0;
};

// exponents from the sites [first_site, first_site + n_steps); green is needed for the conjugated
// method and for the lower bound, optional for QR
SpectrumReport lyapunov_spectrum(const OrbitSegment& orbit, const KickedForce& force, int first_site, int n_steps,
                                 LyapunovMethod method, const GreenSweep* green = nullptr,
                                 const BootstrapOptions& boot = {});

}  // namespace kickhj
