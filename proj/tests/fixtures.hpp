#pragma once

#include "kickhj/green.hpp"
#include "kickhj/lyapunov.hpp"
#include "kickhj/minimizer.hpp"

namespace fixture {

using namespace kickhj;

inline PotentialBasis cos_basis() { return PotentialBasis(1, {FourierFunction(1, {{{1}, 1.0, 0.0}})}); }

inline KickedForce zero_force(int d, int lo, int hi) {
  auto basis = PotentialBasis::default_basis(d);
  return {basis, KickSequence(0, lo, hi, std::vector<Vec>(hi - lo + 1, Vec::Zero(basis.count())), nullptr)};
}

inline KickedForce kicked(int d, double sigma, std::uint64_t seed, int lo, int hi) {
  auto basis = PotentialBasis::default_basis(d);
  return {basis, sample_kicks(DensitySpec::isotropic_gaussian(basis.count(), sigma), seed, lo, hi)};
}

// Seeded d = 1 run: viscosity histories on [-pad, len + pad], global minimiser at 0, refined orbit.
struct Run {
  KickedForce force;
  Vec b;
  int pad, len;
  ViscosityHistory minus, plus;
  GridField barrier0;
  GlobalMinimizer gm;
  MinimizingOrbit mo;
  OrbitSegment orbit;
  GreenSweep sweep;
};

inline Run make_run(std::uint64_t seed, int N = 256, int len = 400, int pad = 120, double sigma = 0.1) {
  Run r;
  r.force = kicked(1, sigma, seed, -pad - 300, len + pad + 300);
  r.b = Vec::Zero(1);
  r.pad = pad;
  r.len = len;
  SolveOptions so;
  so.tol = 1e-12;
  auto sm = solve_backward(r.force, r.b, N, -pad, so);
  auto sp = solve_forward(r.force, r.b, N, len + pad, so);
  r.minus = propagate_backward(sm.history.at(-pad), r.force, r.b, len + pad);
  r.plus = propagate_forward(sp.history.at(len + pad), r.force, r.b, -pad);
  r.barrier0 = barrier(r.minus.at(0), r.plus.at(0));
  r.gm = find_global_minimizer(r.barrier0);
  r.mo = minimizing_orbit(r.minus, r.plus, r.force, r.b, 0, r.gm.grid_index, -pad, len + pad);
  r.orbit = r.mo.orbit;
  r.orbit.ensure_jacobians(r.force);
  r.sweep = green_sweep(r.orbit);
  return r;
}

}  // namespace fixture
