#pragma once

#include <optional>
#include <vector>

#include "kickhj/potentials.hpp"

namespace kickhj {

struct PhasePoint {
  TorusPoint x;
  Vec v;
  int dim() const { return x.dim(); }
};

// DPhi in block form [[A, B], [C, D]].
struct BlockJacobian {
  Mat A, B, C, D;

  int dim() const { return static_cast<int>(A.rows()); }
  Mat full() const;
  // closed-form symplectic inverse [[D^T, -B^T], [-C^T, A^T]]
  BlockJacobian inverse() const;
  // max residual of A^T C = C^T A, B^T D = D^T B, A^T D - C^T B = I
  double block_identity_residual() const;
  // max entry of J^T Omega J - Omega
  double symplectic_residual() const;
};

Mat symplectic_form(int d);

PhasePoint step(const PhasePoint& p, const PotentialBasis& basis, const Vec& xi);
PhasePoint step_inverse(const PhasePoint& p, const PotentialBasis& basis, const Vec& xi);
BlockJacobian jacobian(const Vec& x, const PotentialBasis& basis, const Vec& xi);
BlockJacobian jacobian(const PhasePoint& p, const PotentialBasis& basis, const Vec& xi);

class OrbitSegment {
public:
  OrbitSegment() = default;
  OrbitSegment(int first, std::vector<PhasePoint> points);

  int first() const { return first_; }
  int last() const { return first_ + static_cast<int>(points_.size()) - 1; }
  int size() const { return static_cast<int>(points_.size()); }
  bool covers(int lo, int hi) const { return lo >= first() && hi <= last(); }
  const PhasePoint& at(int j) const;
  const std::vector<PhasePoint>& points() const { return points_; }

  // Jacobian of Phi_j at z_j, for first() <= j < last(). Filled by ensure_jacobians.
  void ensure_jacobians(const KickedForce& force);
  bool has_jacobians() const { return !jac_.empty(); }
  const BlockJacobian& jacobian_at(int j) const;

  // max over steps of |Phi_j(z_j) - z_{j+1}| with the torus metric on positions
  double max_step_residual(const KickedForce& force) const;

  std::optional<double> action;

private:
  int first_ = 0;
  std::vector<PhasePoint> points_;
  std::vector<BlockJacobian> jac_;
};

// Phi_{m,n}(p) as a segment over [min(m,n), max(m,n)]; p sits at index m.
OrbitSegment flow(const PhasePoint& p, const KickedForce& force, int m, int n);

}  // namespace kickhj
