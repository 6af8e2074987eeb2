#include "kickhj/dynamics.hpp"

#include <algorithm>

namespace kickhj {

Mat BlockJacobian::full() const {
  int d = dim();
  Mat J(2 * d, 2 * d);
  J << A, B, C, D;
  return J;
}

BlockJacobian BlockJacobian::inverse() const {
  return {D.transpose(), -B.transpose(), -C.transpose(), A.transpose()};
}

double BlockJacobian::block_identity_residual() const {
  int d = dim();
  double r = (A.transpose() * C - C.transpose() * A).cwiseAbs().maxCoeff();
  r = std::max(r, (B.transpose() * D - D.transpose() * B).cwiseAbs().maxCoeff());
  r = std::max(r, (A.transpose() * D - C.transpose() * B - Mat::Identity(d, d)).cwiseAbs().maxCoeff());
  return r;
}

Mat symplectic_form(int d) {
  Mat W = Mat::Zero(2 * d, 2 * d);
  W.topRightCorner(d, d) = Mat::Identity(d, d);
  W.bottomLeftCorner(d, d) = -Mat::Identity(d, d);
  return W;
}

double BlockJacobian::symplectic_residual() const {
  Mat J = full();
  Mat W = symplectic_form(dim());
  return (J.transpose() * W * J - W).cwiseAbs().maxCoeff();
}

PhasePoint step(const PhasePoint& p, const PotentialBasis& basis, const Vec& xi) {
  require_dim(p.v, basis.dim(), "step velocity");
  Vec g = kick_gradient(basis, xi, p.x.coords());
  Vec v1 = p.v - g;
  return {TorusPoint(p.x.coords() + v1), v1};
}

PhasePoint step_inverse(const PhasePoint& p, const PotentialBasis& basis, const Vec& xi) {
  require_dim(p.v, basis.dim(), "step_inverse velocity");
  TorusPoint xp(p.x.coords() - p.v);
  Vec g = kick_gradient(basis, xi, xp.coords());
  return {xp, p.v + g};
}

BlockJacobian jacobian(const Vec& x, const PotentialBasis& basis, const Vec& xi) {
  Mat H = eval_kick(basis, xi, x).hessian;
  int d = basis.dim();
  Mat I = Mat::Identity(d, d);
  // x' = x + v - grad F(x), v' = v - grad F(x)
  return {I - H, I, -H, I};
}

BlockJacobian jacobian(const PhasePoint& p, const PotentialBasis& basis, const Vec& xi) {
  return jacobian(p.x.coords(), basis, xi);
}

OrbitSegment::OrbitSegment(int first, std::vector<PhasePoint> points)
    : first_(first), points_(std::move(points)) {
  if (points_.empty()) throw WindowError("orbit segment must contain at least one point");
}

const PhasePoint& OrbitSegment::at(int j) const {
  if (j < first() || j > last())
    throw WindowError("orbit index " + std::to_string(j) + " outside [" + std::to_string(first()) +
                      ", " + std::to_string(last()) + "]");
  return points_[j - first_];
}

void OrbitSegment::ensure_jacobians(const KickedForce& force) {
  if (!jac_.empty()) return;
  std::vector<BlockJacobian> jac;
  jac.reserve(points_.size());
  for (int j = first(); j < last(); ++j)
    jac.push_back(jacobian(at(j), force.basis, force.kicks.xi(j)));
  jac_ = std::move(jac);
}

const BlockJacobian& OrbitSegment::jacobian_at(int j) const {
  if (jac_.empty()) throw std::logic_error("orbit Jacobians not computed");
  if (j < first() || j >= last())
    throw WindowError("no Jacobian for orbit step " + std::to_string(j));
  return jac_[j - first_];
}

double OrbitSegment::max_step_residual(const KickedForce& force) const {
  double r = 0.0;
  for (int j = first(); j < last(); ++j) {
    PhasePoint q = step(at(j), force.basis, force.kicks.xi(j));
    const PhasePoint& n = at(j + 1);
    r = std::max(r, torus_delta(q.x.coords(), n.x.coords()).cwiseAbs().maxCoeff());
    r = std::max(r, (q.v - n.v).cwiseAbs().maxCoeff());
  }
  return r;
}

OrbitSegment flow(const PhasePoint& p, const KickedForce& force, int m, int n) {
  int lo = std::min(m, n), hi = std::max(m, n);
  if (!force.kicks.contains(lo) || (hi > lo && !force.kicks.contains(hi - 1)))
    throw WindowError("flow window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "] exceeds kick window");
  std::vector<PhasePoint> pts(hi - lo + 1);
  pts[m - lo] = p;
  if (n >= m) {
    for (int j = m; j < n; ++j)
      pts[j + 1 - lo] = step(pts[j - lo], force.basis, force.kicks.xi(j));
  } else {
    for (int j = m; j > n; --j)
      pts[j - 1 - lo] = step_inverse(pts[j - lo], force.basis, force.kicks.xi(j - 1));
  }
  return OrbitSegment(lo, std::move(pts));
}

}  // namespace kickhj
