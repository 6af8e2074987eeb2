#include "kickhj/linalg.hpp"

#include <limits>

namespace kickhj {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

static Mat sym_power(const Mat& spd, double p) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(spd));
  const Vec& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0)
    throw NotPositiveDefiniteError("matrix is not positive definite (min eigenvalue " +
                                   std::to_string(ev.minCoeff()) + ")");
  Vec scaled = ev.array().pow(p).matrix();
  return es.eigenvectors() * scaled.asDiagonal() * es.eigenvectors().transpose();
}

Mat sym_sqrt(const Mat& spd) { return sym_power(spd, 0.5); }
Mat sym_inv_sqrt(const Mat& spd) { return sym_power(spd, -0.5); }

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

double conorm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double condition_number(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const Vec& s = svd.singularValues();
  double lo = s(s.size() - 1);
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / lo;
}

void require_dim(const Vec& v, int d, const char* what) {
  if (v.size() != d)
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(d) +
                         ", got " + std::to_string(v.size()));
}

}  // namespace kickhj
