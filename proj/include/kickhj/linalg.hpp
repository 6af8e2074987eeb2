#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace kickhj {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class NotPositiveDefiniteError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

Mat symmetrize(const Mat& m);
double min_eigenvalue(const Mat& sym);
double max_eigenvalue(const Mat& sym);

// symmetric square root and inverse square root, both require m > 0
Mat sym_sqrt(const Mat& spd);
Mat sym_inv_sqrt(const Mat& spd);

double op_norm(const Mat& m);
// smallest singular value
double conorm(const Mat& m);
double condition_number(const Mat& m);

void require_dim(const Vec& v, int d, const char* what);

}  // namespace kickhj
