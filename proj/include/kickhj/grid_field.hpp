#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kickhj/linalg.hpp"

namespace kickhj {

// Scalar field on the uniform grid (i_1/N, ..., i_d/N), axis 0 fastest.
class GridField {
public:
  GridField() = default;
  GridField(int dim, int n, double fill = 0.0);
  GridField(int dim, int n, std::vector<double> values);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double h() const { return 1.0 / n_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  int time = 0;
  std::uint64_t seed = 0;

  // coordinate i_a / N of axis a
  double axis_coord(int i) const { return static_cast<double>(i) / n_; }
  Vec point(std::size_t idx) const;
  std::vector<int> multi_index(std::size_t idx) const;
  std::size_t flat_index(const std::vector<int>& mi) const;  // periodic wrap
  // idx shifted by `offset` cells along axis a, periodic
  std::size_t shifted(std::size_t idx, int axis, int offset) const;
  std::size_t nearest_index(const Vec& x) const;

  double min() const;
  double max() const;
  std::size_t argmin() const;  // smallest index among ties
  GridField normalized_min0() const;
  GridField operator-(const GridField& o) const;
  GridField operator+(double c) const;

  // periodic multilinear interpolation
  double interpolate(const Vec& x) const;

  // one-sided and central differences along axis a
  double forward_diff(std::size_t idx, int a) const;
  double backward_diff(std::size_t idx, int a) const;
  Vec central_gradient(std::size_t idx) const;
  double second_diff(std::size_t idx, int a) const;
  // max over axes of |D+ f - D- f|
  double one_sided_spread(std::size_t idx) const;

  bool same_shape(const GridField& o) const { return dim_ == o.dim_ && n_ == o.n_; }

private:
  int dim_ = 0;
  int n_ = 0;
  std::vector<double> values_;
};

void require_same_shape(const GridField& f, const GridField& g, const char* what);

// min over c of sup |f - g - c|
double quotient_distance(const GridField& f, const GridField& g);

// max over grid points and axes of the second difference
double max_second_difference(const GridField& f);

// Flat little-endian float64 file plus JSON header (dim, N, time, seed).
void write_field(const GridField& f, const std::string& stem);
GridField read_field(const std::string& stem);
void write_field_csv(const GridField& f, const std::string& path);

}  // namespace kickhj
