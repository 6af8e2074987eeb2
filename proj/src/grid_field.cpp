#include "kickhj/grid_field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include <json.hpp>

namespace kickhj {

GridField::GridField(int dim, int n, double fill) : dim_(dim), n_(n) {
  if (dim < 1 || dim > 3) throw DimensionError("grid dimension must be 1, 2 or 3");
  if (n < 2) throw std::invalid_argument("grid resolution must be at least 2");
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
  values_.assign(total, fill);
}

GridField::GridField(int dim, int n, std::vector<double> values) : GridField(dim, n) {
  if (values.size() != values_.size()) throw DimensionError("grid value count mismatch");
  values_ = std::move(values);
}

std::vector<int> GridField::multi_index(std::size_t idx) const {
  std::vector<int> mi(dim_);
  for (int a = 0; a < dim_; ++a) {
    mi[a] = static_cast<int>(idx % n_);
    idx /= n_;
  }
  return mi;
}

Vec GridField::point(std::size_t idx) const {
  Vec x(dim_);
  for (int a = 0; a < dim_; ++a) {
    x(a) = axis_coord(static_cast<int>(idx % n_));
    idx /= n_;
  }
  return x;
}

std::size_t GridField::flat_index(const std::vector<int>& mi) const {
  std::size_t idx = 0, stride = 1;
  for (int a = 0; a < dim_; ++a) {
    int i = ((mi[a] % n_) + n_) % n_;
    idx += stride * i;
    stride *= n_;
  }
  return idx;
}

std::size_t GridField::shifted(std::size_t idx, int axis, int offset) const {
  std::size_t stride = 1;
  for (int a = 0; a < axis; ++a) stride *= n_;
  int i = static_cast<int>((idx / stride) % n_);
  int j = ((i + offset) % n_ + n_) % n_;
  return idx + (static_cast<std::ptrdiff_t>(j) - i) * static_cast<std::ptrdiff_t>(stride);
}

std::size_t GridField::nearest_index(const Vec& x) const {
  std::vector<int> mi(dim_);
  for (int a = 0; a < dim_; ++a) mi[a] = static_cast<int>(std::lround(x(a) * n_));
  return flat_index(mi);
}

double GridField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double GridField::max() const { return *std::max_element(values_.begin(), values_.end()); }

std::size_t GridField::argmin() const {
  return static_cast<std::size_t>(std::min_element(values_.begin(), values_.end()) - values_.begin());
}

GridField GridField::normalized_min0() const {
  GridField out = *this;
  double m = min();
  for (auto& v : out.values_) v -= m;
  return out;
}

GridField GridField::operator-(const GridField& o) const {
  require_same_shape(*this, o, "field difference");
  GridField out = *this;
  for (std::size_t i = 0; i < values_.size(); ++i) out.values_[i] -= o.values_[i];
  return out;
}

GridField GridField::operator+(double c) const {
  GridField out = *this;
  for (auto& v : out.values_) v += c;
  return out;
}

double GridField::interpolate(const Vec& x) const {
  require_dim(x, dim_, "interpolate");
  std::vector<int> base(dim_);
  std::vector<double> frac(dim_);
  for (int a = 0; a < dim_; ++a) {
    double t = x(a) * n_;
    double fl = std::floor(t);
    base[a] = static_cast<int>(fl);
    frac[a] = t - fl;
  }
  double acc = 0.0;
  std::vector<int> mi(dim_);
  for (int corner = 0; corner < (1 << dim_); ++corner) {
    double w = 1.0;
    for (int a = 0; a < dim_; ++a) {
      int bit = (corner >> a) & 1;
      mi[a] = base[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    if (w != 0.0) acc += w * values_[flat_index(mi)];
  }
  return acc;
}

double GridField::forward_diff(std::size_t idx, int a) const {
  return (values_[shifted(idx, a, 1)] - values_[idx]) * n_;
}

double GridField::backward_diff(std::size_t idx, int a) const {
  return (values_[idx] - values_[shifted(idx, a, -1)]) * n_;
}

Vec GridField::central_gradient(std::size_t idx) const {
  Vec g(dim_);
  for (int a = 0; a < dim_; ++a)
    g(a) = (values_[shifted(idx, a, 1)] - values_[shifted(idx, a, -1)]) * (0.5 * n_);
  return g;
}

double GridField::second_diff(std::size_t idx, int a) const {
  return (values_[shifted(idx, a, 1)] - 2.0 * values_[idx] + values_[shifted(idx, a, -1)]) *
         (static_cast<double>(n_) * n_);
}

double GridField::one_sided_spread(std::size_t idx) const {
  double s = 0.0;
  for (int a = 0; a < dim_; ++a) s = std::max(s, std::abs(forward_diff(idx, a) - backward_diff(idx, a)));
  return s;
}

void require_same_shape(const GridField& f, const GridField& g, const char* what) {
  if (!f.same_shape(g))
    throw DimensionError(std::string(what) + ": resolution mismatch (" + std::to_string(f.n()) +
                         "^" + std::to_string(f.dim()) + " vs " + std::to_string(g.n()) + "^" +
                         std::to_string(g.dim()) + ")");
}

double quotient_distance(const GridField& f, const GridField& g) {
  require_same_shape(f, g, "quotient_distance");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double d = f[i] - g[i];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return 0.5 * (hi - lo);
}

double max_second_difference(const GridField& f) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i)
    for (int a = 0; a < f.dim(); ++a) m = std::max(m, f.second_diff(i, a));
  return m;
}

void write_field(const GridField& f, const std::string& stem) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  {
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + stem + ".bin");
    bin.write(reinterpret_cast<const char*>(f.values().data()),
              static_cast<std::streamsize>(f.size() * sizeof(double)));
  }
  nlohmann::json h = {{"dim", f.dim()}, {"N", f.n()},         {"time", f.time},
                      {"seed", f.seed}, {"dtype", "f64-le"}, {"count", f.size()},
                      {"layout", "axis0-fastest"}};
  std::ofstream js(stem + ".json");
  js << h.dump(2) << "\n";
}

GridField read_field(const std::string& stem) {
  std::ifstream js(stem + ".json");
  if (!js) throw std::runtime_error("cannot read " + stem + ".json");
  nlohmann::json h = nlohmann::json::parse(js);
  GridField f(h.at("dim").get<int>(), h.at("N").get<int>());
  f.time = h.at("time").get<int>();
  f.seed = h.at("seed").get<std::uint64_t>();
  std::ifstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + stem + ".bin");
  bin.read(reinterpret_cast<char*>(f.values().data()),
           static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!bin) throw std::runtime_error("truncated field file " + stem + ".bin");
  return f;
}

void write_field_csv(const GridField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int a = 0; a < f.dim(); ++a) out << "x" << (a + 1) << ",";
  out << "value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < f.size(); ++i) {
    Vec x = f.point(i);
    for (int a = 0; a < f.dim(); ++a) out << x(a) << ",";
    out << f[i] << "\n";
  }
}

}  // namespace kickhj
