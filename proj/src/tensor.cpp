#include "instrans/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "instrans/errors.hpp"

namespace instrans {

namespace {
int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

Tensor Tensor::scalar(double v) {
  Tensor t{Shape{}};
  t.data_.assign(1, v);
  return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = rng.normal() * stddev;
  return t;
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::from_vector(const std::vector<double>& v) {
  Tensor t{Shape{static_cast<int>(v.size())}};
  std::copy(v.begin(), v.end(), t.data_.begin());
  return t;
}

double& Tensor::at(int c, int y, int x) {
  return data_[static_cast<size_t>((static_cast<int64_t>(c) * shape_[1] + y) * shape_[2] + x)];
}

double Tensor::at(int c, int y, int x) const {
  return data_[static_cast<size_t>((static_cast<int64_t>(c) * shape_[1] + y) * shape_[2] + x)];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel())
    throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes element count");
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

double Tensor::sum() const {
  double acc = 0.0;
  for (double v : data_) acc += v;
  return acc;
}

double Tensor::mean() const { return empty() ? 0.0 : sum() / static_cast<double>(numel()); }

double Tensor::min() const {
  double m = data_.empty() ? 0.0 : data_[0];
  for (double v : data_) m = std::min(m, v);
  return m;
}

double Tensor::max() const {
  double m = data_.empty() ? 0.0 : data_[0];
  for (double v : data_) m = std::max(m, v);
  return m;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int p, bool accumulate) {
  Map cm(c, m, p);
  if (accumulate)
    cm.noalias() += CMap(a, m, k) * CMap(b, k, p);
  else
    cm.noalias() = CMap(a, m, k) * CMap(b, k, p);
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int p, bool accumulate) {
  Map cm(c, m, p);
  if (accumulate)
    cm.noalias() += CMap(a, k, m).transpose() * CMap(b, k, p);
  else
    cm.noalias() = CMap(a, k, m).transpose() * CMap(b, k, p);
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int p, bool accumulate) {
  Map cm(c, m, p);
  if (accumulate)
    cm.noalias() += CMap(a, m, k) * CMap(b, p, k).transpose();
  else
    cm.noalias() = CMap(a, m, k) * CMap(b, p, k).transpose();
}

}  // namespace instrans
