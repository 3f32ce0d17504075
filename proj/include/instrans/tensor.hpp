#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "instrans/rng.hpp"

namespace instrans {

using Shape = std::vector<int>;

// Dense row-major double tensor, rank 0..4. Rank 3 is CHW image layout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, double fill);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);
  static Tensor from_vector(const std::vector<double>& v);

  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // CHW accessors (rank 3)
  double& at(int c, int y, int x);
  double at(int c, int y, int x) const;

  void fill(double v);
  Tensor reshaped(Shape shape) const;  // copies; numel must match
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double sum() const;
  double mean() const;
  double min() const;
  double max() const;
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::string shape_str(const Shape& s);

// C (MxP) = A (MxK) @ B (KxP), all row-major contiguous. accumulate adds into C.
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int p, bool accumulate);
// C (MxP) = A^T @ B with A stored (KxM)
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int p, bool accumulate);
// C (MxP) = A @ B^T with B stored (PxK)
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int p, bool accumulate);

}  // namespace instrans
