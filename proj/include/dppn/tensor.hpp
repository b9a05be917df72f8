#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dppn {

/// Raised when operand extents do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Every extent is positive.
///
/// The differentiable operations work on rank-2 tensors only; column vectors
/// are [d x 1] and scalars are [1 x 1]. Higher ranks exist for storage
/// (the tensor file format and stacked feature maps).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor column(std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Value of a single-element tensor.
  double item() const;

  /// Copy of column `c` of a rank-2 tensor as [rows x 1].
  Tensor col(std::size_t c) const;

  /// Slice `index` along the leading axis of a rank-3 tensor, as rank 2.
  Tensor slice(std::size_t index) const;

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
  std::size_t cols_ = 1;
};

/// Stacks equally shaped rank-2 tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace dppn
