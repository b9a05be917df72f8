#include "dppn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace dppn {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extent must be positive, got " + shape_string(shape));
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill), cols_(shape_.back()) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)), cols_(shape_.empty() ? 1 : shape_.back()) {
  if (values_.size() != element_count(shape_)) {
    throw DimensionError("value count " + std::to_string(values_.size()) + " does not match shape " +
                         shape_string(shape_));
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n, 1}, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, value); }

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() needs a rank-2 tensor, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() needs a rank-2 tensor, got " + shape_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() needs a single-element tensor, got " + shape_string(shape_));
  return values_[0];
}

Tensor Tensor::col(std::size_t c) const {
  const std::size_t m = rows();
  if (c >= cols()) throw DimensionError("column index out of range for " + shape_string(shape_));
  Tensor out({m, 1});
  for (std::size_t r = 0; r < m; ++r) out[r] = (*this)(r, c);
  return out;
}

Tensor Tensor::slice(std::size_t index) const {
  if (rank() != 3) throw DimensionError("slice() needs a rank-3 tensor, got " + shape_string(shape_));
  if (index >= shape_[0]) throw DimensionError("slice index out of range for " + shape_string(shape_));
  const std::size_t stride = shape_[1] * shape_[2];
  std::vector<double> part(values_.begin() + static_cast<std::ptrdiff_t>(index * stride),
                           values_.begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
  return Tensor({shape_[1], shape_[2]}, std::move(part));
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("stack of an empty list");
  const Shape& inner = parts.front().shape();
  if (inner.size() != 2) throw DimensionError("stack needs rank-2 parts, got " + shape_string(inner));
  std::vector<double> values;
  values.reserve(parts.size() * parts.front().size());
  for (const Tensor& p : parts) {
    if (p.shape() != inner) {
      throw DimensionError("stack of ragged parts " + shape_string(inner) + " and " + shape_string(p.shape()));
    }
    values.insert(values.end(), p.values().begin(), p.values().end());
  }
  return Tensor({parts.size(), inner[0], inner[1]}, std::move(values));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff of " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace dppn
