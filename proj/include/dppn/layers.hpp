#pragma once

#include <cstddef>
#include <random>

#include "dppn/autodiff.hpp"

namespace dppn {

using Rng = std::mt19937_64;

/// Tensor of i.i.d. N(0, stddev²) entries.
Tensor gaussian(const Shape& shape, double stddev, Rng& rng);

/// y = W·x + b, applied to every column of x.
struct DenseLayer {
  Var weight;  // [out x in]
  Var bias;    // [out x 1]

  /// Weights ~ N(0, gain/in), bias zero.
  static DenseLayer init(std::size_t in, std::size_t out, double gain, Rng& rng);
  /// All-zero weights and bias.
  static DenseLayer zeros(std::size_t in, std::size_t out);

  Var operator()(const Var& x) const;
  std::size_t in_features() const { return weight.cols(); }
  std::size_t out_features() const { return weight.rows(); }
};

}  // namespace dppn
