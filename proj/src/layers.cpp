#include "dppn/layers.hpp"

#include <cmath>

#include "dppn/ops.hpp"

namespace dppn {

Tensor gaussian(const Shape& shape, double stddev, Rng& rng) {
  Tensor t(shape);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, double gain, Rng& rng) {
  return {Var::parameter(gaussian({out, in}, std::sqrt(gain / static_cast<double>(in)), rng)),
          Var::parameter(Tensor({out, 1}, 0.0))};
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out) {
  return {Var::parameter(Tensor({out, in}, 0.0)), Var::parameter(Tensor({out, 1}, 0.0))};
}

Var DenseLayer::operator()(const Var& x) const { return add_cols(matmul(weight, x), bias); }

}  // namespace dppn
