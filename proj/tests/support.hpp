#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dppn/dataset.hpp"
#include "dppn/model.hpp"
#include "dppn/tensor.hpp"

namespace testing {

inline dppn::Tensor random_tensor(dppn::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  dppn::Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// Entries in ±[lo, hi], so relu kinks stay out of finite-difference stencils.
inline dppn::Tensor away_from_zero(dppn::Shape shape, std::uint64_t seed, double lo = 0.1, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  dppn::Tensor t(std::move(shape));
  for (double& v : t.values()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

// Reference kernels written independently of the library.

inline dppn::Tensor naive_matmul(const dppn::Tensor& a, const dppn::Tensor& b) {
  dppn::Tensor out({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline dppn::Tensor naive_transpose(const dppn::Tensor& a) {
  dppn::Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline dppn::Tensor naive_softmax_cols(const dppn::Tensor& a) {
  dppn::Tensor out(a.shape());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) total += std::exp(a(i, j));
    for (std::size_t i = 0; i < a.rows(); ++i) out(i, j) = std::exp(a(i, j)) / total;
  }
  return out;
}

// W·x + b on every column.
inline dppn::Tensor naive_dense(const dppn::Tensor& w, const dppn::Tensor& b, const dppn::Tensor& x) {
  dppn::Tensor out = naive_matmul(w, x);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b(i, 0);
  return out;
}

inline dppn::Tensor naive_relu(dppn::Tensor t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
  return t;
}

inline double naive_cross_entropy(const std::vector<double>& logits, std::size_t target) {
  double total = 0.0;
  for (double z : logits) total += std::exp(z);
  return std::log(total) - logits[target];
}

inline double naive_sq_l2(const dppn::Tensor& a, const dppn::Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dppn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// A small synthetic split that trains in well under a second.
inline dppn::SyntheticConfig tiny_synthetic(std::uint64_t seed = 0) {
  dppn::SyntheticConfig c;
  c.channels = 8;
  c.regions = 4;
  c.attributes = 5;
  c.seen_categories = 3;
  c.unseen_categories = 2;
  c.samples_per_category = 8;
  c.density = 0.4;
  c.seed = seed;
  return c;
}

inline dppn::SyntheticConfig reference_synthetic() {
  dppn::SyntheticConfig c;
  c.channels = 32;
  c.regions = 16;
  c.attributes = 12;
  c.seen_categories = 8;
  c.unseen_categories = 4;
  c.samples_per_category = 40;
  c.density = 0.33;
  c.strength = 3.0;
  c.noise = 0.5;
  c.seed = 0;
  return c;
}

// Hand-built localization model for noiseless planted data. P^0 holds the
// signatures, f_rd projects onto them (D = N_a) and g puts strength * a_i on
// the diagonal entry of block i, so f^K(X) matches g(a_y) wherever S^K finds
// the planted regions.
inline dppn::DppnModel oracle_model(const dppn::SyntheticDataset& synth, double strength, int iterations) {
  const std::size_t c = synth.signatures.rows(), na = synth.signatures.cols();
  dppn::ModelConfig cfg;
  cfg.variant = dppn::Variant::pal;
  cfg.iterations = iterations;
  cfg.reduced_dim = na;
  dppn::DppnModel model(cfg, dppn::ModelShape::of(synth.data));
  auto set = [](dppn::Var v, const dppn::Tensor& t) { v.mutable_value() = t; };
  set(model.pal().prototypes, synth.signatures);
  dppn::Tensor reduce({na, c});
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < c; ++j) reduce(i, j) = synth.signatures(j, i);
  set(model.pal().reduce.weight, reduce);
  set(model.pal().reduce.bias, dppn::Tensor({na, 1}, 0.0));
  dppn::Tensor g({na * na, na}, 0.0);
  for (std::size_t i = 0; i < na; ++i) g(i * na + i, i) = strength;
  set(model.projector().layer.weight, g);
  set(model.projector().layer.bias, dppn::Tensor({na * na, 1}, 0.0));
  return model;
}

}  // namespace testing
