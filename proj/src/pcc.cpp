#include "dppn/pcc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dppn/ops.hpp"

namespace dppn {

std::size_t PccConfig::gate_hidden() const { return std::max<std::size_t>(4, representation_dim / 16); }

PccParams PccParams::init(const PccConfig& config, Rng& rng) {
  if (config.representation_dim == 0 || config.categories == 0) throw DimensionError("PCC needs positive N_v and N_c");
  if (config.iterations < 1) throw std::invalid_argument("PCC needs K >= 1");
  const std::size_t nv = config.representation_dim;
  PccParams p;
  p.config = config;
  p.prototypes = Var::parameter(gaussian({nv, config.categories}, 1.0 / std::sqrt(static_cast<double>(nv)), rng));
  p.gate_hidden = DenseLayer::init(nv, config.gate_hidden(), 2.0, rng);
  p.gate_out = DenseLayer::init(config.gate_hidden(), nv, 1.0, rng);
  for (int k = 0; k < config.iterations; ++k) p.biases.push_back(Var::parameter(Tensor({nv, config.categories}, 0.0)));
  return p;
}

std::vector<Var> PccParams::parameters() const {
  std::vector<Var> out{prototypes};
  if (config.gate) out.insert(out.end(), {gate_hidden.weight, gate_hidden.bias, gate_out.weight, gate_out.bias});
  out.insert(out.end(), biases.begin(), biases.end());
  return out;
}

Var channel_gate(const Var& prototypes, const PccParams& params) {
  return sigmoid(params.gate_out(relu(params.gate_hidden(mean_cols(prototypes)))));
}

Var update_category_prototypes(const Var& prototypes, const PccParams& params, std::size_t k) {
  if (k >= params.biases.size()) {
    throw std::out_of_range("update_category_prototypes: step " + std::to_string(k) + " out of range for K=" +
                            std::to_string(params.biases.size()));
  }
  Var carried = params.config.gate ? mul_cols(prototypes, channel_gate(prototypes, params)) : prototypes;
  return add(carried, params.biases[k]);
}

std::vector<Var> category_prototype_chain(const PccParams& params) {
  std::vector<Var> chain;
  chain.reserve(params.biases.size());
  Var current = params.prototypes;
  for (std::size_t k = 0; k < params.biases.size(); ++k) {
    current = update_category_prototypes(current, params, k);
    chain.push_back(current);
  }
  return chain;
}

Var category_loss(const Var& representation, const Var& prototypes, std::size_t label) {
  if (representation.rows() != prototypes.rows()) {
    throw DimensionError("category_loss: representation extent " + std::to_string(representation.rows()) +
                         " vs prototype extent " + std::to_string(prototypes.rows()));
  }
  if (label >= prototypes.cols()) {
    throw std::out_of_range("category_loss: label " + std::to_string(label) + " out of range for " +
                            std::to_string(prototypes.cols()) + " seen categories");
  }
  return cross_entropy_logits(matmul(transpose(prototypes), representation), label);
}

std::vector<Var> pcc_forward(const std::vector<Var>& representations, const PccParams& params, std::size_t label) {
  if (representations.size() != params.biases.size()) {
    throw DimensionError("pcc_forward: got " + std::to_string(representations.size()) + " representations for K=" +
                         std::to_string(params.biases.size()));
  }
  const std::vector<Var> chain = category_prototype_chain(params);
  std::vector<Var> losses;
  losses.reserve(chain.size());
  for (std::size_t k = 0; k < chain.size(); ++k) losses.push_back(category_loss(representations[k], chain[k], label));
  return losses;
}

}  // namespace dppn
