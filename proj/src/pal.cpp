#include "dppn/pal.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dppn/ops.hpp"

namespace dppn {

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::concat: return "cat";
    case Aggregation::sum: return "sum";
    case Aggregation::max: return "max";
  }
  return "cat";
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "cat" || text == "concat") return Aggregation::concat;
  if (text == "sum") return Aggregation::sum;
  if (text == "max") return Aggregation::max;
  throw std::invalid_argument("unknown aggregation '" + std::string(text) + "' (expected cat, sum or max)");
}

std::size_t PalConfig::representation_dim() const {
  return aggregation == Aggregation::concat ? reduced_dim * attributes : reduced_dim;
}

namespace {

// f_ar starts as the identity on inputs above -kRefineOffset: the hidden bias
// lifts pooled features into the linear part of relu and the output bias
// removes the lift again.
constexpr double kRefineOffset = 4.0;

DenseLayer identity_layer(std::size_t n, double bias) {
  DenseLayer layer{Var::parameter(Tensor::identity(n)), Var::parameter(Tensor({n, 1}, bias))};
  return layer;
}

}  // namespace

PalParams PalParams::init(const PalConfig& config, Rng& rng) {
  if (config.channels == 0 || config.attributes == 0 || config.reduced_dim == 0) {
    throw DimensionError("PAL needs positive C, N_a and D");
  }
  const std::size_t c = config.channels;
  PalParams p;
  p.config = config;
  p.prototypes = Var::parameter(gaussian({c, config.attributes}, 1.0 / std::sqrt(static_cast<double>(c)), rng));
  p.refine_hidden = identity_layer(c, kRefineOffset);
  p.refine_out = identity_layer(c, -kRefineOffset);
  p.reduce = DenseLayer::init(c, config.reduced_dim, 1.0, rng);
  return p;
}

std::vector<Var> PalParams::parameters() const {
  std::vector<Var> out{prototypes};
  if (config.refine) {
    out.insert(out.end(), {refine_hidden.weight, refine_hidden.bias, refine_out.weight, refine_out.bias});
  }
  out.insert(out.end(), {reduce.weight, reduce.bias});
  return out;
}

SemanticProjector SemanticProjector::init(std::size_t attributes, std::size_t representation_dim, Rng&) {
  // Directions outside the span of the seen attribute vectors never receive a
  // gradient, so they stay at zero instead of at a random draw.
  return {DenseLayer::zeros(attributes, representation_dim)};
}

Var SemanticProjector::operator()(const Var& attributes) const {
  if (attributes.rows() != layer.in_features()) {
    throw DimensionError("semantic projection expects " + std::to_string(layer.in_features()) +
                         " attributes, got " + std::to_string(attributes.rows()));
  }
  return layer(attributes);
}

std::vector<Var> SemanticProjector::parameters() const { return {layer.weight, layer.bias}; }

Var localize(const Var& features, const Var& prototypes) {
  if (features.rows() != prototypes.rows()) {
    throw DimensionError("localize: feature channels " + std::to_string(features.rows()) +
                         " vs prototype channels " + std::to_string(prototypes.rows()));
  }
  return softmax_cols(matmul(transpose(features), prototypes));
}

Var refine(const Var& features, const Var& similarity, const PalParams& params) {
  Var pooled = matmul(features, similarity);
  if (!params.config.refine) return pooled;
  return params.refine_out(relu(params.refine_hidden(pooled)));
}

Var update_prototypes(const Var& features, const Var& prototypes, const PalParams& params) {
  return refine(features, localize(features, prototypes), params);
}

Var assemble(const Var& prototypes, const PalParams& params) {
  Var reduced = params.reduce(prototypes);
  switch (params.config.aggregation) {
    case Aggregation::sum: return sum_cols(reduced);
    case Aggregation::max: return max_cols(reduced);
    case Aggregation::concat: break;
  }
  std::vector<Var> blocks;
  blocks.reserve(reduced.cols());
  for (std::size_t i = 0; i < reduced.cols(); ++i) blocks.push_back(column(reduced, i));
  return concat_cols(blocks);
}

Var semantic_align_loss(const Var& representation, const Var& attributes, const SemanticProjector& projector) {
  return sq_l2(representation, projector(attributes));
}

std::vector<PalStep> pal_forward(const Var& features, const PalParams& params, int iterations) {
  if (iterations < 1) throw std::invalid_argument("pal_forward: K must be >= 1, got " + std::to_string(iterations));
  if (features.rows() != params.config.channels) {
    throw DimensionError("pal_forward: feature map has " + std::to_string(features.rows()) +
                         " channels, model expects " + std::to_string(params.config.channels));
  }
  std::vector<PalStep> steps;
  steps.reserve(static_cast<std::size_t>(iterations));
  Var current = params.prototypes;
  for (int k = 1; k <= iterations; ++k) {
    Var s = localize(features, current);
    current = refine(features, s, params);
    steps.push_back({s, current, assemble(current, params)});
  }
  return steps;
}

}  // namespace dppn
