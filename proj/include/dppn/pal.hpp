#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "dppn/layers.hpp"

namespace dppn {

/// How per-attribute reduced prototypes become one representation.
/// `concat` keeps one D-block per attribute (N_v = D·N_a); `sum` and `max`
/// pool across attributes (N_v = D).
enum class Aggregation { concat, sum, max };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view text);

struct PalConfig {
  std::size_t channels = 0;      // C
  std::size_t attributes = 0;    // N_a
  std::size_t reduced_dim = 0;   // D
  bool refine = true;            // f_ar on; off means P^{k+1} = X·S
  Aggregation aggregation = Aggregation::concat;

  std::size_t representation_dim() const;
};

/// Trainable state of progressive attribute localization.
///
/// `prototypes` is P^0 [C x N_a], shared by every image. The refinement
/// f_ar (two C->C layers, relu between) and the reduction f_rd (C->D) are
/// shared across attributes and applied column by column.
struct PalParams {
  PalConfig config;
  Var prototypes;
  DenseLayer refine_hidden;
  DenseLayer refine_out;
  DenseLayer reduce;

  static PalParams init(const PalConfig& config, Rng& rng);
  std::vector<Var> parameters() const;
};

/// g(·): attribute vector [N_a x 1] -> embedding [N_v x 1].
struct SemanticProjector {
  DenseLayer layer;

  static SemanticProjector init(std::size_t attributes, std::size_t representation_dim, Rng& rng);
  Var operator()(const Var& attributes) const;
  std::vector<Var> parameters() const;
};

/// S = softmax_cols(Xᵀ P): [N x N_a], column i distributes attribute i's
/// mass over the N regions.
Var localize(const Var& features, const Var& prototypes);

/// f_ar applied to X·S, one prototype per column.
Var refine(const Var& features, const Var& similarity, const PalParams& params);

/// P^{k+1} = f_ar(X · softmax_cols(Xᵀ P^k)).
Var update_prototypes(const Var& features, const Var& prototypes, const PalParams& params);

/// f^k(X) = cat(f_rd(P^k)) in attribute order (or the pooled variant).
Var assemble(const Var& prototypes, const PalParams& params);

/// d(f, g(a)) with d the squared L2 distance.
Var semantic_align_loss(const Var& representation, const Var& attributes, const SemanticProjector& projector);

struct PalStep {
  Var similarity;      // S^k, computed from P^{k-1}
  Var prototypes;      // P^k
  Var representation;  // f^k(X)
};

/// K rounds of localize -> refine starting from the shared P^0.
std::vector<PalStep> pal_forward(const Var& features, const PalParams& params, int iterations);

}  // namespace dppn
