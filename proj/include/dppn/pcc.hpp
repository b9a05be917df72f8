#pragma once

#include <cstddef>
#include <vector>

#include "dppn/layers.hpp"

namespace dppn {

struct PccConfig {
  std::size_t representation_dim = 0;  // N_v
  std::size_t categories = 0;          // N_c, seen only
  int iterations = 1;                  // K
  bool gate = true;                    // f_cs on; off means C^{k+1} = C^k + W^k

  /// Hidden width of the channel gate: N_v/16, at least 4.
  std::size_t gate_hidden() const;
};

/// Category prototypes and their progressive update.
///
/// C^{k+1} = γ(C^k) ⊙ C^k + W^k, where γ is a squeeze-style channel gate
/// computed from the mean prototype. C^1 is the first set scored by a loss,
/// so K losses consume W^0..W^{K-1}.
struct PccParams {
  PccConfig config;
  Var prototypes;  // C^0 [N_v x N_c]
  DenseLayer gate_hidden;
  DenseLayer gate_out;
  std::vector<Var> biases;  // W^0..W^{K-1}, each [N_v x N_c]

  static PccParams init(const PccConfig& config, Rng& rng);
  std::vector<Var> parameters() const;
};

/// γ = sigmoid(dense(relu(dense(mean over categories of C)))), [N_v x 1].
Var channel_gate(const Var& prototypes, const PccParams& params);

/// C^{k+1} from C^k using W^k.
Var update_category_prototypes(const Var& prototypes, const PccParams& params, std::size_t k);

/// C^1..C^K. Image-independent, so one chain serves a whole batch.
std::vector<Var> category_prototype_chain(const PccParams& params);

/// Cross-entropy over the N_c logits f·c_j.
Var category_loss(const Var& representation, const Var& prototypes, std::size_t label);

/// One loss per iteration: loss k pairs f^k with C^k.
std::vector<Var> pcc_forward(const std::vector<Var>& representations, const PccParams& params, std::size_t label);

}  // namespace dppn
