#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dppn/dataset.hpp"
#include "dppn/keyvalue.hpp"
#include "dppn/pal.hpp"
#include "dppn/pcc.hpp"

namespace dppn {

/// Which objective and representation a model trains.
///
///   base_v2s  global pooling + linear map to attribute space, softmax over
///             fᵀa_j for seen j; predicts argmin ‖f − a_y‖².
///   pcc       the base_v2s representation and inference, trained with the
///             category loss over category prototypes instead of L_v2s.
///   pal       progressive attribute localization with the semantic
///             alignment loss only.
///   dppn      localization and category prototypes together.
enum class Variant { base_v2s, pcc, pal, dppn };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

struct ModelConfig {
  int iterations = 3;  // K
  double lambda = 1.0;
  std::size_t reduced_dim = 8;  // D
  double learning_rate = 2e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  Variant variant = Variant::dppn;
  Aggregation aggregation = Aggregation::concat;
  bool refine = true;  // f_ar
  bool gate = true;    // f_cs

  /// Keys: K, lambda, D, lr, batch, epochs, seed, variant, aggregation,
  /// f_ar, f_cs. Missing keys keep their defaults; unknown keys are errors.
  static ModelConfig from_keyvalue(const KeyValueFile& kv);
  static ModelConfig from_file(const std::filesystem::path& path);
  void apply(const KeyValueFile& kv);
  KeyValueFile to_keyvalue() const;
  void validate() const;

  bool uses_localization() const { return variant == Variant::pal || variant == Variant::dppn; }
  bool uses_category_prototypes() const { return variant == Variant::pcc || variant == Variant::dppn; }
};

struct ModelShape {
  std::size_t channels = 0;          // C
  std::size_t attributes = 0;        // N_a
  std::size_t seen_categories = 0;   // N_c

  static ModelShape of(const GzslDataset& data);
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Per-sample loss and its decomposition into per-iteration terms.
struct LossTerms {
  Var total;
  std::vector<double> alignment;  // L_sa^k (or L_v2s for the global variants)
  std::vector<double> category;   // L_cl^k, empty when unused
};

struct TrainingSample {
  const Tensor* features;   // [C x N]
  std::size_t seen_index;   // position of the label among seen categories
  const Tensor* attributes; // a_y [N_a x 1]
};

/// Parameter tensors keyed by canonical name, with the configuration that
/// produced them. Values are held at storage precision so a save/load
/// round trip reproduces them exactly.
struct Checkpoint {
  ModelConfig config;
  ModelShape shape;
  std::size_t epoch = 0;
  std::map<std::string, Tensor> tensors;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.shape == b.shape && a.epoch == b.epoch && a.tensors == b.tensors &&
           a.config.to_keyvalue().entries() == b.config.to_keyvalue().entries();
  }
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

class DppnModel {
 public:
  DppnModel(const ModelConfig& config, const ModelShape& shape);
  static DppnModel from_checkpoint(const Checkpoint& ckpt);

  const ModelConfig& config() const { return config_; }
  const ModelShape& shape() const { return shape_; }
  std::size_t representation_dim() const;

  const PalParams& pal() const { return pal_; }
  const PccParams& pcc() const { return pcc_; }
  const SemanticProjector& projector() const { return projector_; }
  const DenseLayer& global_projection() const { return global_; }

  std::vector<std::pair<std::string, Var>> named_parameters() const;
  std::vector<Var> parameters() const;

  /// Σ_k L_sa^k + λ Σ_k L_cl^k for one sample (base_v2s: L_v2s; pcc:
  /// Σ_k L_cl^k).
  LossTerms total_loss(const Tensor& features, std::size_t seen_index, const Tensor& attributes,
                       const Tensor& seen_attributes) const;

  /// Mean of total_loss over the batch, sharing one category prototype
  /// chain across samples.
  Var batch_loss(std::span<const TrainingSample> batch, const Tensor& seen_attributes) const;

  /// L_v2s for the global variants: cross-entropy over f(X)ᵀa_j.
  Var baseline_v2s_loss(const Var& representation, std::size_t seen_index, const Tensor& seen_attributes) const;

  /// Inference-time representation: f^K(X), or f(X) for the global variants.
  Var representation(const Tensor& features) const;

  /// Embedding each category is matched against: g(a), or a itself for the
  /// global variants. `table` is [M x N_a]; the result is [dim x M].
  Tensor class_embeddings(const Tensor& table) const;

  /// Row of `table` whose embedding is nearest (squared L2) to the
  /// representation of `features`; ties go to the lowest row.
  std::size_t predict(const Tensor& features, const Tensor& table) const;

  Checkpoint checkpoint(std::size_t epoch) const;

 private:
  std::vector<Var> representations(const Var& features) const;

  ModelConfig config_;
  ModelShape shape_;
  PalParams pal_;
  PccParams pcc_;
  SemanticProjector projector_;
  DenseLayer global_;
};

/// Index of the column of `embeddings` nearest to `representation`.
std::size_t nearest_column(const Tensor& representation, const Tensor& embeddings);

/// [|ids| x N_a] table of the given categories' attribute rows.
Tensor attribute_rows(const GzslDataset& data, std::span<const std::size_t> ids);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> validation_h;
};

struct TrainOptions {
  /// Evaluate H on the dataset's test split after each epoch (logging only).
  bool validate = false;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

/// Mini-batch Adam over the model's objective. Deterministic given the
/// config seed: fixed shuffle order and serial reductions.
TrainResult train(const GzslDataset& data, DppnModel& model, const TrainOptions& options = {});

}  // namespace dppn
