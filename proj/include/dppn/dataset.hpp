#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "dppn/tensor.hpp"

namespace dppn {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Domain : std::uint8_t { seen = 0, unseen = 1 };

/// Marker in planted maps for an attribute that is not present in a sample.
inline constexpr int kNotPlanted = -1;

/// A GZSL split: seen-only training data, a test set drawn from both
/// domains, and one attribute row per category.
///
/// Category ids index the rows of `attributes`. `planted_*` are present only
/// for synthetic data and map each attribute to the region where its
/// signature was injected (or kNotPlanted).
struct GzslDataset {
  std::vector<Tensor> train_features;  // each [C x N]
  std::vector<std::size_t> train_labels;
  std::vector<Tensor> test_features;
  std::vector<std::size_t> test_labels;
  std::vector<Domain> test_domains;
  Tensor attributes;  // [categories x N_a]
  std::vector<std::size_t> seen_ids;
  std::vector<std::size_t> unseen_ids;
  std::vector<std::vector<int>> train_planted;
  std::vector<std::vector<int>> test_planted;

  std::size_t channels() const;
  std::size_t regions() const;
  std::size_t attribute_count() const { return attributes.cols(); }
  std::size_t category_count() const { return attributes.rows(); }
  bool has_planted_map() const { return !test_planted.empty(); }

  /// a_y as [N_a x 1].
  Tensor attribute_vector(std::size_t category) const;

  /// Position of `category` in seen_ids; throws if it is not seen.
  std::size_t seen_index(std::size_t category) const;

  /// Throws DatasetError naming the first violated invariant.
  void validate() const;
};

struct SyntheticConfig {
  std::size_t channels = 32;        // C
  std::size_t regions = 16;         // N
  std::size_t attributes = 12;      // N_a
  std::size_t seen_categories = 8;
  std::size_t unseen_categories = 4;
  std::size_t samples_per_category = 40;
  double density = 0.33;            // fraction of attributes active per category
  double strength = 3.0;
  double noise = 0.5;
  double train_fraction = 0.75;     // of each seen category's samples
  std::uint64_t seed = 0;

  /// Number of active attributes per category, round(density · N_a).
  std::size_t active_attributes() const;

  static SyntheticConfig from_file(const std::filesystem::path& path);
};

struct SyntheticDataset {
  GzslDataset data;
  Tensor signatures;  // [C x N_a], column i is the unit signature w_i
};

SyntheticDataset generate_synthetic(const SyntheticConfig& config);

/// Writes one tensor file per field plus `manifest.cfg` into `dir`.
/// Returns the manifest path.
std::filesystem::path write_dataset(const GzslDataset& data, const std::filesystem::path& dir);

/// Reads and validates a dataset from its manifest. Tensor paths are
/// relative to the manifest's directory.
GzslDataset load_dataset(const std::filesystem::path& manifest);

}  // namespace dppn
