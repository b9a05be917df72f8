#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dppn/dataset.hpp"
#include "dppn/keyvalue.hpp"

namespace dppn {

class DppnModel;
struct ModelConfig;

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean over `classes` of per-class top-1 accuracy, in percent.
double mca(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
           std::span<const std::size_t> classes);

/// H = 2·u·s / (u + s), 0 when both are 0.
double harmonic_mean(double mca_unseen, double mca_seen);

struct GzslReport {
  double mca_u = 0.0;
  double mca_s = 0.0;
  double h = 0.0;
  std::map<std::size_t, double> per_class;  // category id -> accuracy, percent
  std::size_t seen_as_unseen = 0;           // seen-domain samples predicted as an unseen category
  std::size_t unseen_as_seen = 0;
  std::size_t seen_samples = 0;
  std::size_t unseen_samples = 0;
};

/// Predicts every test sample over Y_s ∪ Y_u and scores each domain.
GzslReport evaluate_gzsl(const DppnModel& model, const GzslDataset& data);

/// Writes `metric,value` rows followed by per-class accuracies.
void write_report_csv(const GzslReport& report, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Ablation

/// One row of an ablation grid: a name and the config keys it overrides.
struct VariantSpec {
  std::string name;
  KeyValueFile delta;
};

/// Grid file format, one directive per line ('#' starts a comment):
///
///   base key=value ...            overrides applied to every variant
///   variant <name> key=value ...  one grid row
///
/// Names must not contain whitespace.
struct GridSpec {
  KeyValueFile base;
  std::vector<VariantSpec> variants;

  static GridSpec parse(const std::string& text, const std::string& origin = "<grid>");
  static GridSpec read(const std::filesystem::path& path);

  /// Base config plus this variant's delta.
  ModelConfig config_for(const VariantSpec& v, std::uint64_t seed) const;
};

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<GzslReport> report;  // empty when training failed
  std::string error;
};

struct AblationSummary {
  std::string variant;
  double median_h = 0.0;
  double median_mca_u = 0.0;
  double median_mca_s = 0.0;
  std::size_t failed = 0;
};

struct AblationGrid {
  std::vector<AblationRun> runs;
  std::vector<AblationSummary> summary;

  const AblationSummary& find(const std::string& variant) const;
};

double median(std::vector<double> values);

/// Trains every variant for seeds 0..seeds-1 and evaluates it. A variant
/// whose training throws is recorded as failed and the grid continues.
AblationGrid run_ablation(const GridSpec& grid, const GzslDataset& data, std::size_t seeds);

/// CSV with header `variant,seed,MCA_u,MCA_s,H`; failed runs carry `failed`.
void write_ablation_csv(const AblationGrid& grid, std::ostream& out);
void write_ablation_summary(const AblationGrid& grid, std::ostream& out);

// ---------------------------------------------------------------------------
// Localization export

/// Grid layout for N regions: the most square W x H with W·H = N, W >= H.
std::pair<std::size_t, std::size_t> region_grid(std::size_t regions);

/// Binary PGM (P5, maxval 255) of one similarity column laid out on the
/// region grid, scaled linearly from the column min (0) to max (255).
/// A constant column maps to an all-zero image.
std::string similarity_pgm(const Tensor& similarity, std::size_t attribute);

/// For each test sample id and each k = 1..K, writes
///   sample<id>_k<k>.csv               S^k, N rows x N_a columns
///   sample<id>_k<k>_attr<i>.pgm       one heat map per attribute
/// Returns the written paths.
std::vector<std::filesystem::path> export_localization(const DppnModel& model, const GzslDataset& data,
                                                       std::span<const std::size_t> sample_ids,
                                                       const std::filesystem::path& out_dir);

/// S^1..S^K of the model's localization path for one feature map.
std::vector<Tensor> similarity_maps(const DppnModel& model, const Tensor& features);

/// Mean over samples and active attributes of the mass S^k puts on the
/// planted region, for every k. Needs a planted map.
std::vector<double> planted_mass(const DppnModel& model, std::span<const Tensor> features,
                                 const std::vector<std::vector<int>>& planted);

/// Fraction of active attributes whose argmax region in S^K is the planted one.
double planted_argmax_hit_rate(const DppnModel& model, std::span<const Tensor> features,
                               const std::vector<std::vector<int>>& planted);

}  // namespace dppn
