#include "dppn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "dppn/model.hpp"
#include "dppn/ops.hpp"

namespace dppn {

double mca(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
           std::span<const std::size_t> classes) {
  if (predictions.size() != labels.size()) {
    throw EvaluationError("mca: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  }
  if (classes.empty()) throw EvaluationError("mca: empty class set");
  double total = 0.0;
  for (std::size_t c : classes) {
    std::size_t count = 0, correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      ++count;
      if (predictions[i] == c) ++correct;
    }
    if (count == 0) throw EvaluationError("mca: class " + std::to_string(c) + " has no samples");
    total += 100.0 * static_cast<double>(correct) / static_cast<double>(count);
  }
  return total / static_cast<double>(classes.size());
}

double harmonic_mean(double mca_unseen, double mca_seen) {
  const double denom = mca_unseen + mca_seen;
  if (denom <= 0.0) return 0.0;
  return 2.0 * mca_unseen * mca_seen / denom;
}

GzslReport evaluate_gzsl(const DppnModel& model, const GzslDataset& data) {
  if (data.test_features.empty()) throw EvaluationError("empty test split");
  if (ModelShape::of(data).channels != model.shape().channels ||
      data.attribute_count() != model.shape().attributes) {
    throw EvaluationError("model (C=" + std::to_string(model.shape().channels) + ", N_a=" +
                          std::to_string(model.shape().attributes) + ") does not match dataset (C=" +
                          std::to_string(data.channels()) + ", N_a=" + std::to_string(data.attribute_count()) + ")");
  }
  std::vector<std::size_t> candidates = data.seen_ids;
  candidates.insert(candidates.end(), data.unseen_ids.begin(), data.unseen_ids.end());
  const Tensor embeddings = model.class_embeddings(attribute_rows(data, candidates));
  const std::set<std::size_t> unseen(data.unseen_ids.begin(), data.unseen_ids.end());

  std::vector<std::size_t> seen_pred, seen_label, unseen_pred, unseen_label;
  GzslReport report;
  for (std::size_t i = 0; i < data.test_features.size(); ++i) {
    const std::size_t predicted =
        candidates[nearest_column(model.representation(data.test_features[i]).value(), embeddings)];
    const std::size_t y = data.test_labels[i];
    if (data.test_domains[i] == Domain::seen) {
      seen_pred.push_back(predicted);
      seen_label.push_back(y);
      if (unseen.count(predicted)) ++report.seen_as_unseen;
    } else {
      unseen_pred.push_back(predicted);
      unseen_label.push_back(y);
      if (!unseen.count(predicted)) ++report.unseen_as_seen;
    }
  }
  if (unseen_label.empty()) throw EvaluationError("no unseen-domain test samples; GZSL H is undefined");
  if (seen_label.empty()) throw EvaluationError("no seen-domain test samples; GZSL H is undefined");

  auto classes_present = [](const std::vector<std::size_t>& labels) {
    std::set<std::size_t> s(labels.begin(), labels.end());
    return std::vector<std::size_t>(s.begin(), s.end());
  };
  const auto seen_classes = classes_present(seen_label);
  const auto unseen_classes = classes_present(unseen_label);
  report.mca_s = mca(seen_pred, seen_label, seen_classes);
  report.mca_u = mca(unseen_pred, unseen_label, unseen_classes);
  report.h = harmonic_mean(report.mca_u, report.mca_s);
  report.seen_samples = seen_label.size();
  report.unseen_samples = unseen_label.size();
  for (std::size_t c : seen_classes) report.per_class[c] = mca(seen_pred, seen_label, std::span(&c, 1));
  for (std::size_t c : unseen_classes) report.per_class[c] = mca(unseen_pred, unseen_label, std::span(&c, 1));
  return report;
}

void write_report_csv(const GzslReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "metric,value\n";
  out << "MCA_u," << format_double(report.mca_u) << "\n";
  out << "MCA_s," << format_double(report.mca_s) << "\n";
  out << "H," << format_double(report.h) << "\n";
  out << "seen_as_unseen," << report.seen_as_unseen << "\n";
  out << "unseen_as_seen," << report.unseen_as_seen << "\n";
  for (const auto& [c, acc] : report.per_class) out << "class_" << c << "," << format_double(acc) << "\n";
}

// ---------------------------------------------------------------------------
// Ablation

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

KeyValueFile pairs_to_kv(const std::vector<std::string>& tokens, std::size_t from, const std::string& origin) {
  std::string text;
  for (std::size_t i = from; i < tokens.size(); ++i) text += tokens[i] + "\n";
  return KeyValueFile::parse(text, origin);
}

}  // namespace

GridSpec GridSpec::parse(const std::string& text, const std::string& origin) {
  GridSpec grid;
  std::istringstream in(text);
  std::size_t line_no = 0;
  bool have_base = false;
  std::set<std::string> names;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (tokens[0] == "base") {
      if (have_base) throw ConfigError(where + ": duplicate base line");
      grid.base = pairs_to_kv(tokens, 1, where);
      have_base = true;
    } else if (tokens[0] == "variant") {
      if (tokens.size() < 2) throw ConfigError(where + ": variant needs a name");
      if (!names.insert(tokens[1]).second) throw ConfigError(where + ": duplicate variant '" + tokens[1] + "'");
      grid.variants.push_back({tokens[1], pairs_to_kv(tokens, 2, where)});
    } else {
      throw ConfigError(where + ": expected 'base' or 'variant', got '" + tokens[0] + "'");
    }
  }
  if (grid.variants.empty()) throw ConfigError(origin + ": grid has no variants");
  // Surface bad keys before any training starts.
  for (const auto& v : grid.variants) (void)grid.config_for(v, 0);
  return grid;
}

GridSpec GridSpec::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

ModelConfig GridSpec::config_for(const VariantSpec& v, std::uint64_t seed) const {
  ModelConfig c;
  c.apply(base);
  c.apply(v.delta);
  c.seed += seed;
  return c;
}

const AblationSummary& AblationGrid::find(const std::string& variant) const {
  for (const auto& s : summary)
    if (s.variant == variant) return s;
  throw std::out_of_range("no ablation variant '" + variant + "'");
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AblationGrid run_ablation(const GridSpec& grid, const GzslDataset& data, std::size_t seeds) {
  if (seeds == 0) throw std::invalid_argument("run_ablation needs at least one seed");
  AblationGrid out;
  for (const VariantSpec& v : grid.variants) {
    std::vector<double> hs, us, ss;
    AblationSummary summary{v.name, 0.0, 0.0, 0.0, 0};
    for (std::size_t s = 0; s < seeds; ++s) {
      AblationRun run{v.name, s, std::nullopt, ""};
      try {
        DppnModel model(grid.config_for(v, s), ModelShape::of(data));
        train(data, model);
        run.report = evaluate_gzsl(model, data);
        hs.push_back(run.report->h);
        us.push_back(run.report->mca_u);
        ss.push_back(run.report->mca_s);
      } catch (const std::exception& e) {
        run.error = e.what();
        ++summary.failed;
      }
      out.runs.push_back(std::move(run));
    }
    if (!hs.empty()) {
      summary.median_h = median(hs);
      summary.median_mca_u = median(us);
      summary.median_mca_s = median(ss);
    }
    out.summary.push_back(summary);
  }
  return out;
}

void write_ablation_csv(const AblationGrid& grid, std::ostream& out) {
  out << "variant,seed,MCA_u,MCA_s,H\n";
  for (const AblationRun& r : grid.runs) {
    out << r.variant << "," << r.seed << ",";
    if (r.report) {
      out << format_double(r.report->mca_u) << "," << format_double(r.report->mca_s) << ","
          << format_double(r.report->h) << "\n";
    } else {
      out << "failed,failed,failed\n";
    }
  }
}

void write_ablation_summary(const AblationGrid& grid, std::ostream& out) {
  std::size_t width = 8;
  for (const auto& s : grid.summary) width = std::max(width, s.variant.size() + 2);
  out << std::left << std::setw(static_cast<int>(width)) << "variant" << std::right << std::setw(9) << "MCA_u"
      << std::setw(9) << "MCA_s" << std::setw(9) << "H" << "\n";
  out << std::fixed << std::setprecision(1);
  for (const auto& s : grid.summary) {
    out << std::left << std::setw(static_cast<int>(width)) << s.variant << std::right << std::setw(9)
        << s.median_mca_u << std::setw(9) << s.median_mca_s << std::setw(9) << s.median_h;
    if (s.failed > 0) out << "  (" << s.failed << " failed)";
    out << "\n";
  }
  out << std::defaultfloat;
}

// ---------------------------------------------------------------------------
// Localization export

std::pair<std::size_t, std::size_t> region_grid(std::size_t regions) {
  std::size_t height = static_cast<std::size_t>(std::sqrt(static_cast<double>(regions)));
  while (height > 1 && regions % height != 0) --height;
  if (height == 0) height = 1;
  return {regions / height, height};
}

std::string similarity_pgm(const Tensor& similarity, std::size_t attribute) {
  const std::size_t n = similarity.rows();
  const auto [width, height] = region_grid(n);
  double lo = similarity(0, attribute), hi = lo;
  for (std::size_t r = 0; r < n; ++r) {
    lo = std::min(lo, similarity(r, attribute));
    hi = std::max(hi, similarity(r, attribute));
  }
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (std::size_t r = 0; r < n; ++r) {
    const double v = hi > lo ? (similarity(r, attribute) - lo) / (hi - lo) : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
  }
  return out;
}

std::vector<Tensor> similarity_maps(const DppnModel& model, const Tensor& features) {
  if (!model.config().uses_localization()) {
    throw EvaluationError("variant '" + std::string(to_string(model.config().variant)) + "' has no localization maps");
  }
  std::vector<Tensor> maps;
  for (const PalStep& step : pal_forward(Var::constant(features), model.pal(), model.config().iterations)) {
    maps.push_back(step.similarity.value());
  }
  return maps;
}

std::vector<std::filesystem::path> export_localization(const DppnModel& model, const GzslDataset& data,
                                                       std::span<const std::size_t> sample_ids,
                                                       const std::filesystem::path& out_dir) {
  for (std::size_t id : sample_ids) {
    if (id >= data.test_features.size()) {
      throw EvaluationError("sample id " + std::to_string(id) + " out of range for " +
                            std::to_string(data.test_features.size()) + " test samples");
    }
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t id : sample_ids) {
    const auto maps = similarity_maps(model, data.test_features[id]);
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const Tensor& s = maps[k];
      const std::string stem = "sample" + std::to_string(id) + "_k" + std::to_string(k + 1);
      const auto csv_path = out_dir / (stem + ".csv");
      std::ofstream csv(csv_path, std::ios::trunc);
      if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
      for (std::size_t r = 0; r < s.rows(); ++r) {
        for (std::size_t c = 0; c < s.cols(); ++c) {
          if (c > 0) csv << ",";
          csv << format_double(static_cast<double>(static_cast<float>(s(r, c))));
        }
        csv << "\n";
      }
      written.push_back(csv_path);
      for (std::size_t a = 0; a < s.cols(); ++a) {
        const auto pgm_path = out_dir / (stem + "_attr" + std::to_string(a) + ".pgm");
        std::ofstream pgm(pgm_path, std::ios::binary | std::ios::trunc);
        if (!pgm) throw std::runtime_error("cannot open " + pgm_path.string());
        pgm << similarity_pgm(s, a);
        written.push_back(pgm_path);
      }
    }
  }
  return written;
}

std::vector<double> planted_mass(const DppnModel& model, std::span<const Tensor> features,
                                 const std::vector<std::vector<int>>& planted) {
  if (planted.size() != features.size()) throw EvaluationError("planted map does not cover every sample");
  std::vector<double> mass(static_cast<std::size_t>(model.config().iterations), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto maps = similarity_maps(model, features[i]);
    for (std::size_t a = 0; a < planted[i].size(); ++a) {
      if (planted[i][a] == kNotPlanted) continue;
      ++count;
      for (std::size_t k = 0; k < maps.size(); ++k) mass[k] += maps[k](static_cast<std::size_t>(planted[i][a]), a);
    }
  }
  if (count == 0) throw EvaluationError("no planted attributes in the given samples");
  for (double& m : mass) m /= static_cast<double>(count);
  return mass;
}

double planted_argmax_hit_rate(const DppnModel& model, std::span<const Tensor> features,
                               const std::vector<std::vector<int>>& planted) {
  if (planted.size() != features.size()) throw EvaluationError("planted map does not cover every sample");
  std::size_t hits = 0, count = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const Tensor s = similarity_maps(model, features[i]).back();
    for (std::size_t a = 0; a < planted[i].size(); ++a) {
      if (planted[i][a] == kNotPlanted) continue;
      ++count;
      std::size_t best = 0;
      for (std::size_t r = 1; r < s.rows(); ++r)
        if (s(r, a) > s(best, a)) best = r;
      if (static_cast<int>(best) == planted[i][a]) ++hits;
    }
  }
  if (count == 0) throw EvaluationError("no planted attributes in the given samples");
  return static_cast<double>(hits) / static_cast<double>(count);
}

}  // namespace dppn
