#include "dppn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "dppn/keyvalue.hpp"
#include "dppn/tensor_file.hpp"

namespace dppn {

std::size_t GzslDataset::channels() const {
  if (!train_features.empty()) return train_features.front().rows();
  if (!test_features.empty()) return test_features.front().rows();
  return 0;
}

std::size_t GzslDataset::regions() const {
  if (!train_features.empty()) return train_features.front().cols();
  if (!test_features.empty()) return test_features.front().cols();
  return 0;
}

Tensor GzslDataset::attribute_vector(std::size_t category) const {
  if (category >= category_count()) {
    throw DatasetError("category " + std::to_string(category) + " has no attribute row");
  }
  Tensor a({attribute_count(), 1});
  for (std::size_t i = 0; i < attribute_count(); ++i) a[i] = attributes(category, i);
  return a;
}

std::size_t GzslDataset::seen_index(std::size_t category) const {
  auto it = std::find(seen_ids.begin(), seen_ids.end(), category);
  if (it == seen_ids.end()) throw DatasetError("category " + std::to_string(category) + " is not a seen category");
  return static_cast<std::size_t>(it - seen_ids.begin());
}

void GzslDataset::validate() const {
  if (attributes.rank() != 2) throw DatasetError("attribute table must be [categories x N_a]");
  if (!attributes.all_finite()) throw DatasetError("attribute table contains non-finite values");
  const std::size_t n_cat = category_count();

  std::set<std::size_t> seen, unseen;
  for (std::size_t id : seen_ids) {
    if (id >= n_cat) throw DatasetError("seen id " + std::to_string(id) + " has no attribute row");
    if (!seen.insert(id).second) throw DatasetError("seen id " + std::to_string(id) + " listed twice");
  }
  for (std::size_t id : unseen_ids) {
    if (id >= n_cat) throw DatasetError("unseen id " + std::to_string(id) + " has no attribute row");
    if (seen.count(id)) throw DatasetError("category " + std::to_string(id) + " is both seen and unseen");
    if (!unseen.insert(id).second) throw DatasetError("unseen id " + std::to_string(id) + " listed twice");
  }
  if (seen.empty()) throw DatasetError("no seen categories");
  if (unseen.empty()) throw DatasetError("no unseen categories");

  for (std::size_t c = 0; c < n_cat; ++c) {
    bool nonzero = false;
    for (std::size_t i = 0; i < attribute_count(); ++i) nonzero = nonzero || attributes(c, i) != 0.0;
    if (!nonzero && (seen.count(c) || unseen.count(c))) {
      throw DatasetError("category " + std::to_string(c) + " has an all-zero attribute vector");
    }
  }

  if (train_features.empty()) throw DatasetError("training split is empty");
  if (train_features.size() != train_labels.size()) {
    throw DatasetError("train features/labels count mismatch: " + std::to_string(train_features.size()) + " vs " +
                       std::to_string(train_labels.size()));
  }
  if (test_features.size() != test_labels.size() || test_features.size() != test_domains.size()) {
    throw DatasetError("test features/labels/domains count mismatch");
  }
  const Shape feature_shape = train_features.front().shape();
  auto check_shape = [&](const Tensor& t, const char* split) {
    if (t.shape() != feature_shape) {
      throw DatasetError(std::string(split) + " feature map " + shape_string(t.shape()) + " differs from " +
                         shape_string(feature_shape));
    }
  };
  for (std::size_t i = 0; i < train_features.size(); ++i) {
    check_shape(train_features[i], "train");
    if (!seen.count(train_labels[i])) {
      throw DatasetError("train sample " + std::to_string(i) + " has label " + std::to_string(train_labels[i]) +
                         " which is not a seen category");
    }
  }
  bool has_seen = false, has_unseen = false;
  for (std::size_t i = 0; i < test_features.size(); ++i) {
    check_shape(test_features[i], "test");
    const std::size_t y = test_labels[i];
    const Domain expected = seen.count(y) ? Domain::seen : Domain::unseen;
    if (!seen.count(y) && !unseen.count(y)) {
      throw DatasetError("test sample " + std::to_string(i) + " has unknown category " + std::to_string(y));
    }
    if (test_domains[i] != expected) {
      throw DatasetError("test sample " + std::to_string(i) + " domain tag disagrees with category " +
                         std::to_string(y));
    }
    has_seen = has_seen || expected == Domain::seen;
    has_unseen = has_unseen || expected == Domain::unseen;
  }
  if (!has_seen || !has_unseen) throw DatasetError("test split must contain both seen and unseen samples");

  auto check_planted = [&](const std::vector<std::vector<int>>& planted, std::size_t count, const char* split) {
    if (planted.empty()) return;
    if (planted.size() != count) throw DatasetError(std::string(split) + " planted map has wrong sample count");
    for (const auto& row : planted) {
      if (row.size() != attribute_count()) {
        throw DatasetError(std::string(split) + " planted map has " + std::to_string(row.size()) +
                           " attributes, table has " + std::to_string(attribute_count()));
      }
      for (int r : row) {
        if (r != kNotPlanted && (r < 0 || static_cast<std::size_t>(r) >= regions())) {
          throw DatasetError(std::string(split) + " planted region " + std::to_string(r) + " out of range");
        }
      }
    }
  };
  check_planted(train_planted, train_features.size(), "train");
  check_planted(test_planted, test_features.size(), "test");
}

std::size_t SyntheticConfig::active_attributes() const {
  return static_cast<std::size_t>(std::lround(density * static_cast<double>(attributes)));
}

SyntheticConfig SyntheticConfig::from_file(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::read(path);
  static const std::set<std::string> known{"C", "N", "N_a", "seen", "unseen", "samples",
                                           "density", "strength", "noise", "train_fraction", "seed"};
  for (const auto& [k, v] : kv.entries()) {
    if (!known.count(k)) throw ConfigError(path.string() + ": unknown key '" + k + "'");
  }
  SyntheticConfig c;
  if (kv.contains("C")) c.channels = kv.get_size("C");
  if (kv.contains("N")) c.regions = kv.get_size("N");
  if (kv.contains("N_a")) c.attributes = kv.get_size("N_a");
  if (kv.contains("seen")) c.seen_categories = kv.get_size("seen");
  if (kv.contains("unseen")) c.unseen_categories = kv.get_size("unseen");
  if (kv.contains("samples")) c.samples_per_category = kv.get_size("samples");
  if (kv.contains("density")) c.density = kv.get_double("density");
  if (kv.contains("strength")) c.strength = kv.get_double("strength");
  if (kv.contains("noise")) c.noise = kv.get_double("noise");
  if (kv.contains("train_fraction")) c.train_fraction = kv.get_double("train_fraction");
  if (kv.contains("seed")) c.seed = static_cast<std::uint64_t>(kv.get_size("seed"));
  return c;
}

namespace {

Tensor draw_signatures(const SyntheticConfig& config, std::mt19937_64& rng) {
  const std::size_t c = config.channels, na = config.attributes;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Tensor w({c, na});
    for (std::size_t i = 0; i < na; ++i) {
      double norm = 0.0;
      for (std::size_t r = 0; r < c; ++r) {
        w(r, i) = normal(rng);
        norm += w(r, i) * w(r, i);
      }
      norm = std::sqrt(norm);
      for (std::size_t r = 0; r < c; ++r) w(r, i) /= norm;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
      for (std::size_t j = i + 1; j < na; ++j) {
        double dot = 0.0;
        for (std::size_t r = 0; r < c; ++r) dot += w(r, i) * w(r, j);
        worst = std::max(worst, std::abs(dot));
      }
    }
    if (worst < 0.5) return w;
  }
  throw DatasetError("could not draw near-orthogonal signatures for C=" + std::to_string(c) +
                     ", N_a=" + std::to_string(na));
}

std::vector<std::size_t> choose(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  const std::size_t c = config.channels, n = config.regions, na = config.attributes;
  const std::size_t categories = config.seen_categories + config.unseen_categories;
  if (c == 0 || n == 0 || na == 0) throw DatasetError("synthetic config needs positive C, N and N_a");
  if (config.seen_categories == 0 || config.unseen_categories == 0) {
    throw DatasetError("synthetic config needs at least one seen and one unseen category");
  }
  if (config.samples_per_category < 2) throw DatasetError("synthetic config needs >= 2 samples per category");
  if (!(config.noise >= 0.0) || !(config.strength > 0.0)) throw DatasetError("noise must be >= 0 and strength > 0");
  const std::size_t active = config.active_attributes();
  if (active == 0) throw DatasetError("density " + format_double(config.density) + " gives all-zero attribute vectors");
  if (active > na) throw DatasetError("density above 1");
  if (active > n) {
    throw DatasetError("N=" + std::to_string(n) + " regions cannot host " + std::to_string(active) +
                       " distinct planted attributes");
  }
  const auto train_count = static_cast<std::size_t>(
      std::lround(config.train_fraction * static_cast<double>(config.samples_per_category)));
  if (train_count == 0 || train_count >= config.samples_per_category) {
    throw DatasetError("train_fraction must leave both train and test samples for seen categories");
  }

  std::mt19937_64 rng(config.seed);
  SyntheticDataset out;
  out.signatures = draw_signatures(config, rng);
  GzslDataset& d = out.data;

  // Distinct binary attribute vectors, `active` ones each.
  d.attributes = Tensor({categories, na}, 0.0);
  std::set<std::vector<std::size_t>> used;
  std::vector<std::vector<std::size_t>> active_sets;
  for (std::size_t y = 0; y < categories; ++y) {
    std::vector<std::size_t> pick;
    int attempts = 0;
    do {
      pick = choose(na, active, rng);
      if (++attempts > 10000) throw DatasetError("not enough distinct attribute combinations for the categories");
    } while (!used.insert(pick).second);
    for (std::size_t i : pick) d.attributes(y, i) = 1.0;
    active_sets.push_back(std::move(pick));
  }
  for (std::size_t y = 0; y < config.seen_categories; ++y) d.seen_ids.push_back(y);
  for (std::size_t y = config.seen_categories; y < categories; ++y) d.unseen_ids.push_back(y);

  std::normal_distribution<double> noise(0.0, 1.0);
  auto sample = [&](std::size_t y, std::vector<int>& planted) {
    Tensor x({c, n});
    if (config.noise > 0.0) {
      for (double& v : x.values()) v = config.noise * noise(rng);
    }
    planted.assign(na, kNotPlanted);
    const std::vector<std::size_t> regions = choose(n, active, rng);
    // Pair attributes with a random permutation of the chosen regions.
    std::vector<std::size_t> order(active);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = active; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    for (std::size_t j = 0; j < active; ++j) {
      const std::size_t attr = active_sets[y][j];
      const std::size_t region = regions[order[j]];
      planted[attr] = static_cast<int>(region);
      for (std::size_t r = 0; r < c; ++r) x(r, region) += config.strength * out.signatures(r, attr);
    }
    return x;
  };

  for (std::size_t y = 0; y < categories; ++y) {
    const bool is_seen = y < config.seen_categories;
    for (std::size_t s = 0; s < config.samples_per_category; ++s) {
      std::vector<int> planted;
      Tensor x = sample(y, planted);
      if (is_seen && s < train_count) {
        d.train_features.push_back(std::move(x));
        d.train_labels.push_back(y);
        d.train_planted.push_back(std::move(planted));
      } else {
        d.test_features.push_back(std::move(x));
        d.test_labels.push_back(y);
        d.test_domains.push_back(is_seen ? Domain::seen : Domain::unseen);
        d.test_planted.push_back(std::move(planted));
      }
    }
  }
  d.validate();
  return out;
}

namespace {

Tensor index_tensor(const std::vector<std::size_t>& ids) {
  std::vector<double> v(ids.begin(), ids.end());
  return Tensor({ids.size()}, std::move(v));
}

Tensor planted_tensor(const std::vector<std::vector<int>>& planted) {
  const std::size_t cols = planted.front().size();
  Tensor t({planted.size(), cols});
  for (std::size_t i = 0; i < planted.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) t(i, j) = planted[i][j];
  return t;
}

std::vector<std::size_t> read_ids(const Tensor& t, const std::string& key) {
  if (t.rank() != 1) throw DatasetError(key + " must be rank 1, got " + shape_string(t.shape()));
  std::vector<std::size_t> ids;
  ids.reserve(t.size());
  for (double v : t.values()) {
    if (v < 0.0 || v != std::floor(v)) throw DatasetError(key + " contains non-index value " + format_double(v));
    ids.push_back(static_cast<std::size_t>(v));
  }
  return ids;
}

std::vector<Tensor> read_features(const Tensor& t, const std::string& key) {
  if (t.rank() != 3) throw DatasetError(key + " must be [samples x C x N], got " + shape_string(t.shape()));
  std::vector<Tensor> out;
  out.reserve(t.shape()[0]);
  for (std::size_t i = 0; i < t.shape()[0]; ++i) out.push_back(t.slice(i));
  return out;
}

std::vector<std::vector<int>> read_planted(const Tensor& t, const std::string& key) {
  if (t.rank() != 2) throw DatasetError(key + " must be [samples x N_a], got " + shape_string(t.shape()));
  std::vector<std::vector<int>> out(t.rows(), std::vector<int>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) out[i][j] = static_cast<int>(t(i, j));
  return out;
}

}  // namespace

std::filesystem::path write_dataset(const GzslDataset& data, const std::filesystem::path& dir) {
  data.validate();
  std::filesystem::create_directories(dir);
  KeyValueFile manifest;
  auto put = [&](const std::string& key, const Tensor& t) {
    const std::string file = key + ".dtf";
    save_tensor(t, dir / file);
    manifest.set(key, file);
  };
  put("train_features", stack(data.train_features));
  put("train_labels", index_tensor(data.train_labels));
  put("test_features", stack(data.test_features));
  put("test_labels", index_tensor(data.test_labels));
  std::vector<std::size_t> domains;
  for (Domain dom : data.test_domains) domains.push_back(static_cast<std::size_t>(dom));
  put("test_domains", index_tensor(domains));
  put("attributes", data.attributes);
  put("seen_ids", index_tensor(data.seen_ids));
  put("unseen_ids", index_tensor(data.unseen_ids));
  if (!data.test_planted.empty()) put("planted_map", planted_tensor(data.test_planted));
  if (!data.train_planted.empty()) put("train_planted_map", planted_tensor(data.train_planted));
  manifest.set("N_a", std::to_string(data.attribute_count()));
  const auto path = dir / "manifest.cfg";
  manifest.write(path);
  return path;
}

GzslDataset load_dataset(const std::filesystem::path& manifest_path) {
  const KeyValueFile manifest = KeyValueFile::read(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  auto load = [&](const std::string& key) { return load_tensor(base / manifest.get(key)); };

  GzslDataset d;
  d.train_features = read_features(load("train_features"), "train_features");
  d.train_labels = read_ids(load("train_labels"), "train_labels");
  d.test_features = read_features(load("test_features"), "test_features");
  d.test_labels = read_ids(load("test_labels"), "test_labels");
  for (std::size_t v : read_ids(load("test_domains"), "test_domains")) {
    if (v > 1) throw DatasetError("test_domains entries must be 0 (seen) or 1 (unseen)");
    d.test_domains.push_back(static_cast<Domain>(v));
  }
  d.attributes = load("attributes");
  if (d.attributes.rank() != 2) {
    throw DatasetError("attributes must be [categories x N_a], got " + shape_string(d.attributes.shape()));
  }
  if (manifest.contains("N_a") && manifest.get_size("N_a") != d.attributes.cols()) {
    throw DatasetError("attribute table has N_a=" + std::to_string(d.attributes.cols()) + ", manifest declares N_a=" +
                       manifest.get("N_a"));
  }
  d.seen_ids = read_ids(load("seen_ids"), "seen_ids");
  d.unseen_ids = read_ids(load("unseen_ids"), "unseen_ids");
  if (manifest.contains("planted_map")) d.test_planted = read_planted(load("planted_map"), "planted_map");
  if (manifest.contains("train_planted_map")) {
    d.train_planted = read_planted(load("train_planted_map"), "train_planted_map");
  }
  d.validate();
  return d;
}

}  // namespace dppn
