#include "dppn/model.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "dppn/eval.hpp"
#include "dppn/ops.hpp"
#include "dppn/optim.hpp"
#include "dppn/tensor_file.hpp"

namespace dppn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::base_v2s: return "base_v2s";
    case Variant::pcc: return "pcc";
    case Variant::pal: return "pal";
    case Variant::dppn: return "dppn";
  }
  return "dppn";
}

Variant parse_variant(std::string_view text) {
  if (text == "base_v2s") return Variant::base_v2s;
  if (text == "pcc") return Variant::pcc;
  if (text == "pal") return Variant::pal;
  if (text == "dppn" || text == "pcc_pal") return Variant::dppn;
  throw ConfigError("unknown variant '" + std::string(text) + "' (expected base_v2s, pcc, pal or dppn)");
}

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::apply(const KeyValueFile& kv) {
  static const std::set<std::string> known{"K",   "lambda",  "D",           "lr",   "batch", "epochs",
                                           "seed", "variant", "aggregation", "f_ar", "f_cs"};
  for (const auto& [k, v] : kv.entries()) {
    if (!known.count(k)) throw ConfigError(kv.origin() + ": unknown key '" + k + "'");
  }
  if (kv.contains("K")) iterations = static_cast<int>(kv.get_int("K"));
  if (kv.contains("lambda")) lambda = kv.get_double("lambda");
  if (kv.contains("D")) reduced_dim = kv.get_size("D");
  if (kv.contains("lr")) learning_rate = kv.get_double("lr");
  if (kv.contains("batch")) batch_size = kv.get_size("batch");
  if (kv.contains("epochs")) epochs = kv.get_size("epochs");
  if (kv.contains("seed")) seed = static_cast<std::uint64_t>(kv.get_size("seed"));
  if (kv.contains("variant")) variant = parse_variant(kv.get("variant"));
  try {
    if (kv.contains("aggregation")) aggregation = parse_aggregation(kv.get("aggregation"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(kv.origin() + ": " + e.what());
  }
  if (kv.contains("f_ar")) refine = kv.get_bool("f_ar");
  if (kv.contains("f_cs")) gate = kv.get_bool("f_cs");
  validate();
}

ModelConfig ModelConfig::from_keyvalue(const KeyValueFile& kv) {
  ModelConfig c;
  c.apply(kv);
  return c;
}

ModelConfig ModelConfig::from_file(const std::filesystem::path& path) { return from_keyvalue(KeyValueFile::read(path)); }

KeyValueFile ModelConfig::to_keyvalue() const {
  KeyValueFile kv;
  kv.set("K", std::to_string(iterations));
  kv.set("lambda", format_double(lambda));
  kv.set("D", std::to_string(reduced_dim));
  kv.set("lr", format_double(learning_rate));
  kv.set("batch", std::to_string(batch_size));
  kv.set("epochs", std::to_string(epochs));
  kv.set("seed", std::to_string(seed));
  kv.set("variant", std::string(to_string(variant)));
  kv.set("aggregation", std::string(to_string(aggregation)));
  kv.set("f_ar", refine ? "on" : "off");
  kv.set("f_cs", gate ? "on" : "off");
  return kv;
}

void ModelConfig::validate() const {
  if (iterations < 1) throw ConfigError("K must be >= 1, got " + std::to_string(iterations));
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (reduced_dim == 0) throw ConfigError("D must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch must be positive");
}

ModelShape ModelShape::of(const GzslDataset& data) {
  return {data.channels(), data.attribute_count(), data.seen_ids.size()};
}

// ---------------------------------------------------------------------------
// Model

DppnModel::DppnModel(const ModelConfig& config, const ModelShape& shape) : config_(config), shape_(shape) {
  config_.validate();
  if (shape.channels == 0 || shape.attributes == 0 || shape.seen_categories == 0) {
    throw DimensionError("model needs positive C, N_a and N_c");
  }
  Rng rng(config.seed);
  if (config.uses_localization()) {
    PalConfig pc{shape.channels, shape.attributes, config.reduced_dim, config.refine, config.aggregation};
    pal_ = PalParams::init(pc, rng);
    projector_ = SemanticProjector::init(shape.attributes, pc.representation_dim(), rng);
  } else {
    global_ = DenseLayer::init(shape.channels, shape.attributes, 1.0, rng);
  }
  if (config.uses_category_prototypes()) {
    PccConfig cc{representation_dim(), shape.seen_categories, config.iterations, config.gate};
    pcc_ = PccParams::init(cc, rng);
  }
}

std::size_t DppnModel::representation_dim() const {
  if (!config_.uses_localization()) return shape_.attributes;
  return pal_.config.representation_dim();
}

std::vector<std::pair<std::string, Var>> DppnModel::named_parameters() const {
  std::vector<std::pair<std::string, Var>> out;
  if (config_.uses_localization()) {
    out.emplace_back("pal.prototypes", pal_.prototypes);
    if (config_.refine) {
      out.emplace_back("pal.refine.hidden.weight", pal_.refine_hidden.weight);
      out.emplace_back("pal.refine.hidden.bias", pal_.refine_hidden.bias);
      out.emplace_back("pal.refine.out.weight", pal_.refine_out.weight);
      out.emplace_back("pal.refine.out.bias", pal_.refine_out.bias);
    }
    out.emplace_back("pal.reduce.weight", pal_.reduce.weight);
    out.emplace_back("pal.reduce.bias", pal_.reduce.bias);
    out.emplace_back("semantic.weight", projector_.layer.weight);
    out.emplace_back("semantic.bias", projector_.layer.bias);
  } else {
    out.emplace_back("global.weight", global_.weight);
    out.emplace_back("global.bias", global_.bias);
  }
  if (config_.uses_category_prototypes()) {
    out.emplace_back("pcc.prototypes", pcc_.prototypes);
    if (config_.gate) {
      out.emplace_back("pcc.gate.hidden.weight", pcc_.gate_hidden.weight);
      out.emplace_back("pcc.gate.hidden.bias", pcc_.gate_hidden.bias);
      out.emplace_back("pcc.gate.out.weight", pcc_.gate_out.weight);
      out.emplace_back("pcc.gate.out.bias", pcc_.gate_out.bias);
    }
    for (std::size_t k = 0; k < pcc_.biases.size(); ++k) {
      out.emplace_back("pcc.bias." + std::to_string(k), pcc_.biases[k]);
    }
  }
  return out;
}

std::vector<Var> DppnModel::parameters() const {
  std::vector<Var> out;
  for (auto& [name, v] : named_parameters()) out.push_back(v);
  return out;
}

std::vector<Var> DppnModel::representations(const Var& features) const {
  if (features.rows() != shape_.channels) {
    throw DimensionError("feature map has " + std::to_string(features.rows()) + " channels, model expects " +
                         std::to_string(shape_.channels));
  }
  if (!config_.uses_localization()) return {global_(mean_cols(features))};
  std::vector<Var> reps;
  for (const PalStep& step : pal_forward(features, pal_, config_.iterations)) reps.push_back(step.representation);
  return reps;
}

Var DppnModel::baseline_v2s_loss(const Var& representation, std::size_t seen_index,
                                 const Tensor& seen_attributes) const {
  if (seen_attributes.rows() != representation.rows()) {
    throw DimensionError("baseline: representation extent " + std::to_string(representation.rows()) +
                         " vs attribute extent " + std::to_string(seen_attributes.rows()));
  }
  if (seen_index >= seen_attributes.cols()) {
    throw std::out_of_range("baseline: label " + std::to_string(seen_index) + " out of range for " +
                            std::to_string(seen_attributes.cols()) + " seen categories");
  }
  Var logits = matmul(Var::constant(kernel::transpose(seen_attributes)), representation);
  return cross_entropy_logits(logits, seen_index);
}

namespace {

struct SampleTerms {
  Var total;
  std::vector<Var> alignment;
  std::vector<Var> category;
};

SampleTerms sample_terms(const DppnModel& model, const std::vector<Var>& reps, std::size_t seen_index,
                                const Tensor& attributes, const Tensor& seen_attributes,
                                const std::vector<Var>& chain) {
  const ModelConfig& cfg = model.config();
  if (seen_index >= model.shape().seen_categories) {
    throw std::out_of_range("label " + std::to_string(seen_index) + " is not one of the " +
                            std::to_string(model.shape().seen_categories) + " seen categories");
  }
  SampleTerms terms;
  if (cfg.uses_localization()) {
    if (attributes.rows() != model.shape().attributes) {
      throw DimensionError("attribute vector has extent " + std::to_string(attributes.rows()) + ", model expects " +
                           std::to_string(model.shape().attributes));
    }
    const Var a = Var::constant(attributes);
    for (const Var& f : reps) terms.alignment.push_back(semantic_align_loss(f, a, model.projector()));
  } else if (cfg.variant == Variant::base_v2s) {
    terms.alignment.push_back(model.baseline_v2s_loss(reps.front(), seen_index, seen_attributes));
  }
  if (cfg.uses_category_prototypes()) {
    for (std::size_t k = 0; k < chain.size(); ++k) {
      const Var& f = reps.size() == 1 ? reps.front() : reps[k];
      terms.category.push_back(category_loss(f, chain[k], seen_index));
    }
  }
  if (terms.alignment.empty()) {
    terms.total = sum(terms.category);
    return terms;
  }
  Var total = sum(terms.alignment);
  if (!terms.category.empty()) total = add(total, scale(sum(terms.category), cfg.lambda));
  terms.total = total;
  return terms;
}

}  // namespace

LossTerms DppnModel::total_loss(const Tensor& features, std::size_t seen_index, const Tensor& attributes,
                                const Tensor& seen_attributes) const {
  const std::vector<Var> chain =
      config_.uses_category_prototypes() ? category_prototype_chain(pcc_) : std::vector<Var>{};
  SampleTerms terms =
      sample_terms(*this, representations(Var::constant(features)), seen_index, attributes, seen_attributes, chain);
  LossTerms out;
  out.total = terms.total;
  for (const Var& v : terms.alignment) out.alignment.push_back(v.item());
  for (const Var& v : terms.category) out.category.push_back(v.item());
  return out;
}

Var DppnModel::batch_loss(std::span<const TrainingSample> batch, const Tensor& seen_attributes) const {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const std::vector<Var> chain =
      config_.uses_category_prototypes() ? category_prototype_chain(pcc_) : std::vector<Var>{};
  std::vector<Var> totals;
  totals.reserve(batch.size());
  for (const TrainingSample& s : batch) {
    const auto reps = representations(Var::constant(*s.features));
    totals.push_back(sample_terms(*this, reps, s.seen_index, *s.attributes, seen_attributes, chain).total);
  }
  return scale(sum(totals), 1.0 / static_cast<double>(batch.size()));
}

Var DppnModel::representation(const Tensor& features) const {
  return representations(Var::constant(features)).back();
}

Tensor DppnModel::class_embeddings(const Tensor& table) const {
  if (table.rank() != 2 || table.cols() != shape_.attributes) {
    throw DimensionError("attribute table " + shape_string(table.shape()) + " does not have N_a=" +
                         std::to_string(shape_.attributes) + " columns");
  }
  if (!config_.uses_localization()) return kernel::transpose(table);
  return projector_(Var::constant(kernel::transpose(table))).value();
}

std::size_t nearest_column(const Tensor& representation, const Tensor& embeddings) {
  if (embeddings.cols() == 0) throw std::invalid_argument("nearest_column: empty embedding table");
  if (representation.size() != embeddings.rows()) {
    throw DimensionError("nearest_column: representation extent " + std::to_string(representation.size()) +
                         " vs embedding extent " + std::to_string(embeddings.rows()));
  }
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < embeddings.cols(); ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < embeddings.rows(); ++i) {
      const double diff = representation[i] - embeddings(i, j);
      d += diff * diff;
    }
    if (d < best_distance) {
      best_distance = d;
      best = j;
    }
  }
  return best;
}

std::size_t DppnModel::predict(const Tensor& features, const Tensor& table) const {
  if (table.rank() != 2 || table.rows() == 0) throw std::invalid_argument("predict: empty attribute table");
  return nearest_column(representation(features).value(), class_embeddings(table));
}

Checkpoint DppnModel::checkpoint(std::size_t epoch) const {
  Checkpoint ckpt;
  ckpt.config = config_;
  ckpt.shape = shape_;
  ckpt.epoch = epoch;
  for (const auto& [name, v] : named_parameters()) ckpt.tensors.emplace(name, to_storage_precision(v.value()));
  return ckpt;
}

DppnModel DppnModel::from_checkpoint(const Checkpoint& ckpt) {
  DppnModel model(ckpt.config, ckpt.shape);
  auto params = model.named_parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw DimensionError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                         std::to_string(params.size()));
  }
  for (auto& [name, v] : params) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw DimensionError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != v.shape()) {
      throw DimensionError("checkpoint tensor '" + name + "' has shape " + shape_string(it->second.shape()) +
                           ", model expects " + shape_string(v.shape()));
    }
    v.mutable_value() = it->second;
  }
  return model;
}

Tensor attribute_rows(const GzslDataset& data, std::span<const std::size_t> ids) {
  Tensor t({ids.size(), data.attribute_count()});
  for (std::size_t r = 0; r < ids.size(); ++r)
    for (std::size_t i = 0; i < data.attribute_count(); ++i) t(r, i) = data.attributes(ids[r], i);
  return t;
}

// ---------------------------------------------------------------------------
// Checkpoint files

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  KeyValueFile meta = ckpt.config.to_keyvalue();
  meta.set("N_a", std::to_string(ckpt.shape.attributes));
  meta.set("N_c", std::to_string(ckpt.shape.seen_categories));
  meta.set("C", std::to_string(ckpt.shape.channels));
  meta.set("epoch", std::to_string(ckpt.epoch));
  std::string names;
  for (const auto& [name, t] : ckpt.tensors) {
    save_tensor(t, dir / (name + ".dtf"));
    names += (names.empty() ? "" : ",") + name;
  }
  meta.set("parameters", names);
  meta.write(dir / "meta.cfg");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  KeyValueFile meta = KeyValueFile::read(dir / "meta.cfg");
  Checkpoint ckpt;
  ckpt.shape.attributes = meta.get_size("N_a");
  ckpt.shape.seen_categories = meta.get_size("N_c");
  ckpt.shape.channels = meta.get_size("C");
  ckpt.epoch = meta.get_size("epoch");
  const std::string names = meta.get("parameters");
  KeyValueFile config_only;
  for (const auto& [k, v] : meta.entries()) {
    if (k != "N_a" && k != "N_c" && k != "C" && k != "epoch" && k != "parameters") config_only.set(k, v);
  }
  ckpt.config = ModelConfig::from_keyvalue(config_only);
  std::size_t start = 0;
  while (start <= names.size()) {
    const auto comma = names.find(',', start);
    const std::string name = names.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!name.empty()) ckpt.tensors.emplace(name, load_tensor(dir / (name + ".dtf")));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  // Rebuilding validates names and shapes against the configuration.
  (void)DppnModel::from_checkpoint(ckpt);
  return ckpt;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const GzslDataset& data, DppnModel& model, const TrainOptions& options) {
  if (data.train_features.empty()) throw DatasetError("cannot train on an empty dataset");
  const ModelShape shape = ModelShape::of(data);
  if (shape.channels != model.shape().channels || shape.attributes != model.shape().attributes ||
      shape.seen_categories != model.shape().seen_categories) {
    throw DimensionError("dataset (C=" + std::to_string(shape.channels) + ", N_a=" + std::to_string(shape.attributes) +
                         ", N_c=" + std::to_string(shape.seen_categories) + ") does not match model (C=" +
                         std::to_string(model.shape().channels) + ", N_a=" + std::to_string(model.shape().attributes) +
                         ", N_c=" + std::to_string(model.shape().seen_categories) + ")");
  }
  const ModelConfig& cfg = model.config();

  // Seen attribute matrix [N_a x N_c] and per-sample targets.
  const Tensor seen_attributes = kernel::transpose(attribute_rows(data, data.seen_ids));
  std::vector<Tensor> class_attributes;
  for (std::size_t id : data.seen_ids) class_attributes.push_back(data.attribute_vector(id));
  std::vector<TrainingSample> samples;
  samples.reserve(data.train_features.size());
  for (std::size_t i = 0; i < data.train_features.size(); ++i) {
    const std::size_t s = data.seen_index(data.train_labels[i]);
    samples.push_back({&data.train_features[i], s, &class_attributes[s]});
  }

  Adam optimizer(model.parameters(), cfg.learning_rate);
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<TrainingSample> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(shuffle_rng)]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);
      Var loss = model.batch_loss(batch, seen_attributes);
      backward(loss);
      optimizer.step();
      loss_sum += loss.item();
      ++batches;
    }
    EpochLog entry{epoch, loss_sum / static_cast<double>(batches), std::nullopt};
    if (options.validate) entry.validation_h = evaluate_gzsl(model, data).h;
    if (options.on_epoch) options.on_epoch(entry);
    result.log.push_back(entry);
  }
  result.checkpoint = model.checkpoint(cfg.epochs);
  return result;
}

}  // namespace dppn
