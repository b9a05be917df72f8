// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Trend criteria train on the reference synthetic dataset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dppn/dataset.hpp"
#include "dppn/eval.hpp"
#include "dppn/model.hpp"
#include "dppn/ops.hpp"
#include "dppn/optim.hpp"
#include "dppn/pal.hpp"
#include "dppn/pcc.hpp"
#include "dppn/tensor_file.hpp"
#include "support.hpp"

using namespace dppn;
using testing::random_tensor;

namespace {

constexpr double kGradTolerance = 1e-5;
constexpr double kFiniteDiffStep = 1e-5;
constexpr std::size_t kSeeds = 5;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(double v, int precision = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(DPPN_SOURCE_DIR) / "configs" / name;
}

void randomize(const std::vector<Var>& params, std::uint64_t seed) {
  for (Var v : params) v.mutable_value() = random_tensor(v.shape(), seed++, -0.6, 0.6);
}

// ---------------------------------------------------------------------------

Outcome metric_reproduction() {
  Outcome o;
  const double a = harmonic_mean(70.2, 77.1), b = harmonic_mean(50.5, 84.4);
  o.require(std::abs(a - 73.5) <= 0.05, "H(70.2, 77.1) = " + fmt(a, 4));
  o.require(std::abs(b - 63.2) <= 0.05, "H(50.5, 84.4) = " + fmt(b, 4));
  if (o.pass) o.detail = "H(70.2,77.1)=" + fmt(a, 4) + " H(50.5,84.4)=" + fmt(b, 4);
  return o;
}

Outcome gradient_suite() {
  Outcome o;
  double worst = 0.0;
  auto record = [&](const std::string& what, double err) {
    worst = std::max(worst, err);
    o.require(err <= kGradTolerance, what + " rel err " + sci(err));
  };

  // End-to-end total loss, C=6, N=4, N_a=3, N_c=2, K=2.
  ModelConfig cfg;
  cfg.variant = Variant::dppn;
  cfg.iterations = 2;
  cfg.reduced_dim = 2;
  DppnModel model(cfg, {6, 3, 2});
  randomize(model.parameters(), 50);
  const Tensor x = random_tensor({6, 4}, 3), a = Tensor::column({1, 0, 1});
  const Tensor seen = Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1});
  const auto named = model.named_parameters();
  const auto errors = finite_diff_check_params([&] { return model.total_loss(x, 0, a, seen).total; },
                                               model.parameters(), kFiniteDiffStep);
  for (std::size_t i = 0; i < errors.size(); ++i) record(named[i].first, errors[i]);

  // Per-op checks.
  const Var target = Var::constant(random_tensor({4, 3}, 21));
  record("softmax_cols", finite_diff_check([&](const Var& v) { return sq_l2(softmax_cols(v), target); },
                                           random_tensor({4, 3}, 24, -3, 3), kFiniteDiffStep));

  Rng rng(7);
  PalParams pal = PalParams::init({6, 3, 2, true, Aggregation::concat}, rng);
  randomize(pal.parameters(), 80);
  const Var features = Var::constant(random_tensor({6, 4}, 81));
  const Var sim = softmax_cols(Var::constant(random_tensor({4, 3}, 82, -2, 2)));
  const Var refine_target = Var::constant(random_tensor({6, 3}, 83));
  const std::vector<Var> refine_params{pal.refine_hidden.weight, pal.refine_hidden.bias, pal.refine_out.weight,
                                       pal.refine_out.bias};
  for (double err : finite_diff_check_params([&] { return sq_l2(refine(features, sim, pal), refine_target); },
                                             refine_params, kFiniteDiffStep))
    record("f_ar", err);
  record("f_ar input", finite_diff_check([&](const Var& s) { return sq_l2(refine(features, s, pal), refine_target); },
                                         sim.value(), kFiniteDiffStep));

  PccParams pcc = PccParams::init({6, 3, 1, true}, rng);
  randomize(pcc.parameters(), 90);
  const Var gate_target = Var::constant(random_tensor({6, 3}, 91));
  for (double err : finite_diff_check_params(
           [&] { return sq_l2(update_category_prototypes(pcc.prototypes, pcc, 0), gate_target); }, pcc.parameters(),
           kFiniteDiffStep))
    record("f_cs", err);

  const Var part = Var::constant(random_tensor({2, 1}, 25));
  const Var concat_target = Var::constant(random_tensor({6, 1}, 26));
  record("concat", finite_diff_check(
                       [&](const Var& v) {
                         std::vector<Var> parts{v, part, v};
                         return sq_l2(concat_cols(parts), concat_target);
                       },
                       random_tensor({2, 1}, 27), kFiniteDiffStep));

  const Var sq_target = Var::constant(random_tensor({5, 2}, 28));
  record("sq_l2", finite_diff_check([&](const Var& v) { return sq_l2(v, sq_target); }, random_tensor({5, 2}, 29),
                                    kFiniteDiffStep));
  record("cross-entropy", finite_diff_check([&](const Var& v) { return cross_entropy_logits(v, 2); },
                                            random_tensor({5, 1}, 30, -3, 3), kFiniteDiffStep));

  if (o.pass) o.detail = std::to_string(errors.size()) + " parameter tensors + 6 ops, worst rel err " + sci(worst);
  return o;
}

Outcome invariant_suite(const SyntheticDataset& reference) {
  Outcome o;
  const GzslDataset& d = reference.data;

  double worst_col = 0.0;
  for (std::size_t s = 0; s < 50; ++s) {
    const Tensor sim = localize(Var::constant(d.test_features[s * 4]), Var::constant(random_tensor({32, 12}, s))).value();
    for (std::size_t j = 0; j < sim.cols(); ++j) {
      double total = 0.0;
      for (std::size_t r = 0; r < sim.rows(); ++r) total += sim(r, j);
      worst_col = std::max(worst_col, std::abs(total - 1.0));
    }
  }
  o.require(worst_col <= 1e-9, "column sum off by " + sci(worst_col));

  std::set<std::size_t> seen(d.seen_ids.begin(), d.seen_ids.end());
  bool disjoint = true;
  for (std::size_t u : d.unseen_ids) disjoint = disjoint && !seen.count(u);
  o.require(disjoint, "seen and unseen ids overlap");
  GzslDataset overlapping = d;
  overlapping.unseen_ids.push_back(d.seen_ids.front());
  bool rejected = false;
  try {
    overlapping.validate();
  } catch (const DatasetError&) {
    rejected = true;
  }
  o.require(rejected, "overlapping split accepted");

  for (std::size_t dim : {2, 4, 8}) {
    ModelConfig cfg;
    cfg.reduced_dim = dim;
    const DppnModel m(cfg, ModelShape::of(d));
    const std::size_t got = m.representation(d.test_features[0]).value().rows();
    o.require(got == dim * 12, "D=" + std::to_string(dim) + " gives extent " + std::to_string(got));
  }

  const GzslDataset tiny = generate_synthetic(testing::tiny_synthetic(11)).data;
  ModelConfig cfg;
  cfg.reduced_dim = 2;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.01;
  cfg.seed = 42;
  const auto dir = testing::scratch_dir("acceptance_determinism");
  for (const char* run : {"a", "b"}) {
    DppnModel m(cfg, ModelShape::of(tiny));
    save_checkpoint(train(tiny, m).checkpoint, dir / run);
  }
  std::size_t files = 0;
  bool identical = true;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    ++files;
    identical = identical && file_bytes(entry.path()) == file_bytes(dir / "b" / entry.path().filename());
  }
  o.require(identical && files > 0, "seeded checkpoints differ");

  bool round_trip = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor t = random_tensor({3 + seed % 4, 4, 1 + seed % 3}, seed, -100, 100);
    save_tensor(t, dir / "t.dtf");
    round_trip = round_trip && load_tensor(dir / "t.dtf") == to_storage_precision(t);
  }
  o.require(round_trip, "tensor file round trip changed values");

  if (o.pass) {
    o.detail = "column sums within " + sci(worst_col) + ", splits disjoint, extent D*N_a, " + std::to_string(files) +
               " checkpoint files bit-identical, tensor round trip exact";
  }
  return o;
}

struct Trend {
  AblationGrid grid;
  double h(const std::string& name) const { return grid.find(name).median_h; }
};

Outcome component_ordering(const Trend& t) {
  Outcome o;
  const double base = t.h("base_v2s"), pcc = t.h("pcc"), pal = t.h("pal"), k1 = t.h("dppn_k1"), k3 = t.h("dppn_k3");
  o.require(k1 > pal, "H(+PCC&PAL,K=1) " + fmt(k1, 1) + " <= H(+PAL) " + fmt(pal, 1));
  o.require(pal >= pcc, "H(+PAL) " + fmt(pal, 1) + " < H(+PCC) " + fmt(pcc, 1));
  o.require(pcc > base, "H(+PCC) " + fmt(pcc, 1) + " <= H(Base-V2S) " + fmt(base, 1));
  o.require(k3 > k1, "H(+PCC&PAL,K=3) " + fmt(k3, 1) + " <= H(+PCC&PAL,K=1) " + fmt(k1, 1));
  const std::string medians = "median H: base " + fmt(base, 1) + ", +PCC " + fmt(pcc, 1) + ", +PAL " + fmt(pal, 1) +
                              ", +PCC&PAL K=1 " + fmt(k1, 1) + ", K=3 " + fmt(k3, 1);
  o.detail = o.pass ? medians : o.detail + " (" + medians + ")";
  return o;
}

Outcome k_sweep_trend(const Trend& t) {
  Outcome o;
  const double k1 = t.h("dppn_k1"), k2 = t.h("dppn_k2"), k3 = t.h("dppn_k3");
  o.require(k2 >= k1, "H(K=2) " + fmt(k2, 1) + " < H(K=1) " + fmt(k1, 1));
  o.require(k3 >= k2, "H(K=3) " + fmt(k3, 1) + " < H(K=2) " + fmt(k2, 1));
  const std::string medians = "median H over K=1,2,3: " + fmt(k1, 1) + ", " + fmt(k2, 1) + ", " + fmt(k3, 1);
  o.detail = o.pass ? medians : o.detail + " (" + medians + ")";
  return o;
}

Outcome localization_trend(const GzslDataset& reference, const DppnModel& trained) {
  Outcome o;
  const auto mass = planted_mass(trained, reference.test_features, reference.test_planted);
  o.require(mass.back() > mass.front(),
            "planted mass S^K " + fmt(mass.back(), 4) + " <= S^1 " + fmt(mass.front(), 4));

  SyntheticConfig noiseless = testing::reference_synthetic();
  noiseless.noise = 0.0;
  const SyntheticDataset synth = generate_synthetic(noiseless);
  const DppnModel oracle = testing::oracle_model(synth, noiseless.strength, 3);
  const double hits = planted_argmax_hit_rate(oracle, synth.data.test_features, synth.data.test_planted);
  o.require(hits >= 0.95, "noiseless argmax hit rate " + fmt(hits, 4));

  std::string masses;
  for (double m : mass) masses += (masses.empty() ? "" : ", ") + fmt(m, 4);
  const std::string summary = "trained planted mass S^1..S^K: " + masses + "; noiseless argmax hits " + fmt(100 * hits, 1) + "%";
  o.detail = o.pass ? summary : o.detail + " (" + summary + ")";
  return o;
}

Outcome inference_oracle(const GzslDataset& reference, const DppnModel& trained) {
  Outcome o;
  std::vector<std::size_t> all = reference.seen_ids;
  all.insert(all.end(), reference.unseen_ids.begin(), reference.unseen_ids.end());
  const Tensor table = attribute_rows(reference, all);
  const Tensor w = trained.projector().layer.weight.value(), b = trained.projector().layer.bias.value();
  std::vector<Tensor> embeddings;
  for (std::size_t j = 0; j < table.rows(); ++j) {
    Tensor a({table.cols(), 1});
    for (std::size_t i = 0; i < table.cols(); ++i) a[i] = table(j, i);
    embeddings.push_back(testing::naive_dense(w, b, a));
  }
  std::size_t agree = 0;
  constexpr std::size_t kSamples = 1000;
  for (std::size_t s = 0; s < kSamples; ++s) {
    const Tensor x = s % 2 == 0 ? random_tensor({32, 16}, 10'000 + s, -2, 2)
                                : reference.test_features[s % reference.test_features.size()];
    const Tensor f = trained.representation(x).value();
    std::size_t best = 0;
    double best_d = testing::naive_sq_l2(f, embeddings[0]);
    for (std::size_t j = 1; j < embeddings.size(); ++j) {
      const double d = testing::naive_sq_l2(f, embeddings[j]);
      if (d < best_d) best_d = d, best = j;
    }
    agree += trained.predict(x, table) == best;
  }
  o.require(agree == kSamples, std::to_string(agree) + "/" + std::to_string(kSamples) + " agree");
  if (o.pass) o.detail = std::to_string(agree) + "/" + std::to_string(kSamples) + " predictions agree";
  return o;
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  int failures = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& criterion) {
    const auto start = clock::now();
    Outcome o;
    try {
      o = criterion();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(clock::now() - start).count();
    failures += o.pass ? 0 : 1;
    std::printf("%s %s [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds, o.detail.c_str());
    std::fflush(stdout);
  };

  const SyntheticDataset reference = generate_synthetic(SyntheticConfig::from_file(config_path("reference_synth.cfg")));
  const GridSpec grid = GridSpec::read(config_path("ablation_reference.grid"));

  report("metric-reproduction", metric_reproduction);
  report("gradient-suite", gradient_suite);
  report("invariant-suite", [&] { return invariant_suite(reference); });

  Trend trend;
  const auto ablation_start = clock::now();
  trend.grid = run_ablation(grid, reference.data, kSeeds);
  std::printf("ablation: %zu runs in %.1fs\n", trend.grid.runs.size(),
              std::chrono::duration<double>(clock::now() - ablation_start).count());
  write_ablation_summary(trend.grid, std::cout);
  std::fflush(stdout);
  report("component-ordering", [&] { return component_ordering(trend); });
  report("k-sweep-trend", [&] { return k_sweep_trend(trend); });

  const VariantSpec* full = nullptr;
  for (const auto& v : grid.variants)
    if (v.name == "dppn_k3") full = &v;
  DppnModel trained(grid.config_for(*full, 0), ModelShape::of(reference.data));
  train(reference.data, trained);
  report("localization-trend", [&] { return localization_trend(reference.data, trained); });
  report("inference-oracle", [&] { return inference_oracle(reference.data, trained); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
