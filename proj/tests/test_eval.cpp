#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dppn/eval.hpp"
#include "dppn/model.hpp"
#include "support.hpp"

using namespace dppn;

namespace {

SyntheticConfig noiseless_reference() {
  SyntheticConfig cfg = testing::reference_synthetic();
  cfg.noise = 0.0;
  return cfg;
}

ModelConfig quick_config(Variant variant, int k = 1) {
  ModelConfig c;
  c.variant = variant;
  c.iterations = k;
  c.reduced_dim = 2;
  c.epochs = 2;
  c.batch_size = 4;
  c.learning_rate = 1e-2;
  return c;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<double> split_doubles(const std::string& line) {
  std::vector<double> out;
  std::stringstream in(line);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

TEST_CASE("mca") {
  const std::vector<std::size_t> classes{0, 1};
  SUBCASE("all correct") {
    const std::vector<std::size_t> y{0, 1, 1, 0};
    CHECK(mca(y, y, classes) == 100.0);
  }
  SUBCASE("class mean, not sample mean") {
    const std::vector<std::size_t> labels{0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
    const std::vector<std::size_t> preds{0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(mca(preds, labels, classes) == 50.0);
  }
  SUBCASE("counting oracle on random 3-class instances") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> cls(0, 2);
    const std::vector<std::size_t> three{0, 1, 2};
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::size_t> labels{0, 1, 2}, preds{cls(rng), cls(rng), cls(rng)};
      for (int i = 0; i < 40; ++i) {
        labels.push_back(cls(rng));
        preds.push_back(cls(rng));
      }
      double expected = 0.0;
      for (std::size_t c : three) {
        const auto count = std::count(labels.begin(), labels.end(), c);
        std::ptrdiff_t hits = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) hits += labels[i] == c && preds[i] == c;
        expected += 100.0 * static_cast<double>(hits) / static_cast<double>(count) / 3.0;
      }
      CHECK(mca(preds, labels, three) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("empty class names the class") {
    const std::vector<std::size_t> y{0, 0};
    CHECK_THROWS_WITH_AS(mca(y, y, classes), doctest::Contains("class 1"), EvaluationError);
  }
  SUBCASE("length mismatch") {
    const std::vector<std::size_t> a{0}, b{0, 1};
    CHECK_THROWS_AS(mca(a, b, classes), EvaluationError);
  }
}

TEST_CASE("harmonic_mean") {
  CHECK(std::abs(harmonic_mean(70.2, 77.1) - 73.5) <= 0.05);
  CHECK(std::abs(harmonic_mean(50.5, 84.4) - 63.2) <= 0.05);
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
  CHECK(harmonic_mean(0.0, 80.0) == 0.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pct(0.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = pct(rng), b = pct(rng);
    CHECK(harmonic_mean(a, a) == doctest::Approx(a).epsilon(1e-14));
    const double h = harmonic_mean(a, b);
    CHECK(h == doctest::Approx(harmonic_mean(b, a)).epsilon(1e-14));
    CHECK(h <= (a + b) / 2.0 + 1e-12);
    CHECK(h <= 2.0 * std::min(a, b) + 1e-12);
  }
}

TEST_CASE("evaluate_gzsl") {
  const GzslDataset d = generate_synthetic(testing::tiny_synthetic(4)).data;

  SUBCASE("report consistency") {
    DppnModel model(quick_config(Variant::dppn, 2), ModelShape::of(d));
    train(d, model);
    const GzslReport r = evaluate_gzsl(model, d);
    CHECK(std::abs(r.h - harmonic_mean(r.mca_u, r.mca_s)) <= 1e-9);
    CHECK(r.seen_samples + r.unseen_samples == d.test_features.size());
    CHECK(r.per_class.size() == d.seen_ids.size() + d.unseen_ids.size());
    double seen_mean = 0.0;
    for (std::size_t c : d.seen_ids) seen_mean += r.per_class.at(c) / static_cast<double>(d.seen_ids.size());
    CHECK(seen_mean == doctest::Approx(r.mca_s).epsilon(1e-12));
    CHECK(r.seen_as_unseen <= r.seen_samples);
    CHECK(r.unseen_as_seen <= r.unseen_samples);
  }
  SUBCASE("no unseen test samples") {
    GzslDataset seen_only = d;
    seen_only.test_features.clear();
    seen_only.test_labels.clear();
    seen_only.test_domains.clear();
    for (std::size_t i = 0; i < d.test_features.size(); ++i) {
      if (d.test_domains[i] != Domain::seen) continue;
      seen_only.test_features.push_back(d.test_features[i]);
      seen_only.test_labels.push_back(d.test_labels[i]);
      seen_only.test_domains.push_back(Domain::seen);
    }
    const DppnModel model(quick_config(Variant::base_v2s), ModelShape::of(d));
    CHECK_THROWS_WITH_AS(evaluate_gzsl(model, seen_only), doctest::Contains("unseen"), EvaluationError);
  }
  SUBCASE("empty test split") {
    GzslDataset empty = d;
    empty.test_features.clear();
    const DppnModel model(quick_config(Variant::base_v2s), ModelShape::of(d));
    CHECK_THROWS_AS(evaluate_gzsl(model, empty), EvaluationError);
  }
  SUBCASE("extent mismatch") {
    const DppnModel model(quick_config(Variant::pal), ModelShape{d.channels() + 1, d.attribute_count(), 3});
    CHECK_THROWS_AS(evaluate_gzsl(model, d), EvaluationError);
  }
  SUBCASE("report CSV") {
    const DppnModel model(quick_config(Variant::pcc), ModelShape::of(d));
    const GzslReport r = evaluate_gzsl(model, d);
    const auto dir = testing::scratch_dir("report_csv");
    write_report_csv(r, dir / "r.csv");
    const auto lines = read_lines(dir / "r.csv");
    REQUIRE(lines.size() == 6 + r.per_class.size());
    CHECK(lines[0] == "metric,value");
    CHECK(lines[3] == "H," + format_double(r.h));
  }
}

TEST_CASE("oracle model on noiseless planted data") {
  const SyntheticConfig cfg = noiseless_reference();
  const SyntheticDataset synth = generate_synthetic(cfg);
  const DppnModel model = testing::oracle_model(synth, cfg.strength, 3);
  const GzslReport r = evaluate_gzsl(model, synth.data);
  CHECK(r.mca_s > 90.0);
  CHECK(r.mca_u > 90.0);
}

TEST_CASE("ablation") {
  const GzslDataset d = generate_synthetic(testing::tiny_synthetic(6)).data;

  SUBCASE("grid parsing") {
    const GridSpec g = GridSpec::parse("# comment\nbase D=2 epochs=1 # trailing\nvariant a K=1\nvariant b K=2 lambda=0.5\n");
    REQUIRE(g.variants.size() == 2);
    const ModelConfig b = g.config_for(g.variants[1], 3);
    CHECK(b.iterations == 2);
    CHECK(b.lambda == 0.5);
    CHECK(b.reduced_dim == 2);
    CHECK(b.seed == 3);
    CHECK_THROWS_AS(GridSpec::parse("base D=2\n"), ConfigError);
    CHECK_THROWS_AS(GridSpec::parse("variant a K=1\nvariant a K=2\n"), ConfigError);
    CHECK_THROWS_AS(GridSpec::parse("variant a bogus=1\n"), ConfigError);
    CHECK_THROWS_AS(GridSpec::parse("row a K=1\n"), ConfigError);
  }
  SUBCASE("each variant differs from the base only in its delta") {
    const GridSpec g = GridSpec::parse("base D=2 epochs=1 lr=0.01\nvariant a K=2\nvariant b f_cs=off\n");
    ModelConfig base;
    base.apply(g.base);
    for (const VariantSpec& v : g.variants) {
      const auto got = g.config_for(v, 0).to_keyvalue().entries();
      const KeyValueFile expected = base.to_keyvalue();
      for (const auto& [key, value] : expected.entries()) {
        if (v.delta.contains(key)) continue;
        CHECK(got.at(key) == value);
      }
    }
  }
  SUBCASE("one variant, one seed gives a single row") {
    const GridSpec g = GridSpec::parse("variant only variant=base_v2s epochs=1 batch=4\n");
    const AblationGrid result = run_ablation(g, d, 1);
    std::ostringstream csv;
    write_ablation_csv(result, csv);
    std::istringstream lines(csv.str());
    std::vector<std::string> rows;
    for (std::string line; std::getline(lines, line);) rows.push_back(line);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == "variant,seed,MCA_u,MCA_s,H");
    CHECK(rows[1].rfind("only,0,", 0) == 0);
    CHECK(result.find("only").median_h == result.runs[0].report->h);
  }
  SUBCASE("same grid and seeds give identical CSV bytes") {
    const GridSpec g = GridSpec::parse("base D=2 epochs=2 batch=4 lr=0.01\nvariant x K=2\nvariant y variant=pcc\n");
    std::ostringstream a, b;
    write_ablation_csv(run_ablation(g, d, 2), a);
    write_ablation_csv(run_ablation(g, d, 2), b);
    CHECK(a.str() == b.str());
  }
  SUBCASE("a failing variant is recorded and the grid continues") {
    GzslDataset bad = d;
    bad.train_labels[0] = d.unseen_ids.front();
    const GridSpec g = GridSpec::parse("base epochs=1 batch=4 D=2\nvariant x K=1\nvariant y K=2\n");
    const AblationGrid result = run_ablation(g, bad, 1);
    REQUIRE(result.runs.size() == 2);
    for (const AblationRun& r : result.runs) {
      CHECK_FALSE(r.report.has_value());
      CHECK_FALSE(r.error.empty());
    }
    CHECK(result.find("y").failed == 1);
    std::ostringstream csv;
    write_ablation_csv(result, csv);
    CHECK(csv.str().find("y,0,failed,failed,failed") != std::string::npos);
  }
  SUBCASE("median") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS_AS(median({}), std::invalid_argument);
  }
}

TEST_CASE("localization export") {
  SUBCASE("region grid") {
    CHECK(region_grid(16) == std::pair<std::size_t, std::size_t>{4, 4});
    CHECK(region_grid(196) == std::pair<std::size_t, std::size_t>{14, 14});
    CHECK(region_grid(12) == std::pair<std::size_t, std::size_t>{4, 3});
    CHECK(region_grid(7) == std::pair<std::size_t, std::size_t>{7, 1});
  }
  SUBCASE("constant column gives an all-zero image") {
    const std::string pgm = similarity_pgm(Tensor({16, 2}, 1.0 / 16.0), 1);
    const std::string header = "P5\n4 4\n255\n";
    REQUIRE(pgm.size() == header.size() + 16);
    CHECK(pgm.substr(0, header.size()) == header);
    CHECK(std::all_of(pgm.begin() + static_cast<std::ptrdiff_t>(header.size()), pgm.end(),
                      [](char c) { return c == 0; }));
  }
  SUBCASE("linear scaling from min to max") {
    Tensor s({4, 1});
    s[0] = 0.0;
    s[1] = 0.5;
    s[2] = 1.0;
    s[3] = 0.25;
    const std::string pgm = similarity_pgm(s, 0);
    const std::string pixels = pgm.substr(pgm.size() - 4);
    CHECK(static_cast<unsigned char>(pixels[0]) == 0);
    CHECK(static_cast<unsigned char>(pixels[1]) == 128);
    CHECK(static_cast<unsigned char>(pixels[2]) == 255);
    CHECK(static_cast<unsigned char>(pixels[3]) == 64);
  }
  SUBCASE("brightest pixel sits on the planted region of a noiseless sample") {
    const SyntheticConfig cfg = noiseless_reference();
    const SyntheticDataset synth = generate_synthetic(cfg);
    const DppnModel model = testing::oracle_model(synth, cfg.strength, 2);
    const auto dir = testing::scratch_dir("export_planted");
    const std::vector<std::size_t> ids{0, 100};
    export_localization(model, synth.data, ids, dir);
    for (std::size_t id : ids) {
      for (std::size_t a = 0; a < cfg.attributes; ++a) {
        const int planted = synth.data.test_planted[id][a];
        if (planted == kNotPlanted) continue;
        std::ifstream in(dir / ("sample" + std::to_string(id) + "_k2_attr" + std::to_string(a) + ".pgm"),
                         std::ios::binary);
        const std::string pgm{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        const std::string pixels = pgm.substr(pgm.size() - cfg.regions);
        const auto brightest = std::max_element(pixels.begin(), pixels.end(), [](char x, char y) {
          return static_cast<unsigned char>(x) < static_cast<unsigned char>(y);
        });
        CHECK(brightest - pixels.begin() == planted);
      }
    }
  }
  SUBCASE("CSV columns sum to one and every file is written") {
    const GzslDataset d = generate_synthetic(testing::tiny_synthetic(7)).data;
    DppnModel model(quick_config(Variant::dppn, 2), ModelShape::of(d));
    train(d, model);
    const auto dir = testing::scratch_dir("export_csv");
    const std::vector<std::size_t> ids{1, 3};
    const auto written = export_localization(model, d, ids, dir);
    CHECK(written.size() == ids.size() * 2 * (1 + d.attribute_count()));
    for (const auto& path : written) CHECK(std::filesystem::exists(path));
    const auto lines = read_lines(dir / "sample3_k2.csv");
    REQUIRE(lines.size() == d.regions());
    std::vector<double> sums(d.attribute_count(), 0.0);
    for (const auto& line : lines) {
      const auto row = split_doubles(line);
      REQUIRE(row.size() == d.attribute_count());
      for (std::size_t a = 0; a < row.size(); ++a) sums[a] += row[a];
    }
    for (double s : sums) CHECK(std::abs(s - 1.0) <= 1e-6);
  }
  SUBCASE("sample id out of range") {
    const GzslDataset d = generate_synthetic(testing::tiny_synthetic(8)).data;
    const DppnModel model(quick_config(Variant::pal), ModelShape::of(d));
    const std::vector<std::size_t> ids{d.test_features.size()};
    CHECK_THROWS_WITH_AS(export_localization(model, d, ids, testing::scratch_dir("export_range")),
                         doctest::Contains("out of range"), EvaluationError);
  }
  SUBCASE("global variants have no maps") {
    const GzslDataset d = generate_synthetic(testing::tiny_synthetic(8)).data;
    const DppnModel model(quick_config(Variant::base_v2s), ModelShape::of(d));
    CHECK_THROWS_AS(similarity_maps(model, d.test_features[0]), EvaluationError);
  }
}

TEST_CASE("planted metrics on the noiseless construction") {
  const SyntheticConfig cfg = noiseless_reference();
  const SyntheticDataset synth = generate_synthetic(cfg);
  const DppnModel model = testing::oracle_model(synth, cfg.strength, 3);
  const auto mass = planted_mass(model, synth.data.test_features, synth.data.test_planted);
  REQUIRE(mass.size() == 3);
  for (double m : mass) {
    CHECK(m > 0.0);
    CHECK(m <= 1.0);
  }
  CHECK(planted_argmax_hit_rate(model, synth.data.test_features, synth.data.test_planted) >= 0.95);
  const std::vector<std::vector<int>> short_map(synth.data.test_planted.begin(), synth.data.test_planted.end() - 1);
  CHECK_THROWS_AS(planted_mass(model, synth.data.test_features, short_map), EvaluationError);
}
