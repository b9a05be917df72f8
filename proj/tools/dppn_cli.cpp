// Command-line front end: synth, train, eval, ablate, localize.
//
// Failures print a single line `error: <kind>: <message>` to stderr and
// exit with a nonzero status.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dppn/dataset.hpp"
#include "dppn/eval.hpp"
#include "dppn/keyvalue.hpp"
#include "dppn/model.hpp"
#include "dppn/tensor_file.hpp"

namespace {

using namespace dppn;

std::vector<std::size_t> parse_ids(const std::string& text) {
  std::vector<std::size_t> ids;
  std::stringstream in(text);
  for (std::string tok; std::getline(in, tok, ',');) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    const unsigned long long v = std::stoull(tok, &used);
    if (used != tok.size()) throw ConfigError("bad sample id '" + tok + "'");
    ids.push_back(static_cast<std::size_t>(v));
  }
  if (ids.empty()) throw ConfigError("no sample ids given");
  return ids;
}

int fail(const std::string& kind, const std::string& message) {
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  std::cerr << "error: " << kind << ": " << flat << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual progressive prototype network for generalized zero-shot learning"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, ckpt_path, csv_path, grid_path, samples;
  std::size_t seeds = 5;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic planted-correspondence dataset");
  synth->add_option("--config", config_path, "Synthetic config (key=value)")->required();
  synth->add_option("--out", out_path, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--config", config_path, "Model config (key=value)")->required();
  train_cmd->add_option("--data", data_path, "Dataset manifest")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the GZSL test split");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", data_path, "Dataset manifest")->required();
  eval_cmd->add_option("--csv", csv_path, "Write the report as CSV");

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every variant of a grid");
  ablate->add_option("--grid", grid_path, "Grid file")->required();
  ablate->add_option("--data", data_path, "Dataset manifest")->required();
  ablate->add_option("--seeds", seeds, "Seeds per variant")->check(CLI::PositiveNumber);
  ablate->add_option("--out", out_path, "CSV output path")->required();

  auto* localize = app.add_subcommand("localize", "Export similarity maps for test samples");
  localize->add_option("--ckpt", ckpt_path, "Checkpoint directory")->required();
  localize->add_option("--data", data_path, "Dataset manifest")->required();
  localize->add_option("--samples", samples, "Comma-separated test sample ids")->required();
  localize->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*synth) {
      const SyntheticConfig cfg = SyntheticConfig::from_file(config_path);
      const auto manifest = write_dataset(generate_synthetic(cfg).data, out_path);
      std::cout << "manifest=" << manifest.string() << "\n";
    } else if (*train_cmd) {
      const GzslDataset data = load_dataset(data_path);
      DppnModel model(ModelConfig::from_file(config_path), ModelShape::of(data));
      TrainOptions options;
      options.validate = true;
      options.on_epoch = [](const EpochLog& e) {
        std::cout << "epoch=" << e.epoch << " loss=" << format_double(e.mean_loss);
        if (e.validation_h) std::cout << " val_H=" << format_double(*e.validation_h);
        std::cout << std::endl;
      };
      const TrainResult result = train(data, model, options);
      save_checkpoint(result.checkpoint, out_path);
      std::cout << "checkpoint=" << out_path << "\n";
    } else if (*eval_cmd) {
      const GzslDataset data = load_dataset(data_path);
      const DppnModel model = DppnModel::from_checkpoint(load_checkpoint(ckpt_path));
      const GzslReport report = evaluate_gzsl(model, data);
      std::cout << "MCA_u=" << format_double(report.mca_u) << " MCA_s=" << format_double(report.mca_s)
                << " H=" << format_double(report.h) << "\n";
      if (!csv_path.empty()) write_report_csv(report, csv_path);
    } else if (*ablate) {
      const GridSpec grid = GridSpec::read(grid_path);
      const GzslDataset data = load_dataset(data_path);
      const AblationGrid result = run_ablation(grid, data, seeds);
      std::ofstream csv(out_path, std::ios::trunc);
      if (!csv) throw std::runtime_error("cannot open " + out_path + " for writing");
      write_ablation_csv(result, csv);
      write_ablation_summary(result, std::cout);
    } else if (*localize) {
      const GzslDataset data = load_dataset(data_path);
      const DppnModel model = DppnModel::from_checkpoint(load_checkpoint(ckpt_path));
      const auto written = export_localization(model, data, parse_ids(samples), out_path);
      std::cout << "files=" << written.size() << "\n";
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what());
  } catch (const FormatError& e) {
    return fail("format", e.what());
  } catch (const DatasetError& e) {
    return fail("dataset", e.what());
  } catch (const EvaluationError& e) {
    return fail("evaluation", e.what());
  } catch (const DimensionError& e) {
    return fail("dimension", e.what());
  } catch (const NumericError& e) {
    return fail("numeric", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
