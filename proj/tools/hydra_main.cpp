#include <CLI11.hpp>

#include <iostream>

#include "hydra/commands.hpp"

namespace {

// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 divergence.
int run(int argc, char** argv) {
  CLI::App app{"Hydra: shared-body ensemble training for region classification"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "runs/default";
  std::uint64_t seed_value = 0;
  bool seed_set = false;
  int jobs = 1;
  app.add_option("--config", config_path, "experiment or generation config (JSON)");
  app.add_option("--seed", seed_value, "seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "max concurrent training/prediction jobs")
      ->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset tree");

  auto* train = app.add_subcommand("train", "train bodies and heads into a run directory");
  std::string data_dir;
  train->add_option("--data", data_dir, "dataset directory (train.json/eval.json)")->required();

  auto* predict = app.add_subcommand("predict", "score a manifest with all heads and fuse");
  std::string run_dir, manifest_path;
  predict->add_option("--run", run_dir, "run directory with checkpoints")->required();
  predict->add_option("--manifest", manifest_path, "manifest to score")->required();

  auto* score = app.add_subcommand("score", "score predictions against truth");
  std::string pred_path, truth_path, weights_path, report_json;
  score->add_option("--pred", pred_path, "prediction CSV")->required();
  score->add_option("--truth", truth_path, "truth CSV")->required();
  score->add_option("--weights", weights_path, "class weights CSV")->required();
  score->add_option("--json", report_json, "also write the JSON report here");

  auto* report = app.add_subcommand("report", "summarize a run directory");
  std::string report_run;
  report->add_option("--run", report_run, "run directory")->required();

  auto* cost = app.add_subcommand("cost", "epoch-cost arithmetic for a config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::optional<std::uint64_t> seed =
      seed_set ? std::optional<std::uint64_t>(seed_value) : std::nullopt;

  try {
    if (gen->parsed()) {
      std::optional<std::filesystem::path> spec;
      if (!config_path.empty()) spec = config_path;
      hydra::cli::cmd_gen(spec, seed, out_dir, std::cout);
    } else if (train->parsed()) {
      if (config_path.empty()) throw hydra::ConfigError("train: --config is required");
      hydra::cli::cmd_train(config_path, data_dir, out_dir, seed, jobs, std::cout);
    } else if (predict->parsed()) {
      hydra::cli::cmd_predict(run_dir, manifest_path, out_dir, jobs, std::cout);
    } else if (score->parsed()) {
      std::optional<std::filesystem::path> json_out;
      if (!report_json.empty()) json_out = report_json;
      hydra::cli::cmd_score(pred_path, truth_path, weights_path, json_out, std::cout);
    } else if (report->parsed()) {
      hydra::cli::cmd_report(report_run, std::cout);
    } else if (cost->parsed()) {
      if (config_path.empty()) throw hydra::ConfigError("cost: --config is required");
      hydra::cli::cmd_cost(config_path, std::cout);
    }
  } catch (const hydra::DivergenceError& e) {
    std::cerr << "error (divergence): " << e.what() << "\n";
    return 3;
  } catch (const hydra::DataError& e) {
    std::cerr << "error (data): " << e.what() << "\n";
    return 2;
  } catch (const hydra::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
