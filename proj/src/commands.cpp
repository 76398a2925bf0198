#include "hydra/commands.hpp"

#include <atomic>
#include <thread>

#include <json.hpp>

#include "hydra/dataset.hpp"
#include "hydra/fusion.hpp"
#include "hydra/io.hpp"
#include "hydra/serialize.hpp"

namespace hydra::cli {

namespace {

using nlohmann::json;

// Runs fn(0..count-1) on up to `jobs` threads. Jobs must be independent;
// errors are rethrown in job order after all workers finish.
void run_jobs(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string body_ckpt_name(train::Arch arch) { return train::arch_name(arch) + "-body.ckpt"; }
std::string head_ckpt_name(int id) { return "head-" + std::to_string(id) + ".ckpt"; }

double final_eval_accuracy(const std::vector<train::LogRow>& log) {
  double acc = 0.0;
  for (const auto& row : log)
    if (row.split == "eval") acc = row.accuracy;
  return acc;
}

}  // namespace

void cmd_gen(const std::optional<std::filesystem::path>& spec_path,
             std::optional<std::uint64_t> seed, const std::filesystem::path& out_dir,
             std::ostream& out) {
  data::GenSpec spec;
  if (spec_path) spec = data::gen_spec_from_json(io::read_file(*spec_path));
  const std::uint64_t effective_seed = seed.value_or(1);
  const data::GeneratedDataset generated = data::generate_synthetic(spec, effective_seed, out_dir);
  out << "generated " << generated.train.records.size() << " train, "
      << generated.eval.records.size() << " eval, " << generated.test.records.size()
      << " test records (" << spec.classes << " classes + false detection) under "
      << out_dir.string() << "\n";
}

void cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed, int jobs,
               std::ostream& out) {
  config::ExperimentConfig cfg = config::load_experiment_config(config_path, seed);

  const data::Manifest train_manifest = data::load_manifest(data_dir / "train.json");
  std::optional<data::Manifest> eval_manifest;
  if (std::filesystem::exists(data_dir / "eval.json"))
    eval_manifest = data::load_manifest(data_dir / "eval.json");
  const int class_count = train_manifest.class_count();
  config::resolve_weight_tables(cfg, data_dir, class_count);

  const train::Trainer trainer(cfg.model, cfg.plan, cfg.body, train_manifest,
                               eval_manifest ? &*eval_manifest : nullptr, cfg.seed);

  std::filesystem::create_directories(out_dir / "checkpoints");
  std::filesystem::create_directories(out_dir / "logs");

  std::vector<train::Arch> archs;
  for (const train::HeadConfig& head : cfg.heads)
    if (std::find(archs.begin(), archs.end(), head.arch) == archs.end()) archs.push_back(head.arch);

  // Bodies first; existing checkpoints are reused when the hash matches.
  std::map<train::Arch, Network> bodies;
  std::vector<std::string> notes(archs.size() + cfg.heads.size());
  for (std::size_t i = 0; i < archs.size(); ++i) {
    const train::Arch arch = archs[i];
    const auto ckpt_path = out_dir / "checkpoints" / body_ckpt_name(arch);
    if (std::filesystem::exists(ckpt_path)) {
      serialize::Checkpoint ckpt = serialize::load_checkpoint(ckpt_path);
      if (ckpt.config_hash != cfg.hash)
        throw ConfigError(ckpt_path.string() + ": config hash " + format_hash(ckpt.config_hash) +
                          " does not match " + format_hash(cfg.hash) + "; refusing to combine");
      bodies.emplace(arch, std::move(ckpt.net));
      notes[i] = train::arch_name(arch) + "-body: reused existing checkpoint";
    } else {
      bodies.emplace(arch, Network{});
    }
  }
  run_jobs(jobs, archs.size(), [&](std::size_t i) {
    const train::Arch arch = archs[i];
    if (!notes[i].empty()) return;  // reused
    train::TrainResult result = trainer.train_body(arch);
    serialize::save_checkpoint(result.net, cfg.hash, out_dir / "checkpoints" / body_ckpt_name(arch));
    io::write_file_atomic(out_dir / "logs" / (train::arch_name(arch) + "-body.csv"),
                          train::log_csv(result.log));
    bodies[arch] = std::move(result.net);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s-body: trained %d epochs, final eval accuracy %.3f",
                  train::arch_name(arch).c_str(), cfg.plan.body_epochs,
                  final_eval_accuracy(result.log));
    notes[i] = buf;
  });

  run_jobs(jobs, cfg.heads.size(), [&](std::size_t i) {
    const train::HeadConfig& head = cfg.heads[i];
    const auto ckpt_path = out_dir / "checkpoints" / head_ckpt_name(head.id);
    if (std::filesystem::exists(ckpt_path)) {
      serialize::Checkpoint ckpt = serialize::load_checkpoint(ckpt_path);
      if (ckpt.config_hash != cfg.hash)
        throw ConfigError(ckpt_path.string() + ": config hash " + format_hash(ckpt.config_hash) +
                          " does not match " + format_hash(cfg.hash) + "; refusing to combine");
      notes[archs.size() + i] = "head-" + std::to_string(head.id) + ": reused existing checkpoint";
      return;
    }
    train::TrainResult result = trainer.train_head(bodies.at(head.arch), head);
    serialize::save_checkpoint(result.net, cfg.hash, ckpt_path);
    io::write_file_atomic(out_dir / "logs" / ("head-" + std::to_string(head.id) + ".csv"),
                          train::log_csv(result.log));
    char buf[96];
    std::snprintf(buf, sizeof(buf), "head-%d: trained %d epochs, final eval accuracy %.3f",
                  head.id, cfg.plan.head_epochs, final_eval_accuracy(result.log));
    notes[archs.size() + i] = buf;
  });

  const train::CostReport cost = train::cost_report(cfg.plan, cfg.heads);

  json run;
  run["schema"] = 1;
  run["config_hash"] = format_hash(cfg.hash);
  run["class_count"] = class_count;
  run["data_dir"] = data_dir.string();
  run["bodies"] = json::array();
  for (const train::Arch arch : archs) {
    run["bodies"].push_back({{"arch", train::arch_name(arch)},
                             {"checkpoint", "checkpoints/" + body_ckpt_name(arch)},
                             {"log", "logs/" + train::arch_name(arch) + "-body.csv"}});
  }
  run["heads"] = json::array();
  for (const train::HeadConfig& head : cfg.heads) {
    run["heads"].push_back({{"id", head.id},
                            {"arch", train::arch_name(head.arch)},
                            {"crop", aug::crop_kind_name(head.crop.kind)},
                            {"augment", head.augment_label},
                            {"weighting", weighting::scheme_name(head.weighting.kind)},
                            {"checkpoint", "checkpoints/" + head_ckpt_name(head.id)},
                            {"log", "logs/head-" + std::to_string(head.id) + ".csv"}});
  }
  run["cost"] = {{"hydra_epochs", cost.hydra_epochs},
                 {"independent_epochs", cost.independent_epochs},
                 {"ratio", cost.ratio}};
  io::write_file_atomic(out_dir / "config.json", cfg.canonical);
  io::write_file_atomic(out_dir / "run.json", run.dump(1) + "\n");

  for (const std::string& note : notes) out << note << "\n";
  out << "cost: hydra " << cost.hydra_epochs << " epochs vs independent "
      << cost.independent_epochs << " (ratio " << cost.ratio << ")\n";
}

void cmd_predict(const std::filesystem::path& run_dir, const std::filesystem::path& manifest_path,
                 const std::filesystem::path& out_dir, int jobs, std::ostream& out) {
  const config::ExperimentConfig cfg =
      config::experiment_config_from_json(io::read_file(run_dir / "config.json"));
  const data::Manifest manifest = data::load_manifest(manifest_path);

  // Every head checkpoint must exist and carry this run's config hash.
  std::vector<serialize::Checkpoint> ckpts;
  ckpts.reserve(cfg.heads.size());
  for (const train::HeadConfig& head : cfg.heads) {
    const auto path = run_dir / "checkpoints" / head_ckpt_name(head.id);
    if (!std::filesystem::exists(path))
      throw DataError("missing head checkpoint: " + path.string());
    serialize::Checkpoint ckpt = serialize::load_checkpoint(path);
    if (ckpt.config_hash != cfg.hash)
      throw ConfigError(path.string() + ": config hash mismatch; refusing to combine");
    if (ckpt.net.class_count != manifest.class_count())
      throw DataError("checkpoint expects " + std::to_string(ckpt.net.class_count) +
                      " classes, manifest has " + std::to_string(manifest.class_count()));
    ckpts.push_back(std::move(ckpt));
  }
  if (ckpts.empty()) throw ConfigError("run has no heads");

  const Eigen::VectorXd means = ckpts[0].net.metadata_means.cast<double>();
  const train::LoadedSplit split = train::Trainer::load_split(manifest, means);

  std::filesystem::create_directories(out_dir / "scores");
  std::vector<fusion::HeadScores> all_scores(cfg.heads.size());
  run_jobs(jobs, cfg.heads.size(), [&](std::size_t i) {
    all_scores[i] = train::predict_split(ckpts[i].net, cfg.heads[i].crop, split);
    fusion::write_score_dump(out_dir / "scores" / ("head-" + std::to_string(cfg.heads[i].id) + ".csv"),
                             all_scores[i], manifest.class_count());
  });

  const fusion::RegionIndex regions = data::group_by_region(manifest);
  const std::vector<fusion::FusedRegion> fused =
      fusion::fuse_dataset(all_scores, regions, manifest.false_detection_label());
  fusion::write_predictions_csv(out_dir / "predictions.csv", fused);

  // Region probabilities per head, from the same vectors the vote used.
  for (std::size_t h = 0; h < cfg.heads.size(); ++h) {
    std::string csv = "region_id";
    for (int c = 0; c < manifest.class_count(); ++c) csv += ",prob_" + std::to_string(c);
    csv += "\n";
    for (const fusion::FusedRegion& region : fused) {
      csv += region.region_id;
      for (int c = 0; c < manifest.class_count(); ++c)
        csv += "," + format_real(region.head_probs[h][c]);
      csv += "\n";
    }
    io::write_file_atomic(
        out_dir / "scores" / ("head-" + std::to_string(cfg.heads[h].id) + "-probs.csv"), csv);
  }

  out << "scored " << manifest.records.size() << " images with " << cfg.heads.size()
      << " heads; fused " << fused.size() << " regions -> "
      << (out_dir / "predictions.csv").string() << "\n";
}

metrics::ScoreReport cmd_score(const std::filesystem::path& pred_path,
                               const std::filesystem::path& truth_path,
                               const std::filesystem::path& weights_path,
                               const std::optional<std::filesystem::path>& json_out,
                               std::ostream& out) {
  const metrics::ScoreReport report =
      metrics::score_submission(pred_path.string(), truth_path.string(), weights_path.string());
  out << metrics::report_table(report, {});
  if (json_out) io::write_file_atomic(*json_out, metrics::report_json(report, {}));
  return report;
}

void cmd_report(const std::filesystem::path& run_dir, std::ostream& out) {
  json run;
  try {
    run = json::parse(io::read_file(run_dir / "run.json"));
  } catch (const json::exception& e) {
    throw DataError(run_dir.string() + "/run.json: " + e.what());
  }
  out << "run " << run_dir.string() << "\n";
  out << "config hash: " << run.value("config_hash", std::string("?")) << "\n";
  if (run.contains("cost")) {
    out << "cost: hydra " << run["cost"].value("hydra_epochs", 0) << " epochs, independent "
        << run["cost"].value("independent_epochs", 0) << ", ratio "
        << run["cost"].value("ratio", 0.0) << "\n";
  }
  auto print_job = [&](const json& job, const std::string& name) {
    const auto log_path = run_dir / job.value("log", std::string());
    std::string acc = "n/a";
    if (std::filesystem::exists(log_path)) {
      for (const auto& row : io::read_csv(log_path)) {
        if (row.size() == 5 && row[1] == "eval") acc = row[3];
      }
    }
    out << "  " << name << ": final eval accuracy " << acc << "\n";
  };
  for (const auto& body : run.value("bodies", json::array()))
    print_job(body, body.value("arch", std::string("?")) + "-body");
  for (const auto& head : run.value("heads", json::array())) {
    print_job(head, "head-" + std::to_string(head.value("id", 0)) + " (" +
                        head.value("arch", std::string("?")) + ", " +
                        head.value("crop", std::string("?")) + ", " +
                        head.value("augment", std::string("?")) + ", " +
                        head.value("weighting", std::string("?")) + ")");
  }
  if (std::filesystem::exists(run_dir / "report.json")) {
    try {
      const json score = json::parse(io::read_file(run_dir / "report.json"));
      out << "scored F-measure: " << score.value("fbar", 0.0) << "\n";
    } catch (const json::exception&) {
    }
  }
}

train::CostReport cmd_cost(const std::filesystem::path& config_path, std::ostream& out) {
  const config::ExperimentConfig cfg = config::load_experiment_config(config_path);
  const train::CostReport cost = train::cost_report(cfg.plan, cfg.heads);
  out << "architectures x body epochs + heads x head epochs = " << cost.hydra_epochs
      << " hydra epochs\n";
  out << "independent ensembles would need " << cost.independent_epochs << " epochs\n";
  out << "speedup ratio: " << cost.ratio << "\n";
  return cost;
}

}  // namespace hydra::cli
