#pragma once

#include <filesystem>
#include <optional>

#include "hydra/trainer.hpp"

namespace hydra::config {

/// Fully resolved experiment description: model, plan, body and head roster,
/// plus the canonical serialization its hash is computed from. Artifacts
/// produced under this config carry the hash and refuse to mix with others.
struct ExperimentConfig {
  train::ModelConfig model;
  train::TrainPlan plan;
  train::BodyConfig body;
  std::vector<train::HeadConfig> heads;

  double zoom_lo = 0.8;
  double zoom_hi = 1.25;
  double shift_frac = 0.1;
  double crop_expansion = 2.0;
  Index multi_min_size = 96;

  std::string fmow_table_path;          // resolved against the data directory
  std::string manual_multipliers_path;  // optional; all-ones placeholder when empty

  std::uint64_t seed = 0;
  std::uint64_t hash = 0;
  std::string canonical;  // canonical JSON (hash input, copied into run dirs)
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed_override = {});

ExperimentConfig experiment_config_from_json(const std::string& json_text,
                                             std::optional<std::uint64_t> seed_override = {});

/// Loads the weighting tables referenced by the roster, relative to
/// data_dir, and validates them against the dataset's class count.
void resolve_weight_tables(ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                           int class_count);

}  // namespace hydra::config
