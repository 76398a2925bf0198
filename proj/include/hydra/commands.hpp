#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "hydra/config.hpp"
#include "hydra/metrics.hpp"

namespace hydra::cli {

/// Generates a synthetic dataset tree (images, manifests, truth CSVs and a
/// challenge weights table) under out_dir.
void cmd_gen(const std::optional<std::filesystem::path>& spec_path,
             std::optional<std::uint64_t> seed, const std::filesystem::path& out_dir,
             std::ostream& out);

/// Trains bodies then heads into a run directory. Existing checkpoints with
/// a matching config hash are reused; mismatched hashes are refused.
void cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed, int jobs,
               std::ostream& out);

/// Scores a manifest with every head of a run: per-head score dumps,
/// per-head region probabilities, and the fused prediction CSV.
void cmd_predict(const std::filesystem::path& run_dir, const std::filesystem::path& manifest_path,
                 const std::filesystem::path& out_dir, int jobs, std::ostream& out);

/// Scores a prediction CSV against truth and weights; prints the table and
/// optionally writes the JSON report.
metrics::ScoreReport cmd_score(const std::filesystem::path& pred_path,
                               const std::filesystem::path& truth_path,
                               const std::filesystem::path& weights_path,
                               const std::optional<std::filesystem::path>& json_out,
                               std::ostream& out);

/// Prints a run-directory summary (config hash, cost report, job results).
void cmd_report(const std::filesystem::path& run_dir, std::ostream& out);

/// Prints the shared-body vs independent-training epoch arithmetic.
train::CostReport cmd_cost(const std::filesystem::path& config_path, std::ostream& out);

}  // namespace hydra::cli
