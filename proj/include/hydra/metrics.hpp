#pragma once

#include <span>
#include <string>
#include <vector>

#include "hydra/common.hpp"

namespace hydra::metrics {

/// m x m count matrix; rows are ground truth, columns predictions.
struct ConfusionMatrix {
  int m = 0;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  explicit ConfusionMatrix(int classes)
      : m(classes), counts(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
                        classes, classes)) {
    if (classes <= 0) throw ContractError("ConfusionMatrix: class count must be positive");
  }

  std::int64_t total() const { return counts.sum(); }
};

/// Per-class scoring weights. The false-detection class always carries
/// weight zero here; the training-side weights live in the weighting module.
struct ClassWeights {
  Eigen::VectorXd w;
  int false_detection_index = -1;

  ClassWeights(Eigen::VectorXd weights, int fd_index);
};

struct ClassPRF {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Full scoring report for one submission.
struct ScoreReport {
  double fbar = 0.0;
  std::vector<ClassPRF> classes;
  std::int64_t regions = 0;
};

ConfusionMatrix build_confusion(std::span<const int> pred, std::span<const int> truth, int m);

/// Precision, recall and F for class i. Degenerate denominators yield 0;
/// the class still counts toward the weighted-average denominator.
ClassPRF class_prf(const ConfusionMatrix& c, int i);

/// Weighted average of per-class F-measures: sum(F_i * w_i) / sum(w_i).
double weighted_fmeasure(const ConfusionMatrix& c, const ClassWeights& weights);

ScoreReport score_matrix(const ConfusionMatrix& c, const ClassWeights& weights);

/// Scores a prediction CSV against a truth CSV using a weights CSV.
/// Regions are matched by id; missing, duplicate, or extra ids are errors.
ScoreReport score_submission(const std::string& pred_path, const std::string& truth_path,
                             const std::string& weights_path);

/// Renders the report as a fixed-width table.
std::string report_table(const ScoreReport& report, const std::vector<std::string>& class_names);

/// Serializes the report as JSON text.
std::string report_json(const ScoreReport& report, const std::vector<std::string>& class_names);

}  // namespace hydra::metrics
