#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "hydra/common.hpp"
#include "hydra/metrics.hpp"

namespace hydra::weighting {

enum class SchemeKind { Unweighted, FmowWeights, FrequencyBalanced, FrequencyManual };

std::string scheme_name(SchemeKind k);
SchemeKind parse_scheme(const std::string& name);

/// A head's class-weighting recipe. The tables are only consulted by the
/// schemes that need them.
struct WeightScheme {
  SchemeKind kind = SchemeKind::Unweighted;
  Eigen::VectorXd fmow_table;          // training view of the challenge weights
  Eigen::VectorXd manual_multipliers;  // per-class factors for FrequencyManual
};

/// Per-class loss weights for training.
///
/// Unweighted: all ones. FmowWeights: the table (false detection at 1).
/// FrequencyBalanced: w_i = N / (m * n_i); classes with zero count receive
/// the largest computed weight. FrequencyManual: balanced times multipliers.
Eigen::VectorXd training_weights(const WeightScheme& scheme, std::span<const long> class_counts,
                                 int m);

/// The challenge weight table with its two exported views: training forces
/// the false-detection weight to 1, metrics forces it to 0.
struct FmowWeightTable {
  Eigen::VectorXd raw;
  int false_detection_index = -1;

  Eigen::VectorXd training_view() const;
  metrics::ClassWeights metrics_view() const;
};

/// Loads a `label_index,weight` CSV listing every class exactly once.
/// The last class is taken as the false-detection class.
FmowWeightTable load_fmow_weight_table(const std::filesystem::path& path);

/// Loads a `label_index,value` CSV of per-class multipliers.
Eigen::VectorXd load_multiplier_table(const std::filesystem::path& path);

}  // namespace hydra::weighting
