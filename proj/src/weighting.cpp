#include "hydra/weighting.hpp"

#include "hydra/io.hpp"

namespace hydra::weighting {

std::string scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::Unweighted: return "unweighted";
    case SchemeKind::FmowWeights: return "fmow";
    case SchemeKind::FrequencyBalanced: return "frequency2";
    case SchemeKind::FrequencyManual: return "frequency1";
  }
  return "unweighted";
}

SchemeKind parse_scheme(const std::string& name) {
  if (name == "unweighted") return SchemeKind::Unweighted;
  if (name == "fmow") return SchemeKind::FmowWeights;
  if (name == "frequency2") return SchemeKind::FrequencyBalanced;
  if (name == "frequency1") return SchemeKind::FrequencyManual;
  throw ConfigError("unknown weighting scheme: '" + name + "'");
}

namespace {

Eigen::VectorXd balanced_weights(std::span<const long> counts, int m) {
  long n_total = 0;
  for (long c : counts) {
    if (c < 0) throw ContractError("training_weights: negative class count");
    n_total += c;
  }
  if (n_total == 0)
    throw DataError("training_weights: frequency schemes need a nonempty dataset");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  double max_w = 0.0;
  for (int i = 0; i < m; ++i) {
    if (counts[i] > 0) {
      w[i] = static_cast<double>(n_total) / (static_cast<double>(m) * static_cast<double>(counts[i]));
      max_w = std::max(max_w, w[i]);
    }
  }
  // Absent classes get the largest finite weight instead of an infinity.
  for (int i = 0; i < m; ++i)
    if (counts[i] == 0) w[i] = max_w;
  return w;
}

}  // namespace

Eigen::VectorXd training_weights(const WeightScheme& scheme, std::span<const long> class_counts,
                                 int m) {
  if (m <= 0) throw ContractError("training_weights: class count must be positive");
  if (static_cast<int>(class_counts.size()) != m)
    throw ContractError("training_weights: class_counts length != m");

  Eigen::VectorXd w;
  switch (scheme.kind) {
    case SchemeKind::Unweighted:
      w = Eigen::VectorXd::Ones(m);
      break;
    case SchemeKind::FmowWeights:
      if (scheme.fmow_table.size() != m)
        throw ContractError("training_weights: fmow table length != m");
      w = scheme.fmow_table;
      break;
    case SchemeKind::FrequencyBalanced:
      w = balanced_weights(class_counts, m);
      break;
    case SchemeKind::FrequencyManual: {
      if (scheme.manual_multipliers.size() != m)
        throw ContractError("training_weights: multiplier table length != m");
      w = balanced_weights(class_counts, m).cwiseProduct(scheme.manual_multipliers);
      break;
    }
  }
  if ((w.array() <= 0.0).any())
    throw ContractError("training_weights: training weights must be strictly positive");
  return w;
}

Eigen::VectorXd FmowWeightTable::training_view() const {
  Eigen::VectorXd w = raw;
  w[false_detection_index] = 1.0;
  return w;
}

metrics::ClassWeights FmowWeightTable::metrics_view() const {
  return metrics::ClassWeights(raw, false_detection_index);
}

namespace {

Eigen::VectorXd load_indexed_csv(const std::filesystem::path& path, const std::string& value_col) {
  auto rows = io::read_csv(path);
  if (rows.empty()) throw DataError(path.string() + ": empty table");
  if (rows[0].size() != 2 || rows[0][0] != "label_index" || rows[0][1] != value_col)
    throw DataError(path.string() + ": expected header 'label_index," + value_col + "'");
  const int m = static_cast<int>(rows.size()) - 1;
  if (m <= 0) throw DataError(path.string() + ": no entries");
  Eigen::VectorXd values = Eigen::VectorXd::Constant(m, -1.0);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2)
      throw DataError(path.string() + ": malformed row " + std::to_string(r + 1));
    const long idx = io::parse_long(rows[r][0], path.string());
    if (idx < 0 || idx >= m)
      throw DataError(path.string() + ": label index " + std::to_string(idx) +
                      " outside [0, " + std::to_string(m) + ")");
    if (values[idx] >= 0.0)
      throw DataError(path.string() + ": duplicate entry for label " + std::to_string(idx));
    const double v = io::parse_double(rows[r][1], path.string());
    if (v < 0.0) throw DataError(path.string() + ": negative value for label " + std::to_string(idx));
    values[idx] = v;
  }
  for (int i = 0; i < m; ++i)
    if (values[i] < 0.0)
      throw DataError(path.string() + ": missing entry for label " + std::to_string(i));
  return values;
}

}  // namespace

FmowWeightTable load_fmow_weight_table(const std::filesystem::path& path) {
  FmowWeightTable table;
  table.raw = load_indexed_csv(path, "weight");
  table.false_detection_index = static_cast<int>(table.raw.size()) - 1;
  return table;
}

Eigen::VectorXd load_multiplier_table(const std::filesystem::path& path) {
  Eigen::VectorXd values = load_indexed_csv(path, "value");
  if ((values.array() <= 0.0).any())
    throw DataError(path.string() + ": multipliers must be strictly positive");
  return values;
}

}  // namespace hydra::weighting
