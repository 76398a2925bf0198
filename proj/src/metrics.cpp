#include "hydra/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hydra/io.hpp"

namespace hydra::metrics {

ClassWeights::ClassWeights(Eigen::VectorXd weights, int fd_index)
    : w(std::move(weights)), false_detection_index(fd_index) {
  if (w.size() == 0) throw ContractError("ClassWeights: empty weight vector");
  if ((w.array() < 0.0).any()) throw ContractError("ClassWeights: weights must be nonnegative");
  if (false_detection_index >= 0) {
    if (false_detection_index >= w.size())
      throw ContractError("ClassWeights: false_detection_index out of range");
    w[false_detection_index] = 0.0;
  }
  if ((w.array() > 0.0).count() == 0)
    throw ContractError("ClassWeights: at least one class must have positive weight");
}

ConfusionMatrix build_confusion(std::span<const int> pred, std::span<const int> truth, int m) {
  if (pred.size() != truth.size())
    throw ContractError("build_confusion: prediction and truth lengths differ");
  ConfusionMatrix c(m);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= m)
      throw ContractError("build_confusion: truth label out of range at index " +
                          std::to_string(i));
    if (pred[i] < 0 || pred[i] >= m)
      throw ContractError("build_confusion: predicted label out of range at index " +
                          std::to_string(i));
    c.counts(truth[i], pred[i]) += 1;
  }
  return c;
}

ClassPRF class_prf(const ConfusionMatrix& c, int i) {
  if (i < 0 || i >= c.m) throw ContractError("class_prf: class index out of range");
  ClassPRF r;
  r.tp = c.counts(i, i);
  r.fp = c.counts.col(i).sum() - r.tp;
  r.fn = c.counts.row(i).sum() - r.tp;
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                       : 0.0;
  return r;
}

double weighted_fmeasure(const ConfusionMatrix& c, const ClassWeights& weights) {
  if (weights.w.size() != c.m)
    throw ContractError("weighted_fmeasure: weight vector length != class count");
  const double wsum = weights.w.sum();
  if (wsum <= 0.0) throw ContractError("weighted_fmeasure: weights sum to zero");
  double acc = 0.0;
  for (int i = 0; i < c.m; ++i) acc += class_prf(c, i).f * weights.w[i];
  return acc / wsum;
}

ScoreReport score_matrix(const ConfusionMatrix& c, const ClassWeights& weights) {
  ScoreReport report;
  report.regions = c.total();
  report.classes.reserve(static_cast<std::size_t>(c.m));
  for (int i = 0; i < c.m; ++i) report.classes.push_back(class_prf(c, i));
  report.fbar = weighted_fmeasure(c, weights);
  return report;
}

namespace {

// region_id -> label, with duplicate detection.
std::map<std::string, int> load_label_csv(const std::string& path) {
  auto rows = io::read_csv(path);
  if (rows.empty()) throw DataError(path + ": empty label file");
  if (rows[0].size() != 2 || rows[0][0] != "region_id" || rows[0][1] != "label")
    throw DataError(path + ": expected header 'region_id,label'");
  std::map<std::string, int> labels;
  std::vector<std::string> duplicates;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw DataError(path + ": malformed row " + std::to_string(i + 1));
    const std::string& id = rows[i][0];
    const int label = static_cast<int>(io::parse_long(rows[i][1], path));
    if (!labels.emplace(id, label).second) duplicates.push_back(id);
  }
  if (!duplicates.empty()) {
    std::string msg = path + ": duplicate region ids:";
    for (const auto& d : duplicates) msg += " " + d;
    throw DataError(msg);
  }
  return labels;
}

}  // namespace

ScoreReport score_submission(const std::string& pred_path, const std::string& truth_path,
                             const std::string& weights_path) {
  const auto pred = load_label_csv(pred_path);
  const auto truth = load_label_csv(truth_path);

  auto wrows = io::read_csv(weights_path);
  if (wrows.empty()) throw DataError(weights_path + ": empty weights file");
  if (wrows[0].size() != 2 || wrows[0][0] != "label_index" || wrows[0][1] != "weight")
    throw DataError(weights_path + ": expected header 'label_index,weight'");
  const int m = static_cast<int>(wrows.size()) - 1;
  if (m <= 0) throw DataError(weights_path + ": no weight entries");
  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, -1.0);
  for (std::size_t i = 1; i < wrows.size(); ++i) {
    if (wrows[i].size() != 2)
      throw DataError(weights_path + ": malformed row " + std::to_string(i + 1));
    const long idx = io::parse_long(wrows[i][0], weights_path);
    if (idx < 0 || idx >= m) throw DataError(weights_path + ": label index out of range");
    if (w[idx] >= 0.0) throw DataError(weights_path + ": duplicate label index " + std::to_string(idx));
    w[idx] = io::parse_double(wrows[i][1], weights_path);
  }
  for (int i = 0; i < m; ++i)
    if (w[i] < 0.0) throw DataError(weights_path + ": missing weight for label " + std::to_string(i));

  // The last class is the false-detection class; its scoring weight is 0
  // regardless of the table value.
  ClassWeights weights(std::move(w), m - 1);

  std::vector<std::string> missing, extra;
  for (const auto& [id, label] : truth)
    if (!pred.count(id)) missing.push_back(id);
  for (const auto& [id, label] : pred)
    if (!truth.count(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = pred_path + ": region id mismatch;";
    if (!missing.empty()) {
      msg += " missing:";
      for (const auto& id : missing) msg += " " + id;
      msg += ";";
    }
    if (!extra.empty()) {
      msg += " unexpected:";
      for (const auto& id : extra) msg += " " + id;
    }
    throw DataError(msg);
  }

  std::vector<int> pred_labels, truth_labels;
  pred_labels.reserve(truth.size());
  truth_labels.reserve(truth.size());
  for (const auto& [id, label] : truth) {
    if (label < 0 || label >= m)
      throw DataError(truth_path + ": label out of range for region " + id);
    const int p = pred.at(id);
    if (p < 0 || p >= m) throw DataError(pred_path + ": label out of range for region " + id);
    truth_labels.push_back(label);
    pred_labels.push_back(p);
  }
  return score_matrix(build_confusion(pred_labels, truth_labels, m), weights);
}

std::string report_table(const ScoreReport& report, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %6s %6s %6s %9s %9s %9s\n", "class", "tp", "fp", "fn",
                "precision", "recall", "F");
  os << line;
  for (std::size_t i = 0; i < report.classes.size(); ++i) {
    const ClassPRF& c = report.classes[i];
    const std::string name =
        i < class_names.size() ? class_names[i] : "class_" + std::to_string(i);
    std::snprintf(line, sizeof(line), "%-24s %6lld %6lld %6lld %9.4f %9.4f %9.4f\n", name.c_str(),
                  static_cast<long long>(c.tp), static_cast<long long>(c.fp),
                  static_cast<long long>(c.fn), c.precision, c.recall, c.f);
    os << line;
  }
  std::snprintf(line, sizeof(line), "weighted F-measure: %.6f over %lld regions\n", report.fbar,
                static_cast<long long>(report.regions));
  os << line;
  return os.str();
}

std::string report_json(const ScoreReport& report, const std::vector<std::string>& class_names) {
  nlohmann::json j;
  j["fbar"] = report.fbar;
  j["regions"] = report.regions;
  j["classes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.classes.size(); ++i) {
    const ClassPRF& c = report.classes[i];
    nlohmann::json jc;
    jc["label"] = i;
    if (i < class_names.size()) jc["name"] = class_names[i];
    jc["tp"] = c.tp;
    jc["fp"] = c.fp;
    jc["fn"] = c.fn;
    jc["precision"] = c.precision;
    jc["recall"] = c.recall;
    jc["f"] = c.f;
    j["classes"].push_back(jc);
  }
  return j.dump(2) + "\n";
}

}  // namespace hydra::metrics
