#include "hydra/fusion.hpp"

#include <algorithm>
#include <sstream>

#include "hydra/io.hpp"

namespace hydra::fusion {

ScoreVector aggregate_region_scores(const std::vector<ScoreVector>& per_image) {
  if (per_image.empty())
    throw ContractError("aggregate_region_scores: no image scores for region");
  ScoreVector sum = per_image[0];
  for (std::size_t i = 1; i < per_image.size(); ++i) {
    if (per_image[i].size() != sum.size())
      throw ContractError("aggregate_region_scores: score length mismatch");
    sum += per_image[i];
  }
  return sum;
}

ScoreVector softmax(const ScoreVector& v) {
  if (!v.allFinite()) throw ContractError("softmax: non-finite scores");
  const double m = v.maxCoeff();
  ScoreVector e = (v.array() - m).exp();
  return e / e.sum();
}

int head_decision(const ScoreVector& summed) {
  const ScoreVector probs = softmax(summed);
  int best = 0;
  for (int i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

int majority_vote(std::span<const int> ballot, int head_count, int false_detection_label) {
  if (static_cast<int>(ballot.size()) != head_count)
    throw ContractError("majority_vote: ballot size != head count");
  std::map<int, int> votes;
  for (int label : ballot) votes[label] += 1;
  int modal_label = false_detection_label;
  int modal_count = 0;
  for (const auto& [label, count] : votes) {
    if (count > modal_count) {
      modal_label = label;
      modal_count = count;
    }
  }
  // Strict majority: count must exceed half of the head count.
  if (2 * modal_count > head_count) return modal_label;
  return false_detection_label;
}

std::vector<FusedRegion> fuse_dataset(const std::vector<HeadScores>& heads,
                                      const RegionIndex& regions, int false_detection_label) {
  if (heads.empty()) throw ContractError("fuse_dataset: no heads");
  for (const auto& [region_id, images] : regions)
    if (images.empty()) throw DataError("fuse_dataset: region " + region_id + " has zero images");

  // Index each head's rows by (region, image); every indexed pair must be
  // scored exactly once per head.
  using Key = std::pair<std::string, std::string>;
  std::vector<std::map<Key, const ScoreVector*>> by_head(heads.size());
  for (std::size_t h = 0; h < heads.size(); ++h) {
    for (const auto& row : heads[h]) {
      if (!by_head[h].emplace(Key{row.region_id, row.image_id}, &row.scores).second)
        throw DataError("fuse_dataset: duplicate score for region " + row.region_id + " image " +
                        row.image_id);
    }
  }

  std::vector<FusedRegion> out;
  out.reserve(regions.size());
  for (const auto& [region_id, images] : regions) {
    FusedRegion fused;
    fused.region_id = region_id;
    for (std::size_t h = 0; h < heads.size(); ++h) {
      std::vector<ScoreVector> per_image;
      per_image.reserve(images.size());
      for (const auto& image_id : images) {
        auto it = by_head[h].find(Key{region_id, image_id});
        if (it == by_head[h].end())
          throw DataError("fuse_dataset: head " + std::to_string(h) + " missing scores for region " +
                          region_id + " image " + image_id);
        per_image.push_back(*it->second);
      }
      const ScoreVector summed = aggregate_region_scores(per_image);
      const ScoreVector probs = softmax(summed);
      int best = 0;
      for (int i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
      fused.ballot.push_back(best);
      fused.head_probs.push_back(probs);
    }
    fused.label = majority_vote(fused.ballot, static_cast<int>(heads.size()),
                                false_detection_label);
    out.push_back(std::move(fused));
  }
  return out;
}

void write_score_dump(const std::filesystem::path& path, const HeadScores& scores, int m) {
  std::ostringstream os;
  os << "region_id,image_id";
  for (int i = 0; i < m; ++i) os << ",score_" << i;
  os << "\n";
  for (const auto& row : scores) {
    if (row.scores.size() != m)
      throw ContractError("write_score_dump: score length != " + std::to_string(m));
    os << row.region_id << "," << row.image_id;
    for (int i = 0; i < m; ++i) os << "," << format_real(row.scores[i]);
    os << "\n";
  }
  io::write_file_atomic(path, os.str());
}

HeadScores read_score_dump(const std::filesystem::path& path) {
  auto rows = io::read_csv(path);
  if (rows.empty()) throw DataError(path.string() + ": empty score dump");
  const auto& header = rows[0];
  if (header.size() < 3 || header[0] != "region_id" || header[1] != "image_id")
    throw DataError(path.string() + ": expected header 'region_id,image_id,score_0..'");
  const int m = static_cast<int>(header.size()) - 2;
  HeadScores scores;
  scores.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size())
      throw DataError(path.string() + ": malformed row " + std::to_string(r + 1));
    ImageScore row;
    row.region_id = rows[r][0];
    row.image_id = rows[r][1];
    row.scores.resize(m);
    for (int i = 0; i < m; ++i)
      row.scores[i] = io::parse_double(rows[r][2 + static_cast<std::size_t>(i)], path.string());
    scores.push_back(std::move(row));
  }
  return scores;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<FusedRegion>& fused) {
  std::vector<const FusedRegion*> sorted;
  sorted.reserve(fused.size());
  for (const auto& f : fused) sorted.push_back(&f);
  std::sort(sorted.begin(), sorted.end(),
            [](const FusedRegion* a, const FusedRegion* b) { return a->region_id < b->region_id; });
  std::ostringstream os;
  os << "region_id,label\n";
  for (const FusedRegion* f : sorted) os << f->region_id << "," << f->label << "\n";
  io::write_file_atomic(path, os.str());
}

}  // namespace hydra::fusion
