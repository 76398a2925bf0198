#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hydra/common.hpp"

namespace hydra::fusion {

/// Raw, pre-softmax per-class scores.
using ScoreVector = Eigen::VectorXd;

/// One scored image crop belonging to a region.
struct ImageScore {
  std::string region_id;
  std::string image_id;
  ScoreVector scores;
};

/// All image scores produced by one head.
using HeadScores = std::vector<ImageScore>;

/// Maps each region to its (sorted) image ids.
using RegionIndex = std::map<std::string, std::vector<std::string>>;

struct FusedRegion {
  std::string region_id;
  int label = 0;
  std::vector<int> ballot;                 // per-head decisions
  std::vector<ScoreVector> head_probs;     // per-head region probabilities
};

/// Elementwise sum of a region's per-image score vectors.
ScoreVector aggregate_region_scores(const std::vector<ScoreVector>& per_image);

/// Numerically stable softmax (max subtraction).
ScoreVector softmax(const ScoreVector& v);

/// Argmax of softmax(summed); ties break toward the lowest class index.
int head_decision(const ScoreVector& summed);

/// Strict-majority vote: the modal label wins only with more than half of
/// the votes, otherwise the region is declared a false detection.
int majority_vote(std::span<const int> ballot, int head_count, int false_detection_label);

/// Full per-region pipeline: sum -> softmax -> argmax per head, then vote.
std::vector<FusedRegion> fuse_dataset(const std::vector<HeadScores>& heads,
                                      const RegionIndex& regions, int false_detection_label);

void write_score_dump(const std::filesystem::path& path, const HeadScores& scores, int m);
HeadScores read_score_dump(const std::filesystem::path& path);

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<FusedRegion>& fused);

}  // namespace hydra::fusion
