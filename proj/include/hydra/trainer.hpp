#pragma once

#include <optional>

#include "hydra/adam.hpp"
#include "hydra/augment.hpp"
#include "hydra/dataset.hpp"
#include "hydra/fusion.hpp"
#include "hydra/net.hpp"
#include "hydra/weighting.hpp"

namespace hydra::train {

enum class Arch { Residual, Dense };

std::string arch_name(Arch a);
Arch parse_arch(const std::string& name);

/// Desk-scale stand-ins for the two CNN families: a residual conv stack and
/// a densely connected block stack, both feeding the FC classifier stack.
struct ModelConfig {
  Index input_h = 24;
  Index input_w = 24;
  Index input_c = 4;
  std::vector<Index> fc = {64, 64, 64};
  double dropout = 0.5;

  Index res_stem_channels = 8;
  Index res_stem_stride = 2;
  Index res_blocks = 2;
  Index res_kernel = 3;

  Index dense_stem_channels = 8;
  Index dense_stem_stride = 2;
  Index dense_blocks = 1;
  Index dense_block_layers = 2;
  Index dense_growth = 8;
  Index dense_kernel = 3;
};

std::vector<LayerSpec> make_architecture(Arch arch, const ModelConfig& cfg, Index class_count);

/// Epoch budget and learning rates for body and head training.
struct TrainPlan {
  int body_epochs = 6;
  int head_epochs = 5;
  double body_lr = 1e-4;
  std::vector<std::pair<int, double>> head_lr_schedule = {{1, 1e-4}, {3, 1e-5}, {1, 1e-6}};
  int batch_size = 32;

  void validate() const;
};

/// Piecewise-constant head learning rate for a 0-based epoch index.
double lr_at(const TrainPlan& plan, int head_epoch_index);

/// One head's full recipe, resolved against the experiment config.
struct HeadConfig {
  int id = 0;
  Arch arch = Arch::Residual;
  aug::CropStyle crop;
  std::string augment_label = "none";
  aug::AugmentPolicy augment;
  weighting::WeightScheme weighting;
  std::uint64_t seed = 0;
};

/// Shared-body versus independent-ensemble epoch arithmetic.
struct CostReport {
  long hydra_epochs = 0;
  long independent_epochs = 0;
  double ratio = 1.0;
};

CostReport cost_report(const TrainPlan& plan, const std::vector<HeadConfig>& roster);

struct BodyConfig {
  aug::CropStyle crop;  // default EXT-PAN
  // Body augmentation is flip-only and its loss unweighted.
};

struct LogRow {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
  double lr = 0.0;
};

std::string log_csv(const std::vector<LogRow>& rows);

/// A manifest with its imagery decoded into memory.
struct LoadedSplit {
  const data::Manifest* manifest = nullptr;
  std::vector<Tensor> pan;                          // per record
  std::vector<std::optional<data::MultiImage>> multi;  // per record
  std::vector<Tensor> metadata;                     // per record, mean-subtracted
  // region id -> record indices, sorted by region then image id
  std::vector<std::pair<std::string, std::vector<std::size_t>>> regions;
};

struct TrainResult {
  Network net;
  std::vector<LogRow> log;
};

/// Runs body and head trainings against in-memory splits. Instances are
/// immutable after construction; all train/predict calls are const and may
/// run concurrently as long as each job owns its own network.
class Trainer {
 public:
  Trainer(ModelConfig model, TrainPlan plan, BodyConfig body, const data::Manifest& train_manifest,
          const data::Manifest* eval_manifest, std::uint64_t seed);

  /// Coarse body training: flip-only augmentation, unweighted loss.
  TrainResult train_body(Arch arch) const;

  /// Forks the body and fine-tunes with the head's crop, augmentation and
  /// class weighting under the plan's learning-rate schedule.
  TrainResult train_head(const Network& body, const HeadConfig& head) const;

  /// Scores every record of a manifest with one network (eval mode).
  fusion::HeadScores predict(const Network& net, const aug::CropStyle& crop,
                             const LoadedSplit& split) const;

  const LoadedSplit& train_split() const { return train_; }
  const LoadedSplit* eval_split() const { return has_eval_ ? &eval_ : nullptr; }
  const Eigen::VectorXd& train_means() const { return means_; }
  int class_count() const { return class_count_; }

  static LoadedSplit load_split(const data::Manifest& manifest, const Eigen::VectorXd& means);

 private:
  struct Job {
    Network* net = nullptr;
    const aug::CropStyle* crop = nullptr;
    const aug::AugmentPolicy* policy = nullptr;
    const Eigen::VectorXd* class_weights = nullptr;
    std::uint64_t seed = 0;
    std::string name;
  };

  std::optional<Tensor> prepare_pixels(const LoadedSplit& split, std::size_t idx,
                                       const aug::CropStyle& crop, const aug::AugmentPolicy* policy,
                                       int epoch, std::uint64_t seed, bool training) const;

  void run_training(const Job& job, int epochs, const std::vector<double>& epoch_lrs,
                    std::vector<LogRow>& log) const;

  LogRow evaluate(const Network& net, const aug::CropStyle& crop,
                  const Eigen::VectorXd& class_weights, int epoch) const;

  ModelConfig model_;
  TrainPlan plan_;
  BodyConfig body_;
  std::uint64_t seed_;
  int class_count_ = 0;
  Eigen::VectorXd means_;
  LoadedSplit train_;
  LoadedSplit eval_;
  bool has_eval_ = false;
};

/// Starts each head from an exact copy of its architecture's body weights.
/// Returns roster order; missing bodies are an error.
std::vector<Network> spawn_heads(const std::map<Arch, Network>& bodies,
                                 const std::vector<HeadConfig>& roster);

/// Crop -> (augment) -> resize -> channel-fit for one record. Returns
/// nullopt when the EXT-MULTI size filter rejects a training crop.
std::optional<Tensor> prepare_pixels(const LoadedSplit& split, std::size_t idx,
                                     const aug::CropStyle& crop, const aug::AugmentPolicy* policy,
                                     int epoch, std::uint64_t seed, bool training, Index out_h,
                                     Index out_w, Index out_c);

/// Scores every record of a split with one network (eval mode, no size
/// filter). Standalone so prediction does not need training data.
fusion::HeadScores predict_split(const Network& net, const aug::CropStyle& crop,
                                 const LoadedSplit& split);

}  // namespace hydra::train
