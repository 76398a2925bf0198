#include "hydra/trainer.hpp"

#include <algorithm>
#include <set>

namespace hydra::train {

std::string arch_name(Arch a) { return a == Arch::Residual ? "residual" : "dense"; }

Arch parse_arch(const std::string& name) {
  if (name == "residual" || name == "resnet") return Arch::Residual;
  if (name == "dense" || name == "densenet") return Arch::Dense;
  throw ConfigError("unknown architecture: '" + name + "'");
}

std::vector<LayerSpec> make_architecture(Arch arch, const ModelConfig& cfg, Index class_count) {
  std::vector<LayerSpec> specs;
  if (arch == Arch::Residual) {
    specs.push_back(LayerSpec::conv2d(cfg.res_stem_channels, 3, cfg.res_stem_stride));
    specs.push_back(LayerSpec::relu());
    for (Index b = 0; b < cfg.res_blocks; ++b)
      specs.push_back(LayerSpec::residual_block(cfg.res_kernel));
  } else {
    specs.push_back(LayerSpec::conv2d(cfg.dense_stem_channels, 3, cfg.dense_stem_stride));
    specs.push_back(LayerSpec::relu());
    for (Index b = 0; b < cfg.dense_blocks; ++b)
      specs.push_back(
          LayerSpec::dense_block(cfg.dense_block_layers, cfg.dense_growth, cfg.dense_kernel));
  }
  specs.push_back(LayerSpec::flatten());
  for (Index width : cfg.fc) {
    specs.push_back(LayerSpec::dense(width));
    specs.push_back(LayerSpec::relu());
    if (cfg.dropout > 0.0) specs.push_back(LayerSpec::dropout(cfg.dropout));
  }
  specs.push_back(LayerSpec::dense(class_count));
  return specs;
}

void TrainPlan::validate() const {
  if (body_epochs < 0 || head_epochs < 0) throw ConfigError("plan: negative epoch counts");
  if (body_lr <= 0.0) throw ConfigError("plan: body_lr must be positive");
  if (batch_size < 1) throw ConfigError("plan: batch_size must be >= 1");
  int total = 0;
  for (const auto& [epochs, lr] : head_lr_schedule) {
    if (epochs < 0) throw ConfigError("plan: negative schedule phase");
    if (lr <= 0.0) throw ConfigError("plan: schedule learning rates must be positive");
    total += epochs;
  }
  if (total != head_epochs)
    throw ConfigError("plan: head schedule epochs sum to " + std::to_string(total) + ", expected " +
                      std::to_string(head_epochs));
}

double lr_at(const TrainPlan& plan, int head_epoch_index) {
  if (head_epoch_index < 0 || head_epoch_index >= plan.head_epochs)
    throw ContractError("lr_at: epoch index out of range");
  int remaining = head_epoch_index;
  for (const auto& [epochs, lr] : plan.head_lr_schedule) {
    if (remaining < epochs) return lr;
    remaining -= epochs;
  }
  throw ContractError("lr_at: schedule does not cover epoch " + std::to_string(head_epoch_index));
}

CostReport cost_report(const TrainPlan& plan, const std::vector<HeadConfig>& roster) {
  std::set<Arch> archs;
  for (const HeadConfig& head : roster) archs.insert(head.arch);
  CostReport report;
  const long a = static_cast<long>(archs.size());
  const long h = static_cast<long>(roster.size());
  report.hydra_epochs = a * plan.body_epochs + h * plan.head_epochs;
  report.independent_epochs = h * (plan.body_epochs + plan.head_epochs);
  report.ratio = report.hydra_epochs > 0 ? static_cast<double>(report.independent_epochs) /
                                               static_cast<double>(report.hydra_epochs)
                                         : 1.0;
  return report;
}

std::string log_csv(const std::vector<LogRow>& rows) {
  std::string out = "epoch,split,loss,accuracy,lr\n";
  for (const LogRow& r : rows) {
    out += std::to_string(r.epoch) + "," + r.split + "," + format_real(r.loss) + "," +
           format_real(r.accuracy) + "," + format_real(r.lr) + "\n";
  }
  return out;
}

namespace {

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out[i].reserve(params[i].size());
    for (const Tensor& p : params[i]) out[i].emplace_back(p.shape());
  }
  return out;
}

void accumulate(ParamSet& dst, const ParamSet& src) {
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t p = 0; p < dst[i].size(); ++p) dst[i][p].data() += src[i][p].data();
}

void scale(ParamSet& set, Real factor) {
  for (auto& layer : set)
    for (Tensor& p : layer) p.data() *= factor;
}

Index argmax(const VectorT<Real>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

constexpr std::uint64_t kShuffleTag = 0x5f1eULL;

}  // namespace

Trainer::Trainer(ModelConfig model, TrainPlan plan, BodyConfig body,
                 const data::Manifest& train_manifest, const data::Manifest* eval_manifest,
                 std::uint64_t seed)
    : model_(std::move(model)), plan_(std::move(plan)), body_(body), seed_(seed) {
  plan_.validate();
  if (train_manifest.records.empty()) throw DataError("trainer: train manifest is empty");
  class_count_ = train_manifest.class_count();
  means_ = data::metadata_means(train_manifest);
  train_ = load_split(train_manifest, means_);
  if (eval_manifest) {
    if (eval_manifest->class_count() != class_count_)
      throw DataError("trainer: eval manifest class count differs from train");
    eval_ = load_split(*eval_manifest, means_);
    has_eval_ = true;
  }
}

LoadedSplit Trainer::load_split(const data::Manifest& manifest, const Eigen::VectorXd& means) {
  LoadedSplit split;
  split.manifest = &manifest;
  split.pan.reserve(manifest.records.size());
  split.multi.reserve(manifest.records.size());
  split.metadata.reserve(manifest.records.size());
  std::map<std::string, std::vector<std::size_t>> regions;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const data::Record& rec = manifest.records[i];
    Tensor pan = data::load_pan_pixels(manifest, rec);
    split.multi.push_back(data::load_multi_pixels(manifest, rec, pan.dim(0)));
    split.pan.push_back(std::move(pan));
    split.metadata.push_back(data::metadata_vector(rec.metadata, means));
    regions[rec.region_id].push_back(i);
  }
  for (auto& [region_id, indices] : regions) {
    std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
      return manifest.records[a].image_id < manifest.records[b].image_id;
    });
    split.regions.emplace_back(region_id, std::move(indices));
  }
  return split;
}

std::optional<Tensor> prepare_pixels(const LoadedSplit& split, std::size_t idx,
                                     const aug::CropStyle& crop, const aug::AugmentPolicy* policy,
                                     int epoch, std::uint64_t seed, bool training, Index out_h,
                                     Index out_w, Index out_c) {
  const data::Record& rec = split.manifest->records[idx];
  const Tensor* image = &split.pan[idx];
  data::Box box = rec.box;
  if (crop.kind == aug::CropKind::ExtMulti) {
    if (!split.multi[idx])
      throw DataError("record " + rec.image_id + " has no multi-spectral analog");
    image = &split.multi[idx]->pixels;
    box = split.multi[idx]->box;
  }
  aug::CropStyle style = crop;
  if (!training) style.min_size = 0;  // the size filter screens training samples only
  auto cropped = aug::crop_region(*image, box, style);
  if (!cropped) return std::nullopt;

  Tensor pixels = std::move(*cropped);
  if (training && policy) {
    data::RegionSample sample;
    sample.region_id = rec.region_id;
    sample.image_id = rec.image_id;
    sample.pixels = std::move(pixels);
    sample.box = rec.box;
    sample.label = rec.label;
    sample.metadata = rec.metadata;
    sample = aug::augment_sample(sample, *policy, epoch, seed, out_h, out_w);
    pixels = std::move(sample.pixels);
  } else {
    pixels = aug::resize_bilinear(pixels, out_h, out_w);
  }
  return aug::fit_channels(pixels, out_c);
}

fusion::HeadScores predict_split(const Network& net, const aug::CropStyle& crop,
                                 const LoadedSplit& split) {
  fusion::HeadScores scores;
  scores.reserve(split.manifest->records.size());
  for (std::size_t i = 0; i < split.manifest->records.size(); ++i) {
    const data::Record& rec = split.manifest->records[i];
    auto pixels = prepare_pixels(split, i, crop, nullptr, 0, 0, false, net.input_shape[0],
                                 net.input_shape[1], net.input_shape[2]);
    VectorT<Real> raw = forward(net, *pixels, split.metadata[i], false, 0);
    fusion::ImageScore row;
    row.region_id = rec.region_id;
    row.image_id = rec.image_id;
    row.scores = raw.cast<double>();
    scores.push_back(std::move(row));
  }
  return scores;
}

std::optional<Tensor> Trainer::prepare_pixels(const LoadedSplit& split, std::size_t idx,
                                              const aug::CropStyle& crop,
                                              const aug::AugmentPolicy* policy, int epoch,
                                              std::uint64_t seed, bool training) const {
  return train::prepare_pixels(split, idx, crop, policy, epoch, seed, training, model_.input_h,
                               model_.input_w, model_.input_c);
}

void Trainer::run_training(const Job& job, int epochs, const std::vector<double>& epoch_lrs,
                           std::vector<LogRow>& log) const {
  Network& net = *job.net;
  VectorT<Real> weights = job.class_weights->cast<Real>();

  // The multi-spectral minimum-size filter fixes each head's training set
  // up front; crop geometry does not change across epochs.
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_.manifest->records.size(); ++i) {
    if (job.crop->kind == aug::CropKind::ExtMulti) {
      aug::CropStyle style = *job.crop;
      const auto& multi = train_.multi[i];
      if (!multi) throw DataError(job.name + ": missing multi-spectral analog");
      if (!aug::crop_region(multi->pixels, multi->box, style)) continue;
    }
    usable.push_back(i);
  }
  if (usable.empty()) throw DataError(job.name + ": minimum-size filter rejected every sample");

  AdamState state = AdamState::like(net.params);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = epoch_lrs[static_cast<std::size_t>(epoch)];
    try {
      std::vector<std::size_t> order = usable;
      Rng shuffle_rng(mix_seed({job.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)}));
      shuffle_rng.shuffle(order);

      double loss_sum = 0.0;
      long correct = 0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(plan_.batch_size)) {
        const std::size_t end =
            std::min(order.size(), start + static_cast<std::size_t>(plan_.batch_size));
        ParamSet grads = zeros_like(net.params);
        for (std::size_t k = start; k < end; ++k) {
          const std::size_t idx = order[k];
          const data::Record& rec = train_.manifest->records[idx];
          auto pixels = prepare_pixels(train_, idx, *job.crop, job.policy, epoch, job.seed, true);
          const std::uint64_t dropout_seed = mix_seed({job.seed, 0xd40ULL,
                                                       static_cast<std::uint64_t>(epoch),
                                                       fnv1a(rec.region_id), fnv1a(rec.image_id)});
          auto result = backward(net, *pixels, train_.metadata[idx],
                                 static_cast<Index>(rec.label), weights, true, dropout_seed);
          loss_sum += static_cast<double>(result.loss);
          if (argmax(result.scores) == rec.label) ++correct;
          accumulate(grads, result.grads);
        }
        scale(grads, Real(1) / static_cast<Real>(end - start));
        adam_step(net.params, grads, state, lr);
      }

      LogRow row;
      row.epoch = epoch;
      row.split = "train";
      row.loss = loss_sum / static_cast<double>(order.size());
      row.accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
      row.lr = lr;
      log.push_back(row);
      if (!std::isfinite(row.loss)) throw DivergenceError("non-finite training loss");

      if (has_eval_) {
        LogRow eval_row = evaluate(net, *job.crop, *job.class_weights, epoch);
        eval_row.lr = lr;
        log.push_back(eval_row);
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError(job.name + " diverged at epoch " + std::to_string(epoch) + ": " +
                            e.what());
    }
  }
}

LogRow Trainer::evaluate(const Network& net, const aug::CropStyle& crop,
                         const Eigen::VectorXd& class_weights, int epoch) const {
  VectorT<Real> weights = class_weights.cast<Real>();
  double loss_sum = 0.0;
  long image_count = 0;
  long correct_regions = 0;
  for (const auto& [region_id, indices] : eval_.regions) {
    VectorT<Real> sum = VectorT<Real>::Zero(class_count_);
    int label = eval_.manifest->records[indices[0]].label;
    for (std::size_t idx : indices) {
      auto pixels = prepare_pixels(eval_, idx, crop, nullptr, epoch, 0, false);
      VectorT<Real> scores = forward(net, *pixels, eval_.metadata[idx], false, 0);
      loss_sum += static_cast<double>(
          softmax_cross_entropy(scores, static_cast<Index>(label), weights[label]));
      ++image_count;
      sum += scores;
    }
    if (argmax(sum) == label) ++correct_regions;
  }
  LogRow row;
  row.epoch = epoch;
  row.split = "eval";
  row.loss = image_count > 0 ? loss_sum / static_cast<double>(image_count) : 0.0;
  row.accuracy = eval_.regions.empty()
                     ? 0.0
                     : static_cast<double>(correct_regions) / static_cast<double>(eval_.regions.size());
  return row;
}

TrainResult Trainer::train_body(Arch arch) const {
  TrainResult result;
  result.net = build_network<Real>(make_architecture(arch, model_, class_count_),
                                   {model_.input_h, model_.input_w, model_.input_c},
                                   data::MetadataRecord::kFieldCount, class_count_,
                                   mix_seed({seed_, 0xb0d7ULL, static_cast<std::uint64_t>(arch)}));
  result.net.metadata_means = means_.cast<Real>();

  aug::AugmentPolicy flip_only;
  flip_only.flip_h = true;
  flip_only.flip_v = true;
  Eigen::VectorXd unweighted = Eigen::VectorXd::Ones(class_count_);

  Job job;
  job.net = &result.net;
  job.crop = &body_.crop;
  job.policy = &flip_only;
  job.class_weights = &unweighted;
  job.seed = mix_seed({seed_, 0xb0d7ULL, static_cast<std::uint64_t>(arch), 1});
  job.name = arch_name(arch) + "-body";

  std::vector<double> lrs(static_cast<std::size_t>(plan_.body_epochs), plan_.body_lr);
  run_training(job, plan_.body_epochs, lrs, result.log);
  return result;
}

TrainResult Trainer::train_head(const Network& body, const HeadConfig& head) const {
  TrainResult result;
  result.net = body;  // exact fork of the body weights

  std::vector<long> counts = data::class_counts(*train_.manifest);
  Eigen::VectorXd weights = weighting::training_weights(head.weighting, counts, class_count_);

  Job job;
  job.net = &result.net;
  job.crop = &head.crop;
  job.policy = &head.augment;
  job.class_weights = &weights;
  job.seed = mix_seed({seed_, 0x4eadULL, static_cast<std::uint64_t>(head.id), head.seed});
  job.name = "head-" + std::to_string(head.id);

  std::vector<double> lrs;
  lrs.reserve(static_cast<std::size_t>(plan_.head_epochs));
  for (int e = 0; e < plan_.head_epochs; ++e) lrs.push_back(lr_at(plan_, e));
  run_training(job, plan_.head_epochs, lrs, result.log);
  return result;
}

fusion::HeadScores Trainer::predict(const Network& net, const aug::CropStyle& crop,
                                    const LoadedSplit& split) const {
  return predict_split(net, crop, split);
}

std::vector<Network> spawn_heads(const std::map<Arch, Network>& bodies,
                                 const std::vector<HeadConfig>& roster) {
  std::vector<Network> nets;
  nets.reserve(roster.size());
  for (const HeadConfig& head : roster) {
    auto it = bodies.find(head.arch);
    if (it == bodies.end())
      throw ContractError("spawn_heads: no body for architecture " + arch_name(head.arch));
    nets.push_back(it->second);
  }
  return nets;
}

}  // namespace hydra::train
