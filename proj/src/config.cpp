#include "hydra/config.hpp"

#include <set>

#include <json.hpp>

#include "hydra/io.hpp"

namespace hydra::config {

namespace {

using nlohmann::json;

aug::AugmentPolicy policy_for(const ExperimentConfig& cfg, const std::string& label) {
  aug::AugmentPolicy policy;
  if (label == "none") {
    // identity
  } else if (label == "flip") {
    policy.flip_h = true;
    policy.flip_v = true;
  } else if (label == "zoom") {
    policy.zoom_lo = cfg.zoom_lo;
    policy.zoom_hi = cfg.zoom_hi;
  } else if (label == "shift") {
    policy.shift_frac = cfg.shift_frac;
  } else {
    throw ConfigError("unknown augmentation: '" + label + "'");
  }
  policy.validate();
  return policy;
}

aug::CropStyle crop_for(const ExperimentConfig& cfg, aug::CropKind kind) {
  aug::CropStyle style;
  style.kind = kind;
  style.expansion_factor = cfg.crop_expansion;
  style.min_size = cfg.multi_min_size;
  return style;
}

json canonical_json(const ExperimentConfig& cfg) {
  json j;
  j["schema"] = 1;
  j["seed"] = cfg.seed;
  j["model"] = {
      {"input", {cfg.model.input_h, cfg.model.input_w, cfg.model.input_c}},
      {"fc", cfg.model.fc},
      {"dropout", cfg.model.dropout},
      {"residual",
       {{"stem_channels", cfg.model.res_stem_channels},
        {"stem_stride", cfg.model.res_stem_stride},
        {"blocks", cfg.model.res_blocks},
        {"kernel", cfg.model.res_kernel}}},
      {"dense",
       {{"stem_channels", cfg.model.dense_stem_channels},
        {"stem_stride", cfg.model.dense_stem_stride},
        {"blocks", cfg.model.dense_blocks},
        {"block_layers", cfg.model.dense_block_layers},
        {"growth", cfg.model.dense_growth},
        {"kernel", cfg.model.dense_kernel}}}};
  json schedule = json::array();
  for (const auto& [epochs, lr] : cfg.plan.head_lr_schedule) schedule.push_back({epochs, lr});
  j["plan"] = {{"body_epochs", cfg.plan.body_epochs},
               {"head_epochs", cfg.plan.head_epochs},
               {"body_lr", cfg.plan.body_lr},
               {"head_lr_schedule", schedule},
               {"batch_size", cfg.plan.batch_size}};
  j["augment"] = {{"zoom_range", {cfg.zoom_lo, cfg.zoom_hi}}, {"shift_frac", cfg.shift_frac}};
  j["crop"] = {{"expansion", cfg.crop_expansion}, {"multi_min_size", cfg.multi_min_size}};
  j["body"] = {{"crop", aug::crop_kind_name(cfg.body.crop.kind)}};
  j["weights"] = {{"fmow_table", cfg.fmow_table_path},
                  {"manual_multipliers", cfg.manual_multipliers_path}};
  j["heads"] = json::array();
  for (const train::HeadConfig& head : cfg.heads) {
    j["heads"].push_back({{"id", head.id},
                          {"cnn", train::arch_name(head.arch)},
                          {"crop", aug::crop_kind_name(head.crop.kind)},
                          {"augment", head.augment_label},
                          {"weighting", weighting::scheme_name(head.weighting.kind)},
                          {"seed", head.seed}});
  }
  return j;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& json_text,
                                             std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  ExperimentConfig cfg;
  try {
    if (j.contains("model")) {
      const json& jm = j["model"];
      if (jm.contains("input")) {
        const auto input = jm["input"].get<std::vector<Index>>();
        if (input.size() != 3) throw ConfigError("config: model.input must be [h, w, c]");
        cfg.model.input_h = input[0];
        cfg.model.input_w = input[1];
        cfg.model.input_c = input[2];
      }
      if (jm.contains("fc")) cfg.model.fc = jm["fc"].get<std::vector<Index>>();
      cfg.model.dropout = jm.value("dropout", cfg.model.dropout);
      if (jm.contains("residual")) {
        const json& jr = jm["residual"];
        cfg.model.res_stem_channels = jr.value("stem_channels", cfg.model.res_stem_channels);
        cfg.model.res_stem_stride = jr.value("stem_stride", cfg.model.res_stem_stride);
        cfg.model.res_blocks = jr.value("blocks", cfg.model.res_blocks);
        cfg.model.res_kernel = jr.value("kernel", cfg.model.res_kernel);
      }
      if (jm.contains("dense")) {
        const json& jd = jm["dense"];
        cfg.model.dense_stem_channels = jd.value("stem_channels", cfg.model.dense_stem_channels);
        cfg.model.dense_stem_stride = jd.value("stem_stride", cfg.model.dense_stem_stride);
        cfg.model.dense_blocks = jd.value("blocks", cfg.model.dense_blocks);
        cfg.model.dense_block_layers = jd.value("block_layers", cfg.model.dense_block_layers);
        cfg.model.dense_growth = jd.value("growth", cfg.model.dense_growth);
        cfg.model.dense_kernel = jd.value("kernel", cfg.model.dense_kernel);
      }
    }
    if (j.contains("plan")) {
      const json& jp = j["plan"];
      cfg.plan.body_epochs = jp.value("body_epochs", cfg.plan.body_epochs);
      cfg.plan.head_epochs = jp.value("head_epochs", cfg.plan.head_epochs);
      cfg.plan.body_lr = jp.value("body_lr", cfg.plan.body_lr);
      cfg.plan.batch_size = jp.value("batch_size", cfg.plan.batch_size);
      if (jp.contains("head_lr_schedule")) {
        cfg.plan.head_lr_schedule.clear();
        for (const auto& phase : jp["head_lr_schedule"]) {
          if (!phase.is_array() || phase.size() != 2)
            throw ConfigError("config: schedule phases must be [epochs, lr]");
          cfg.plan.head_lr_schedule.emplace_back(phase[0].get<int>(), phase[1].get<double>());
        }
      }
    }
    if (j.contains("augment")) {
      const json& ja = j["augment"];
      if (ja.contains("zoom_range")) {
        const auto range = ja["zoom_range"].get<std::vector<double>>();
        if (range.size() != 2) throw ConfigError("config: augment.zoom_range must be [lo, hi]");
        cfg.zoom_lo = range[0];
        cfg.zoom_hi = range[1];
      }
      cfg.shift_frac = ja.value("shift_frac", cfg.shift_frac);
    }
    if (j.contains("crop")) {
      cfg.crop_expansion = j["crop"].value("expansion", cfg.crop_expansion);
      cfg.multi_min_size = j["crop"].value("multi_min_size", cfg.multi_min_size);
    }
    if (j.contains("weights")) {
      cfg.fmow_table_path = j["weights"].value("fmow_table", std::string());
      cfg.manual_multipliers_path = j["weights"].value("manual_multipliers", std::string());
    }
    cfg.seed = j.value("seed", std::uint64_t{20180215});
    if (seed_override) cfg.seed = *seed_override;

    cfg.body.crop = crop_for(cfg, j.contains("body")
                                      ? aug::parse_crop_kind(j["body"].value("crop", "EXT-PAN"))
                                      : aug::CropKind::ExtPan);

    if (!j.contains("heads") || !j["heads"].is_array() || j["heads"].empty())
      throw ConfigError("config: 'heads' must be a nonempty array");
    std::set<int> ids;
    for (const json& jh : j["heads"]) {
      train::HeadConfig head;
      head.id = jh.at("id").get<int>();
      if (!ids.insert(head.id).second)
        throw ConfigError("config: duplicate head id " + std::to_string(head.id));
      head.arch = train::parse_arch(jh.at("cnn").get<std::string>());
      head.crop = crop_for(cfg, aug::parse_crop_kind(jh.at("crop").get<std::string>()));
      head.augment_label = jh.at("augment").get<std::string>();
      head.augment = policy_for(cfg, head.augment_label);
      head.weighting.kind = weighting::parse_scheme(jh.at("weighting").get<std::string>());
      head.seed = jh.value("seed", static_cast<std::uint64_t>(head.id));
      cfg.heads.push_back(std::move(head));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  cfg.plan.validate();
  if (cfg.model.input_c < 3) throw ConfigError("config: model input needs at least 3 channels");
  if (cfg.crop_expansion < 1.0) throw ConfigError("config: crop expansion must be >= 1");
  if (cfg.multi_min_size < 0) throw ConfigError("config: multi_min_size must be >= 0");

  cfg.canonical = canonical_json(cfg).dump(1) + "\n";
  cfg.hash = fnv1a(cfg.canonical);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed_override) {
  return experiment_config_from_json(io::read_file(path), seed_override);
}

void resolve_weight_tables(ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                           int class_count) {
  bool needs_fmow = false;
  bool needs_manual = false;
  for (const train::HeadConfig& head : cfg.heads) {
    needs_fmow |= head.weighting.kind == weighting::SchemeKind::FmowWeights;
    needs_manual |= head.weighting.kind == weighting::SchemeKind::FrequencyManual;
  }

  Eigen::VectorXd fmow_training;
  if (needs_fmow) {
    if (cfg.fmow_table_path.empty())
      throw ConfigError("config: a head uses fmow weighting but weights.fmow_table is not set");
    std::filesystem::path p = cfg.fmow_table_path;
    if (p.is_relative()) p = data_dir / p;
    const weighting::FmowWeightTable table = weighting::load_fmow_weight_table(p);
    if (table.raw.size() != class_count)
      throw ConfigError("config: fmow table lists " + std::to_string(table.raw.size()) +
                        " classes, dataset has " + std::to_string(class_count));
    fmow_training = table.training_view();
  }

  // The paper's manual adjustments are unpublished; without a table the
  // multipliers default to ones.
  Eigen::VectorXd multipliers = Eigen::VectorXd::Ones(class_count);
  if (needs_manual && !cfg.manual_multipliers_path.empty()) {
    std::filesystem::path p = cfg.manual_multipliers_path;
    if (p.is_relative()) p = data_dir / p;
    multipliers = weighting::load_multiplier_table(p);
    if (multipliers.size() != class_count)
      throw ConfigError("config: multiplier table lists " + std::to_string(multipliers.size()) +
                        " classes, dataset has " + std::to_string(class_count));
  }

  for (train::HeadConfig& head : cfg.heads) {
    if (head.weighting.kind == weighting::SchemeKind::FmowWeights)
      head.weighting.fmow_table = fmow_training;
    if (head.weighting.kind == weighting::SchemeKind::FrequencyManual)
      head.weighting.manual_multipliers = multipliers;
  }
}

}  // namespace hydra::config
