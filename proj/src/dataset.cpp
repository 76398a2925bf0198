#include "hydra/dataset.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "hydra/io.hpp"
#include "hydra/png_io.hpp"
#include "hydra/serialize.hpp"

namespace hydra::data {

const std::array<const char*, MetadataRecord::kFieldCount>& MetadataRecord::field_names() {
  static const std::array<const char*, kFieldCount> names = {
      "gsd", "sun_elevation", "month", "day_of_week", "box_w", "box_h", "image_w", "image_h"};
  return names;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Eval: return "eval";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "eval") return Split::Eval;
  if (s == "test") return Split::Test;
  throw DataError("unknown split: '" + s + "'");
}

namespace {

nlohmann::json metadata_to_json(const MetadataRecord& rec) {
  nlohmann::json j = nlohmann::json::object();
  const auto& names = MetadataRecord::field_names();
  for (int i = 0; i < MetadataRecord::kFieldCount; ++i) {
    if (rec.fields[static_cast<std::size_t>(i)] != MetadataRecord::kSentinel)
      j[names[static_cast<std::size_t>(i)]] = rec.fields[static_cast<std::size_t>(i)];
  }
  return j;
}

MetadataRecord metadata_from_json(const nlohmann::json& j, const std::string& where) {
  MetadataRecord rec;
  const auto& names = MetadataRecord::field_names();
  for (int i = 0; i < MetadataRecord::kFieldCount; ++i) {
    const char* name = names[static_cast<std::size_t>(i)];
    if (j.contains(name)) {
      if (!j[name].is_number()) throw DataError(where + ": metadata field " + name + " not numeric");
      rec.fields[static_cast<std::size_t>(i)] = j[name].get<double>();
    }
  }
  return rec;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const std::string where = path.string();
  if (!j.is_object() || !j.contains("schema") || j["schema"].get<int>() != 1)
    throw DataError(where + ": missing or unsupported schema field");
  Manifest m;
  m.base_dir = path.parent_path();
  if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].size() < 2)
    throw DataError(where + ": 'classes' must list at least two classes");
  for (const auto& c : j["classes"]) m.classes.push_back(c.get<std::string>());
  m.split = parse_split(j.value("split", std::string()));

  std::map<std::string, int> region_labels;
  std::set<std::string> record_keys;
  for (const auto& jr : j.value("records", nlohmann::json::array())) {
    Record rec;
    rec.region_id = jr.at("region_id").get<std::string>();
    rec.image_id = jr.at("image_id").get<std::string>();
    rec.path = jr.at("path").get<std::string>();
    rec.path_multi = jr.value("path_multi", std::string());
    const auto& box = jr.at("box");
    if (!box.is_array() || box.size() != 4) throw DataError(where + ": box must be [x,y,w,h]");
    rec.box = Box{box[0].get<Index>(), box[1].get<Index>(), box[2].get<Index>(),
                  box[3].get<Index>()};
    if (rec.box.w <= 0 || rec.box.h <= 0)
      throw DataError(where + ": degenerate box for region " + rec.region_id);
    rec.label = jr.at("label").get<int>();
    if (rec.label < 0 || rec.label >= m.class_count())
      throw DataError(where + ": label out of range for region " + rec.region_id);
    rec.metadata = metadata_from_json(jr.value("metadata", nlohmann::json::object()), where);

    if (m.split == Split::Train && rec.label == m.false_detection_label())
      throw DataError(where + ": train split contains a false detection (region " +
                      rec.region_id + ")");
    auto [it, inserted] = region_labels.emplace(rec.region_id, rec.label);
    if (!inserted && it->second != rec.label)
      throw DataError(where + ": conflicting labels across images of region " + rec.region_id);
    if (!record_keys.insert(rec.region_id + "\x1f" + rec.image_id).second)
      throw DataError(where + ": duplicate (region, image) pair " + rec.region_id + "/" +
                      rec.image_id);
    m.records.push_back(std::move(rec));
  }
  return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["schema"] = 1;
  j["classes"] = manifest.classes;
  j["split"] = split_name(manifest.split);
  j["records"] = nlohmann::json::array();
  for (const Record& rec : manifest.records) {
    nlohmann::json jr;
    jr["region_id"] = rec.region_id;
    jr["image_id"] = rec.image_id;
    jr["path"] = rec.path;
    if (!rec.path_multi.empty()) jr["path_multi"] = rec.path_multi;
    jr["box"] = {rec.box.x, rec.box.y, rec.box.w, rec.box.h};
    jr["label"] = rec.label;
    jr["metadata"] = metadata_to_json(rec.metadata);
    j["records"].push_back(jr);
  }
  io::write_file_atomic(path, j.dump(1) + "\n");
}

Eigen::VectorXd metadata_means(const Manifest& manifest) {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(MetadataRecord::kFieldCount);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(MetadataRecord::kFieldCount);
  for (const Record& rec : manifest.records) {
    for (int i = 0; i < MetadataRecord::kFieldCount; ++i) {
      const double v = rec.metadata.fields[static_cast<std::size_t>(i)];
      if (v != MetadataRecord::kSentinel) {
        sums[i] += v;
        counts[i] += 1.0;
      }
    }
  }
  for (int i = 0; i < MetadataRecord::kFieldCount; ++i)
    if (counts[i] > 0.0) sums[i] /= counts[i];
  return sums;
}

Tensor metadata_vector(const MetadataRecord& rec, const Eigen::VectorXd& train_means) {
  if (train_means.size() != MetadataRecord::kFieldCount)
    throw ContractError("metadata_vector: means width mismatch");
  Tensor v({MetadataRecord::kFieldCount});
  for (int i = 0; i < MetadataRecord::kFieldCount; ++i) {
    const double raw = rec.fields[static_cast<std::size_t>(i)];
    const double value = raw == MetadataRecord::kSentinel ? train_means[i] : raw;
    v[i] = static_cast<Real>(value - train_means[i]);
  }
  return v;
}

std::map<std::string, std::vector<std::string>> group_by_region(const Manifest& manifest) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const Record& rec : manifest.records) groups[rec.region_id].push_back(rec.image_id);
  for (auto& [region, images] : groups) std::sort(images.begin(), images.end());
  return groups;
}

std::vector<long> class_counts(const Manifest& manifest) {
  std::vector<long> counts(static_cast<std::size_t>(manifest.class_count()), 0);
  for (const Record& rec : manifest.records) counts[static_cast<std::size_t>(rec.label)] += 1;
  return counts;
}

Tensor load_pan_pixels(const Manifest& manifest, const Record& rec) {
  return img::png_to_tensor(img::read_png(manifest.base_dir / rec.path));
}

std::optional<MultiImage> load_multi_pixels(const Manifest& manifest, const Record& rec,
                                            Index pan_h) {
  if (rec.path_multi.empty()) return std::nullopt;
  MultiImage multi;
  multi.pixels = serialize::load_tensor_file(manifest.base_dir / rec.path_multi);
  if (multi.pixels.rank() != 3)
    throw DataError(rec.path_multi + ": multi-spectral tensor must be rank 3");
  // The multi analog renders the same scene at lower resolution; map the
  // pan-space box into its coordinates.
  const Index scale = std::max<Index>(
      1, static_cast<Index>(std::llround(static_cast<double>(pan_h) /
                                         static_cast<double>(multi.pixels.dim(0)))));
  multi.box = Box{rec.box.x / scale, rec.box.y / scale,
                  std::max<Index>(1, rec.box.w / scale), std::max<Index>(1, rec.box.h / scale)};
  return multi;
}

}  // namespace hydra::data
