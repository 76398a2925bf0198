#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hydra/tensor.hpp"

namespace hydra::data {

using Index = Eigen::Index;

/// Annotation box in pixel coordinates of its image.
struct Box {
  Index x = 0;
  Index y = 0;
  Index w = 0;
  Index h = 0;
};

/// Fixed 8-field numeric metadata attached to every record. Missing fields
/// carry kSentinel and are mean-imputed when vectorized.
struct MetadataRecord {
  static constexpr int kFieldCount = 8;
  static constexpr double kSentinel = -9999.0;
  static const std::array<const char*, kFieldCount>& field_names();

  std::array<double, kFieldCount> fields{};

  MetadataRecord() { fields.fill(kSentinel); }
};

/// One annotated box in one image, as stored in a manifest.
struct Record {
  std::string region_id;
  std::string image_id;
  std::string path;        // pan-sharpened analog (PNG)
  std::string path_multi;  // multi-spectral analog (raw tensor file), may be empty
  Box box;
  int label = 0;
  MetadataRecord metadata;
};

enum class Split { Train, Eval, Test };

std::string split_name(Split s);
Split parse_split(const std::string& s);

struct Manifest {
  std::vector<std::string> classes;  // last entry is the false-detection class
  Split split = Split::Train;
  std::vector<Record> records;
  std::filesystem::path base_dir;  // directory record paths are relative to

  int class_count() const { return static_cast<int>(classes.size()); }
  int false_detection_label() const { return class_count() - 1; }
};

/// A record together with its decoded pixels.
struct RegionSample {
  std::string region_id;
  std::string image_id;
  Tensor pixels;  // H x W x C
  Box box;
  int label = 0;
  MetadataRecord metadata;
};

/// Parses and validates a manifest JSON file. Train manifests must not
/// contain false detections; all images of a region must agree on the label.
Manifest load_manifest(const std::filesystem::path& path);

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Train-split field means, skipping sentinel (missing) values.
Eigen::VectorXd metadata_means(const Manifest& manifest);

/// Fixed-width vector: each field minus its train mean, missing fields
/// imputed with the mean (so they contribute zero).
Tensor metadata_vector(const MetadataRecord& rec, const Eigen::VectorXd& train_means);

/// region_id -> image ids, images sorted by image_id.
std::map<std::string, std::vector<std::string>> group_by_region(const Manifest& manifest);

/// Per-class record counts (length = class count).
std::vector<long> class_counts(const Manifest& manifest);

/// Decodes a record's pan image (PNG) as an H x W x 3 tensor in [0, 1].
Tensor load_pan_pixels(const Manifest& manifest, const Record& rec);

/// Decodes a record's multi-spectral analog (raw tensor file, C > 3) along
/// with the box mapped into its coordinate space.
struct MultiImage {
  Tensor pixels;
  Box box;
};
std::optional<MultiImage> load_multi_pixels(const Manifest& manifest, const Record& rec,
                                            Index pan_h);

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

/// Recipe for the desk-scale synthetic dataset.
struct GenSpec {
  int classes = 8;                     // real classes; false detection is added on top
  Index image_size = 48;               // square pan images
  Index multi_downscale = 2;           // multi analog resolution divisor
  Index multi_channels = 4;
  long train_regions = 200;
  long eval_regions = 100;
  long test_regions = 0;
  double eval_false_detection_frac = 0.0;
  double test_false_detection_frac = 0.1;
  std::vector<double> multiplicity = {0.7, 0.2, 0.07, 0.03};  // P(region in k+1 images)
  double noise = 0.2;                  // nuisance strength in [0, 1]
  std::vector<long> class_balance;     // optional explicit per-class train counts
};

GenSpec gen_spec_from_json(const std::string& json_text);

struct GeneratedDataset {
  Manifest train;
  Manifest eval;
  Manifest test;
};

/// Writes images plus train/eval/test manifests under out_dir. Deterministic
/// per seed. Also emits per-split truth CSVs and a challenge weights CSV.
GeneratedDataset generate_synthetic(const GenSpec& spec, std::uint64_t seed,
                                    const std::filesystem::path& out_dir);

}  // namespace hydra::data
