#include <json.hpp>

#include "hydra/dataset.hpp"
#include "hydra/io.hpp"
#include "hydra/png_io.hpp"
#include "hydra/serialize.hpp"

namespace hydra::data {

namespace {

// Class appearance: a palette color shared between classes plus a motif, so
// neither cue alone separates all classes. Both survive brightness changes.
constexpr int kPaletteSize = 4;
constexpr double kPalette[kPaletteSize][3] = {
    {0.95, 0.20, 0.20},  // red
    {0.20, 0.90, 0.25},  // green
    {0.25, 0.40, 0.95},  // blue
    {0.95, 0.85, 0.20},  // yellow
};

int palette_index(int label) { return label % kPaletteSize; }
int motif_index(int label) { return (label % 4 + label / 4) % 4; }

double nir_level(int label, int classes) {
  const double t = std::fmod(static_cast<double>(label + 1) * 0.381966, 1.0);
  (void)classes;
  return 0.30 + 0.65 * t;
}

// Region-level pattern state shared by all images of one region.
struct RegionAppearance {
  int label = 0;
  bool false_detection = false;
  double phase_u = 0.0;
  double phase_v = 0.0;
  double radius_scale = 1.0;
  double clutter[2][4] = {};  // false-detection rectangles (u, v, w, h)
};

// Per-image nuisance state.
struct ImageNuisance {
  double theta = 0.0;
  double brightness = 1.0;
  double hue[3] = {1.0, 1.0, 1.0};
  bool occluded = false;
  double occ[4] = {};  // (u, v, w, h) in box coordinates
  double bg_phase_x = 0.0;
  double bg_phase_y = 0.0;
};

RegionAppearance draw_region_appearance(int label, bool fd, Rng& rng) {
  RegionAppearance a;
  a.label = label;
  a.false_detection = fd;
  a.phase_u = rng.uniform();
  a.phase_v = rng.uniform();
  a.radius_scale = rng.uniform(0.9, 1.1);
  for (auto& rect : a.clutter) {
    rect[0] = rng.uniform(0.05, 0.6);
    rect[1] = rng.uniform(0.05, 0.6);
    rect[2] = rng.uniform(0.1, 0.3);
    rect[3] = rng.uniform(0.1, 0.3);
  }
  return a;
}

ImageNuisance draw_nuisance(double noise, Rng& rng) {
  ImageNuisance n;
  if (noise > 0.0) {
    n.theta = 0.5 * M_PI * static_cast<double>(rng.uniform_int(4)) +
              2.5 * noise * rng.uniform(-1.0, 1.0);
    n.brightness = 1.0 + rng.uniform(-1.6, 1.1) * noise;
    for (double& h : n.hue) h = 1.0 + 0.9 * noise * rng.uniform(-1.0, 1.0);
    n.occluded = rng.uniform() < std::min(0.9, 3.5 * noise);
    if (n.occluded) {
      n.occ[2] = rng.uniform(0.8, 2.6) * noise;
      n.occ[3] = rng.uniform(0.8, 2.6) * noise;
      n.occ[0] = rng.uniform(0.0, std::max(0.0, 1.0 - n.occ[2]));
      n.occ[1] = rng.uniform(0.0, std::max(0.0, 1.0 - n.occ[3]));
    }
  }
  n.bg_phase_x = rng.uniform(0.0, 2.0 * M_PI);
  n.bg_phase_y = rng.uniform(0.0, 2.0 * M_PI);
  return n;
}

// Motif membership at box-normalized coordinates (u, v) in [0, 1]^2.
double motif_coverage(const RegionAppearance& a, const ImageNuisance& n, double u, double v) {
  if (a.false_detection) {
    for (const auto& rect : a.clutter)
      if (u >= rect[0] && u < rect[0] + rect[2] && v >= rect[1] && v < rect[1] + rect[3])
        return -1.0;  // neutral clutter, not a class pattern
    return 0.0;
  }
  if (n.occluded && u >= n.occ[0] && u < n.occ[0] + n.occ[2] && v >= n.occ[1] &&
      v < n.occ[1] + n.occ[3])
    return 0.0;

  // Rotate about the box center.
  const double cu = u - 0.5, cv = v - 0.5;
  const double ct = std::cos(n.theta), st = std::sin(n.theta);
  const double ru = cu * ct - cv * st + 0.5;
  const double rv = cu * st + cv * ct + 0.5;

  switch (motif_index(a.label)) {
    case 0: {  // disk
      const double r = std::hypot(ru - 0.5, rv - 0.5);
      return r <= 0.36 * a.radius_scale ? 1.0 : 0.0;
    }
    case 1: {  // ring
      const double r = std::hypot(ru - 0.5, rv - 0.5);
      return (r >= 0.20 * a.radius_scale && r <= 0.38 * a.radius_scale) ? 1.0 : 0.0;
    }
    case 2: {  // stripes
      const double s = std::fmod(std::abs(ru * 3.0 + a.phase_u), 1.0);
      return s < 0.5 ? 1.0 : 0.0;
    }
    default: {  // checkerboard
      const auto iu = static_cast<long>(std::floor((ru + a.phase_u) * 3.0));
      const auto iv = static_cast<long>(std::floor((rv + a.phase_v) * 3.0));
      return ((iu + iv) & 1) == 0 ? 1.0 : 0.0;
    }
  }
}

// Scene color at pan-space pixel coordinates. `channels` is 3 (pan) or 4+
// (multi, last channel NIR-like). Additive sensor noise is drawn by the
// caller so pan and multi renderings stay independent.
void scene_color(const RegionAppearance& a, const ImageNuisance& n, const Box& box, double x,
                 double y, int classes, double* out, int channels) {
  const double bg_base = 0.24 + 0.05 * std::sin(0.5 * x + n.bg_phase_x) *
                                    std::sin(0.37 * y + n.bg_phase_y);
  double rgb[3] = {bg_base, bg_base * 0.93, bg_base * 0.85};
  double nir = 0.28 + 0.4 * bg_base;

  const double u = (x - static_cast<double>(box.x)) / static_cast<double>(box.w);
  const double v = (y - static_cast<double>(box.y)) / static_cast<double>(box.h);
  if (u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0) {
    const double s = motif_coverage(a, n, u, v);
    if (s > 0.0) {
      const double* color = kPalette[palette_index(a.label)];
      for (int c = 0; c < 3; ++c) rgb[c] = (1.0 - 0.9 * s) * rgb[c] + 0.9 * s * color[c] * n.hue[c];
      nir = nir_level(a.label, classes);
    } else if (s < 0.0) {
      for (double& c : rgb) c = 0.55;  // gray clutter
      nir = 0.5;
    }
  }
  for (int c = 0; c < 3; ++c) out[c] = std::clamp(rgb[c] * n.brightness, 0.0, 1.0);
  for (int c = 3; c < channels; ++c) out[c] = std::clamp(nir * n.brightness, 0.0, 1.0);
}

struct RegionPlan {
  std::string region_id;
  int label = 0;
  bool false_detection = false;
  int image_count = 1;
  std::uint64_t seed = 0;
};

int draw_multiplicity(const std::vector<double>& probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    u -= probs[i];
    if (u < 0.0) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(probs.size());
}

}  // namespace

GenSpec gen_spec_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generation spec: ") + e.what());
  }
  GenSpec spec;
  spec.classes = j.value("classes", spec.classes);
  spec.image_size = j.value("image_size", spec.image_size);
  spec.multi_downscale = j.value("multi_downscale", spec.multi_downscale);
  spec.multi_channels = j.value("multi_channels", spec.multi_channels);
  spec.train_regions = j.value("train_regions", spec.train_regions);
  spec.eval_regions = j.value("eval_regions", spec.eval_regions);
  spec.test_regions = j.value("test_regions", spec.test_regions);
  spec.eval_false_detection_frac =
      j.value("eval_false_detection_frac", spec.eval_false_detection_frac);
  spec.test_false_detection_frac =
      j.value("test_false_detection_frac", spec.test_false_detection_frac);
  if (j.contains("multiplicity")) spec.multiplicity = j["multiplicity"].get<std::vector<double>>();
  spec.noise = j.value("noise", spec.noise);
  if (j.contains("class_balance")) spec.class_balance = j["class_balance"].get<std::vector<long>>();
  return spec;
}

GeneratedDataset generate_synthetic(const GenSpec& spec, std::uint64_t seed,
                                    const std::filesystem::path& out_dir) {
  if (spec.classes < 1) throw ConfigError("generate_synthetic: need at least one class");
  if (spec.image_size < 16) throw ConfigError("generate_synthetic: image_size must be >= 16");
  if (spec.multi_downscale < 1 || spec.multi_downscale > spec.image_size / 4)
    throw ConfigError("generate_synthetic: invalid multi_downscale");
  if (spec.multi_channels < 4) throw ConfigError("generate_synthetic: multi_channels must be >= 4");
  if (spec.multiplicity.empty()) throw ConfigError("generate_synthetic: empty multiplicity");
  for (double p : spec.multiplicity)
    if (p < 0.0) throw ConfigError("generate_synthetic: negative multiplicity weight");
  if (spec.noise < 0.0 || spec.noise > 1.0)
    throw ConfigError("generate_synthetic: noise must be in [0, 1]");
  if (spec.eval_false_detection_frac < 0.0 || spec.eval_false_detection_frac > 1.0 ||
      spec.test_false_detection_frac < 0.0 || spec.test_false_detection_frac > 1.0)
    throw ConfigError("generate_synthetic: false-detection fractions must be in [0, 1]");
  if (!spec.class_balance.empty() &&
      spec.class_balance.size() != static_cast<std::size_t>(spec.classes))
    throw ConfigError("generate_synthetic: class_balance length != classes");
  if (spec.train_regions < 0 || spec.eval_regions < 0 || spec.test_regions < 0)
    throw ConfigError("generate_synthetic: negative region counts");

  std::filesystem::create_directories(out_dir / "images");

  std::vector<std::string> class_names;
  for (int c = 0; c < spec.classes; ++c) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "class_%02d", c);
    class_names.emplace_back(buf);
  }
  class_names.emplace_back("false_detection");
  const int fd_label = spec.classes;

  long region_counter = 0;
  long image_counter = 0;

  // Plan one split deterministically, then render its regions.
  auto plan_split = [&](Split split, long regions, double fd_frac,
                        std::uint64_t split_seed) -> std::vector<RegionPlan> {
    std::vector<RegionPlan> plans;
    Rng rng(split_seed);
    const long fd_count =
        split == Split::Train ? 0 : static_cast<long>(std::llround(fd_frac * static_cast<double>(regions)));
    for (long i = 0; i < regions; ++i) {
      RegionPlan plan;
      char buf[24];
      std::snprintf(buf, sizeof(buf), "R%05ld", region_counter++);
      plan.region_id = buf;
      plan.false_detection = i < fd_count;
      if (plan.false_detection) {
        plan.label = fd_label;
      } else if (!spec.class_balance.empty() && split == Split::Train) {
        // Explicit per-class counts: walk the table.
        long cursor = i - fd_count;
        plan.label = spec.classes - 1;
        for (int c = 0; c < spec.classes; ++c) {
          if (cursor < spec.class_balance[static_cast<std::size_t>(c)]) {
            plan.label = c;
            break;
          }
          cursor -= spec.class_balance[static_cast<std::size_t>(c)];
        }
      } else {
        plan.label = static_cast<int>((i - fd_count) % spec.classes);
      }
      plan.image_count = draw_multiplicity(spec.multiplicity, rng);
      plan.seed = mix_seed({seed, fnv1a(plan.region_id)});
      plans.push_back(std::move(plan));
    }
    return plans;
  };

  auto render_split = [&](Split split, const std::vector<RegionPlan>& plans) -> Manifest {
    Manifest manifest;
    manifest.classes = class_names;
    manifest.split = split;
    manifest.base_dir = out_dir;
    const Index size = spec.image_size;
    const Index multi_size = size / spec.multi_downscale;

    for (const RegionPlan& plan : plans) {
      Rng region_rng(plan.seed);
      const RegionAppearance appearance =
          draw_region_appearance(plan.label, plan.false_detection, region_rng);

      for (int im = 0; im < plan.image_count; ++im) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "I%05ld", image_counter++);
        const std::string image_id = buf;
        Rng img_rng(mix_seed({plan.seed, static_cast<std::uint64_t>(im)}));

        // Box geometry: size correlates weakly with the class.
        const double base = static_cast<double>(size) *
                            (0.34 + 0.04 * static_cast<double>(plan.label % 3));
        const Index bw = std::max<Index>(8, static_cast<Index>(std::llround(
                                                base * img_rng.uniform(0.8, 1.2))));
        const Index bh = std::max<Index>(8, static_cast<Index>(std::llround(
                                                base * img_rng.uniform(0.8, 1.2))));
        const Index bx = img_rng.uniform_int(std::max<Index>(1, size - bw));
        const Index by = img_rng.uniform_int(std::max<Index>(1, size - bh));
        const Box box{bx, by, bw, bh};

        const ImageNuisance nuisance = draw_nuisance(spec.noise, img_rng);

        // Pan rendering (3 channels) with its own sensor-noise stream.
        Tensor pan({size, size, 3});
        Rng pan_noise(mix_seed({plan.seed, static_cast<std::uint64_t>(im), 0xfa1ULL}));
        double color[8];
        for (Index y = 0; y < size; ++y)
          for (Index x = 0; x < size; ++x) {
            scene_color(appearance, nuisance, box, static_cast<double>(x), static_cast<double>(y),
                        spec.classes, color, 3);
            for (Index c = 0; c < 3; ++c) {
              const double noisy = color[c] + 0.35 * spec.noise * pan_noise.normal();
              pan.at(y, x, c) = static_cast<Real>(std::clamp(noisy, 0.0, 1.0));
            }
          }

        // Multi-spectral analog: lower resolution, extra NIR-like channel.
        Tensor multi({multi_size, multi_size, spec.multi_channels});
        Rng multi_noise(mix_seed({plan.seed, static_cast<std::uint64_t>(im), 0xfa2ULL}));
        const double scale = static_cast<double>(size) / static_cast<double>(multi_size);
        for (Index y = 0; y < multi_size; ++y)
          for (Index x = 0; x < multi_size; ++x) {
            const double px = (static_cast<double>(x) + 0.5) * scale - 0.5;
            const double py = (static_cast<double>(y) + 0.5) * scale - 0.5;
            scene_color(appearance, nuisance, box, px, py, spec.classes, color,
                        static_cast<int>(spec.multi_channels));
            for (Index c = 0; c < spec.multi_channels; ++c) {
              const double noisy = color[c] + 0.35 * spec.noise * multi_noise.normal();
              multi.at(y, x, c) = static_cast<Real>(std::clamp(noisy, 0.0, 1.0));
            }
          }

        Record rec;
        rec.region_id = plan.region_id;
        rec.image_id = image_id;
        rec.path = "images/" + image_id + ".png";
        rec.path_multi = "images/" + image_id + ".ht";
        rec.box = box;
        rec.label = plan.label;
        rec.metadata.fields = {img_rng.uniform(0.3, 3.0),
                               img_rng.uniform(15.0, 75.0),
                               static_cast<double>(1 + img_rng.uniform_int(12)),
                               static_cast<double>(img_rng.uniform_int(7)),
                               static_cast<double>(bw),
                               static_cast<double>(bh),
                               static_cast<double>(size),
                               static_cast<double>(size)};
        // Occasionally drop an optional field, as real metadata does.
        if (spec.noise > 0.0 && img_rng.uniform() < 0.04)
          rec.metadata.fields[0] = MetadataRecord::kSentinel;
        if (spec.noise > 0.0 && img_rng.uniform() < 0.04)
          rec.metadata.fields[1] = MetadataRecord::kSentinel;

        img::write_png(out_dir / rec.path, img::tensor_to_png(pan));
        serialize::save_tensor_file(multi, out_dir / rec.path_multi);
        manifest.records.push_back(std::move(rec));
      }
    }
    return manifest;
  };

  GeneratedDataset out;
  long train_regions = spec.train_regions;
  if (!spec.class_balance.empty()) {
    train_regions = 0;
    for (long c : spec.class_balance) {
      if (c < 0) throw ConfigError("generate_synthetic: negative class_balance entry");
      train_regions += c;
    }
  }
  const auto train_plans = plan_split(Split::Train, train_regions, 0.0, mix_seed({seed, 1}));
  const auto eval_plans = plan_split(Split::Eval, spec.eval_regions,
                                     spec.eval_false_detection_frac, mix_seed({seed, 2}));
  const auto test_plans = plan_split(Split::Test, spec.test_regions,
                                     spec.test_false_detection_frac, mix_seed({seed, 3}));
  out.train = render_split(Split::Train, train_plans);
  out.eval = render_split(Split::Eval, eval_plans);
  out.test = render_split(Split::Test, test_plans);

  save_manifest(out.train, out_dir / "train.json");
  save_manifest(out.eval, out_dir / "eval.json");
  save_manifest(out.test, out_dir / "test.json");

  // Truth CSVs for the scorer.
  auto write_truth = [&](const Manifest& m, const std::string& name) {
    std::map<std::string, int> labels;
    for (const Record& rec : m.records) labels[rec.region_id] = rec.label;
    std::string csv = "region_id,label\n";
    for (const auto& [region_id, label] : labels)
      csv += region_id + "," + std::to_string(label) + "\n";
    io::write_file_atomic(out_dir / name, csv);
  };
  write_truth(out.eval, "truth_eval.csv");
  write_truth(out.test, "truth_test.csv");

  // Challenge-style class weights: cycle easy/normal/hard, false detection 0.
  {
    std::string csv = "label_index,weight\n";
    const double cycle[3] = {1.0, 0.6, 1.4};
    for (int c = 0; c < spec.classes; ++c)
      csv += std::to_string(c) + "," + format_real(cycle[c % 3]) + "\n";
    csv += std::to_string(fd_label) + ",0\n";
    io::write_file_atomic(out_dir / "weights.csv", csv);
  }
  return out;
}

}  // namespace hydra::data
