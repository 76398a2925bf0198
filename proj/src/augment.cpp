#include "hydra/augment.hpp"

namespace hydra::aug {

std::string crop_kind_name(CropKind k) {
  switch (k) {
    case CropKind::OrigPan: return "ORIG-PAN";
    case CropKind::ExtPan: return "EXT-PAN";
    case CropKind::ExtMulti: return "EXT-MULTI";
  }
  return "ORIG-PAN";
}

CropKind parse_crop_kind(const std::string& name) {
  if (name == "ORIG-PAN") return CropKind::OrigPan;
  if (name == "EXT-PAN") return CropKind::ExtPan;
  if (name == "EXT-MULTI") return CropKind::ExtMulti;
  throw ConfigError("unknown crop style: '" + name + "'");
}

data::RegionSample augment_sample(const data::RegionSample& sample, const AugmentPolicy& policy,
                                  int epoch, std::uint64_t seed, Index out_h, Index out_w) {
  policy.validate();
  Rng rng(mix_seed({seed, static_cast<std::uint64_t>(epoch), fnv1a(sample.region_id),
                    fnv1a(sample.image_id)}));

  data::RegionSample out = sample;
  if (policy.flip_h && rng.coin()) out.pixels = flip(out.pixels, FlipAxis::Horizontal);
  if (policy.flip_v && rng.coin()) out.pixels = flip(out.pixels, FlipAxis::Vertical);
  if (policy.zoom_enabled())
    out.pixels = random_zoom(out.pixels, policy.zoom_lo, policy.zoom_hi, rng.next_u64());
  if (policy.shift_frac > 0.0)
    out.pixels = random_shift(out.pixels, policy.shift_frac, rng.next_u64());
  out.pixels = resize_bilinear(out.pixels, out_h, out_w);
  return out;
}

}  // namespace hydra::aug
