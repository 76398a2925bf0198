#pragma once

#include <optional>

#include "hydra/dataset.hpp"

namespace hydra::aug {

using Index = Eigen::Index;
using data::Box;

enum class FlipAxis { Horizontal, Vertical };

enum class CropKind { OrigPan, ExtPan, ExtMulti };

std::string crop_kind_name(CropKind k);
CropKind parse_crop_kind(const std::string& name);

/// Crop extraction recipe. min_size only applies to EXT-MULTI crops.
struct CropStyle {
  CropKind kind = CropKind::OrigPan;
  double expansion_factor = 2.0;
  Index min_size = 96;
};

/// Label-preserving geometric transforms; photometric transforms are
/// deliberately absent.
struct AugmentPolicy {
  bool flip_h = false;
  bool flip_v = false;
  double zoom_lo = 1.0;
  double zoom_hi = 1.0;
  double shift_frac = 0.0;

  void validate() const {
    if (!(zoom_lo > 0.0 && zoom_lo <= 1.0 && zoom_hi >= 1.0))
      throw ContractError("AugmentPolicy: zoom range must satisfy 0 < lo <= 1 <= hi");
    if (!(shift_frac >= 0.0 && shift_frac < 0.5))
      throw ContractError("AugmentPolicy: shift_frac must be in [0, 0.5)");
  }

  bool zoom_enabled() const { return zoom_lo != 1.0 || zoom_hi != 1.0; }
};

namespace detail {

template <typename Scalar>
Scalar lerp(Scalar a, Scalar b, double t) {
  return a + static_cast<Scalar>(t) * (b - a);
}

// Bilinear sample with edge clamping, written so a constant image yields
// exactly the constant.
template <typename Scalar>
Scalar sample_bilinear(const TensorT<Scalar>& t, double y, double x, Index ch) {
  const Index h = t.dim(0), w = t.dim(1);
  const double yc = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const Index y0 = static_cast<Index>(std::floor(yc));
  const Index x0 = static_cast<Index>(std::floor(xc));
  const Index y1 = std::min(y0 + 1, h - 1);
  const Index x1 = std::min(x0 + 1, w - 1);
  const double fy = yc - static_cast<double>(y0);
  const double fx = xc - static_cast<double>(x0);
  const Scalar top = lerp(t.at(y0, x0, ch), t.at(y0, x1, ch), fx);
  const Scalar bot = lerp(t.at(y1, x0, ch), t.at(y1, x1, ch), fx);
  return lerp(top, bot, fy);
}

}  // namespace detail

/// Mirrors an H x W x C tensor. Horizontal flips columns, vertical rows.
template <typename Scalar>
TensorT<Scalar> flip(const TensorT<Scalar>& t, FlipAxis axis) {
  if (t.rank() != 3) throw ContractError("flip: rank-3 tensor required");
  const Index h = t.dim(0), w = t.dim(1), c = t.dim(2);
  TensorT<Scalar> out(t.shape());
  for (Index r = 0; r < h; ++r)
    for (Index col = 0; col < w; ++col) {
      const Index sr = axis == FlipAxis::Vertical ? h - 1 - r : r;
      const Index sc = axis == FlipAxis::Horizontal ? w - 1 - col : col;
      for (Index ch = 0; ch < c; ++ch) out.at(r, col, ch) = t.at(sr, sc, ch);
    }
  return out;
}

/// Bilinear resize to (oh, ow) using half-pixel centers. Identity when the
/// target equals the source shape.
template <typename Scalar>
TensorT<Scalar> resize_bilinear(const TensorT<Scalar>& t, Index oh, Index ow) {
  if (t.rank() != 3) throw ContractError("resize_bilinear: rank-3 tensor required");
  if (oh <= 0 || ow <= 0) throw ContractError("resize_bilinear: target must be positive");
  const Index h = t.dim(0), w = t.dim(1), c = t.dim(2);
  if (oh == h && ow == w) return t;
  TensorT<Scalar> out({oh, ow, c});
  const double sy = static_cast<double>(h) / static_cast<double>(oh);
  const double sx = static_cast<double>(w) / static_cast<double>(ow);
  for (Index r = 0; r < oh; ++r) {
    const double y = (static_cast<double>(r) + 0.5) * sy - 0.5;
    for (Index col = 0; col < ow; ++col) {
      const double x = (static_cast<double>(col) + 0.5) * sx - 0.5;
      for (Index ch = 0; ch < c; ++ch) out.at(r, col, ch) = detail::sample_bilinear(t, y, x, ch);
    }
  }
  return out;
}

/// Rescales about the image center by a factor drawn uniformly from
/// [zoom_lo, zoom_hi], keeping the original shape (edge-replicated when
/// zooming out). Deterministic per seed.
template <typename Scalar>
TensorT<Scalar> random_zoom(const TensorT<Scalar>& t, double zoom_lo, double zoom_hi,
                            std::uint64_t seed) {
  if (t.rank() != 3) throw ContractError("random_zoom: rank-3 tensor required");
  if (!(zoom_lo > 0.0 && zoom_lo <= zoom_hi))
    throw ContractError("random_zoom: invalid zoom range");
  Rng rng(seed);
  const double f = rng.uniform(zoom_lo, zoom_hi);
  if (f == 1.0) return t;
  const Index h = t.dim(0), w = t.dim(1), c = t.dim(2);
  const double cy = static_cast<double>(h - 1) / 2.0;
  const double cx = static_cast<double>(w - 1) / 2.0;
  TensorT<Scalar> out(t.shape());
  for (Index r = 0; r < h; ++r) {
    const double y = (static_cast<double>(r) - cy) / f + cy;
    for (Index col = 0; col < w; ++col) {
      const double x = (static_cast<double>(col) - cx) / f + cx;
      for (Index ch = 0; ch < c; ++ch) out.at(r, col, ch) = detail::sample_bilinear(t, y, x, ch);
    }
  }
  return out;
}

/// Deterministic integer translation with edge-replicate padding.
template <typename Scalar>
TensorT<Scalar> shift_pixels(const TensorT<Scalar>& t, Index dy, Index dx) {
  const Index h = t.dim(0), w = t.dim(1), c = t.dim(2);
  TensorT<Scalar> out(t.shape());
  for (Index r = 0; r < h; ++r) {
    const Index sr = std::clamp<Index>(r - dy, 0, h - 1);
    for (Index col = 0; col < w; ++col) {
      const Index sc = std::clamp<Index>(col - dx, 0, w - 1);
      for (Index ch = 0; ch < c; ++ch) out.at(r, col, ch) = t.at(sr, sc, ch);
    }
  }
  return out;
}

/// Integer translation by (dx, dy) drawn uniformly from
/// [-shift_frac*W, +shift_frac*W] x [-shift_frac*H, +shift_frac*H], with
/// edge-replicate padding. Deterministic per seed.
template <typename Scalar>
TensorT<Scalar> random_shift(const TensorT<Scalar>& t, double shift_frac, std::uint64_t seed) {
  if (t.rank() != 3) throw ContractError("random_shift: rank-3 tensor required");
  if (!(shift_frac >= 0.0 && shift_frac < 0.5))
    throw ContractError("random_shift: shift_frac must be in [0, 0.5)");
  const Index h = t.dim(0), w = t.dim(1);
  const Index max_dy = static_cast<Index>(shift_frac * static_cast<double>(h));
  const Index max_dx = static_cast<Index>(shift_frac * static_cast<double>(w));
  Rng rng(seed);
  const Index dy = rng.uniform_int(2 * max_dy + 1) - max_dy;
  const Index dx = rng.uniform_int(2 * max_dx + 1) - max_dx;
  return shift_pixels(t, dy, dx);
}

/// Zero-pads or truncates channels to the requested count.
template <typename Scalar>
TensorT<Scalar> fit_channels(const TensorT<Scalar>& t, Index channels) {
  if (t.rank() != 3) throw ContractError("fit_channels: rank-3 tensor required");
  if (t.dim(2) == channels) return t;
  TensorT<Scalar> out({t.dim(0), t.dim(1), channels});
  const Index copy = std::min(channels, t.dim(2));
  for (Index r = 0; r < t.dim(0); ++r)
    for (Index col = 0; col < t.dim(1); ++col)
      for (Index ch = 0; ch < copy; ++ch) out.at(r, col, ch) = t.at(r, col, ch);
  return out;
}

/// Extracts the crop for a style. ORIG-PAN takes the box; EXT styles expand
/// it symmetrically by expansion_factor and clip to the image. EXT-MULTI
/// crops smaller than min_size in either dimension are rejected (nullopt).
template <typename Scalar>
std::optional<TensorT<Scalar>> crop_region(const TensorT<Scalar>& image, const Box& box,
                                           const CropStyle& style) {
  if (image.rank() != 3) throw ContractError("crop_region: rank-3 image required");
  if (box.w <= 0 || box.h <= 0) throw ContractError("crop_region: degenerate box");
  const Index h = image.dim(0), w = image.dim(1), c = image.dim(2);

  Index bx = box.x, by = box.y, bw = box.w, bh = box.h;
  if (style.kind != CropKind::OrigPan) {
    if (style.expansion_factor < 1.0)
      throw ContractError("crop_region: expansion_factor must be >= 1");
    const Index ew = static_cast<Index>(std::llround(style.expansion_factor * static_cast<double>(bw)));
    const Index eh = static_cast<Index>(std::llround(style.expansion_factor * static_cast<double>(bh)));
    bx -= (ew - bw) / 2;
    by -= (eh - bh) / 2;
    bw = ew;
    bh = eh;
  }
  // Clip to the image bounds.
  const Index x0 = std::clamp<Index>(bx, 0, w);
  const Index y0 = std::clamp<Index>(by, 0, h);
  const Index x1 = std::clamp<Index>(bx + bw, 0, w);
  const Index y1 = std::clamp<Index>(by + bh, 0, h);
  if (x1 <= x0 || y1 <= y0) throw ContractError("crop_region: box outside image");

  if (style.kind == CropKind::ExtMulti) {
    if (x1 - x0 < style.min_size || y1 - y0 < style.min_size) return std::nullopt;
  }

  TensorT<Scalar> out({y1 - y0, x1 - x0, c});
  for (Index r = y0; r < y1; ++r)
    for (Index col = x0; col < x1; ++col)
      for (Index ch = 0; ch < c; ++ch) out.at(r - y0, col - x0, ch) = image.at(r, col, ch);
  return out;
}

/// Applies the policy's transforms to a cropped sample and resizes to the
/// network input. The draw depends on (seed, epoch, region id, image id) so
/// every epoch sees fresh transforms. Label, ids and metadata pass through.
data::RegionSample augment_sample(const data::RegionSample& sample, const AugmentPolicy& policy,
                                  int epoch, std::uint64_t seed, Index out_h, Index out_w);

}  // namespace hydra::aug
