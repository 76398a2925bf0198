#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hydra/tensor.hpp"

namespace hydra::img {

using Index = Eigen::Index;

/// 8-bit image, row-major (h, w, c); c is 1 (gray) or 3 (RGB).
struct PngImage {
  Index h = 0;
  Index w = 0;
  Index c = 0;
  std::vector<std::uint8_t> pixels;
};

/// Minimal PNG writer: bit depth 8, no interlace, filter type 0 rows.
void write_png(const std::filesystem::path& path, const PngImage& image);

/// Minimal PNG reader for the subset above plus standard row filters 0-4.
PngImage read_png(const std::filesystem::path& path);

/// [0,1] tensor -> 8-bit image (values clamped and rounded).
PngImage tensor_to_png(const Tensor& t);

/// 8-bit image -> [0,1] tensor.
Tensor png_to_tensor(const PngImage& image);

}  // namespace hydra::img
