#include "hydra/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "hydra/io.hpp"

namespace hydra::img {

namespace {

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::uint32_t get_be32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
  put_be32(out, static_cast<std::uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                         static_cast<uInt>(body.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png(const std::filesystem::path& path, const PngImage& image) {
  if (image.c != 1 && image.c != 3) throw ContractError("write_png: channels must be 1 or 3");
  if (image.h <= 0 || image.w <= 0) throw ContractError("write_png: empty image");
  const std::size_t expected =
      static_cast<std::size_t>(image.h) * static_cast<std::size_t>(image.w) *
      static_cast<std::size_t>(image.c);
  if (image.pixels.size() != expected) throw ContractError("write_png: pixel buffer size mismatch");

  const std::size_t row_bytes = static_cast<std::size_t>(image.w) * static_cast<std::size_t>(image.c);
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(image.h) * (row_bytes + 1));
  for (Index r = 0; r < image.h; ++r) {
    raw.push_back(0);  // filter type: none
    const std::uint8_t* row = image.pixels.data() + static_cast<std::size_t>(r) * row_bytes;
    raw.insert(raw.end(), row, row + row_bytes);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw DataError("write_png: deflate failed");
  compressed.resize(bound);

  std::string out(reinterpret_cast<const char*>(kSignature), 8);
  std::string ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(image.w));
  put_be32(ihdr, static_cast<std::uint32_t>(image.h));
  ihdr.push_back(8);                               // bit depth
  ihdr.push_back(image.c == 3 ? char(2) : char(0));  // color type
  ihdr.push_back(0);                               // compression
  ihdr.push_back(0);                               // filter
  ihdr.push_back(0);                               // interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT",
               std::string(reinterpret_cast<const char*>(compressed.data()), compressed.size()));
  append_chunk(out, "IEND", "");
  io::write_file_atomic(path, out);
}

PngImage read_png(const std::filesystem::path& path) {
  const std::string blob = io::read_file(path);
  const auto* data = reinterpret_cast<const unsigned char*>(blob.data());
  if (blob.size() < 8 || std::memcmp(data, kSignature, 8) != 0)
    throw DataError(path.string() + ": not a PNG file");

  PngImage image;
  std::string idat;
  std::size_t pos = 8;
  bool saw_ihdr = false;
  while (pos + 12 <= blob.size()) {
    const std::uint32_t len = get_be32(data + pos);
    const std::string type(blob, pos + 4, 4);
    if (pos + 12 + len > blob.size()) throw DataError(path.string() + ": truncated chunk");
    const unsigned char* payload = data + pos + 8;
    if (type == "IHDR") {
      if (len != 13) throw DataError(path.string() + ": bad IHDR");
      image.w = get_be32(payload);
      image.h = get_be32(payload + 4);
      const int bit_depth = payload[8];
      const int color_type = payload[9];
      const int interlace = payload[12];
      if (bit_depth != 8 || (color_type != 0 && color_type != 2) || interlace != 0)
        throw DataError(path.string() + ": unsupported PNG variant");
      image.c = color_type == 2 ? 3 : 1;
      saw_ihdr = true;
    } else if (type == "IDAT") {
      idat.append(reinterpret_cast<const char*>(payload), len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || image.w <= 0 || image.h <= 0) throw DataError(path.string() + ": missing IHDR");

  const std::size_t row_bytes = static_cast<std::size_t>(image.w) * static_cast<std::size_t>(image.c);
  const std::size_t raw_size = static_cast<std::size_t>(image.h) * (row_bytes + 1);
  std::vector<std::uint8_t> raw(raw_size);
  uLongf out_len = static_cast<uLongf>(raw_size);
  if (uncompress(raw.data(), &out_len, reinterpret_cast<const Bytef*>(idat.data()),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      out_len != raw_size)
    throw DataError(path.string() + ": corrupt image data");

  image.pixels.assign(static_cast<std::size_t>(image.h) * row_bytes, 0);
  const std::size_t bpp = static_cast<std::size_t>(image.c);
  for (Index r = 0; r < image.h; ++r) {
    const std::uint8_t filter = raw[static_cast<std::size_t>(r) * (row_bytes + 1)];
    const std::uint8_t* src = raw.data() + static_cast<std::size_t>(r) * (row_bytes + 1) + 1;
    std::uint8_t* dst = image.pixels.data() + static_cast<std::size_t>(r) * row_bytes;
    const std::uint8_t* up = r > 0 ? dst - row_bytes : nullptr;
    for (std::size_t i = 0; i < row_bytes; ++i) {
      const int left = i >= bpp ? dst[i - bpp] : 0;
      const int above = up ? up[i] : 0;
      const int upleft = (up && i >= bpp) ? up[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, upleft); break;
        default: throw DataError(path.string() + ": unknown row filter");
      }
      dst[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  return image;
}

PngImage tensor_to_png(const Tensor& t) {
  if (t.rank() != 3) throw ContractError("tensor_to_png: rank-3 tensor required");
  if (t.dim(2) != 1 && t.dim(2) != 3) throw ContractError("tensor_to_png: channels must be 1 or 3");
  PngImage image;
  image.h = t.dim(0);
  image.w = t.dim(1);
  image.c = t.dim(2);
  image.pixels.resize(static_cast<std::size_t>(t.size()));
  for (Index i = 0; i < t.size(); ++i) {
    const double v = std::clamp(static_cast<double>(t[i]), 0.0, 1.0);
    image.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return image;
}

Tensor png_to_tensor(const PngImage& image) {
  Tensor t({image.h, image.w, image.c});
  for (Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<Real>(image.pixels[static_cast<std::size_t>(i)]) / Real(255);
  return t;
}

}  // namespace hydra::img
