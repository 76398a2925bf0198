#include "hydra/serialize.hpp"

#include <cstring>

#include "hydra/io.hpp"

namespace hydra::serialize {

namespace {

constexpr char kNetMagic[8] = {'H', 'Y', 'D', 'R', 'N', 'E', 'T', '1'};
constexpr char kTensorMagic[8] = {'H', 'Y', 'D', 'R', 'T', 'N', 'S', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& blob, std::string name) : blob_(blob), name_(std::move(name)) {}

  void expect_magic(const char magic[8]) {
    if (blob_.size() < 8 || std::memcmp(blob_.data(), magic, 8) != 0)
      throw DataError(name_ + ": bad magic bytes");
    pos_ = 8;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  void done() const {
    if (pos_ != blob_.size()) throw DataError(name_ + ": trailing bytes");
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > blob_.size()) throw DataError(name_ + ": truncated file");
  }

  const std::string& blob_;
  std::string name_;
  std::size_t pos_ = 0;
};

void put_param_blob(std::string& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (Index i = 0; i < t.rank(); ++i) put_u64(out, static_cast<std::uint64_t>(t.dim(i)));
  for (Index i = 0; i < t.size(); ++i) put_f64(out, static_cast<double>(t[i]));
}

}  // namespace

void save_checkpoint(const Network& net, std::uint64_t config_hash,
                     const std::filesystem::path& path) {
  std::string out(kNetMagic, 8);
  put_u64(out, config_hash);
  put_u32(out, static_cast<std::uint32_t>(net.metadata_width));
  put_u32(out, static_cast<std::uint32_t>(net.class_count));
  for (int i = 0; i < 3; ++i) put_u32(out, static_cast<std::uint32_t>(net.input_shape[i]));
  for (Index i = 0; i < net.metadata_width; ++i)
    put_f64(out, static_cast<double>(net.metadata_means[i]));
  put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const LayerSpec& spec : net.layers) {
    put_u32(out, static_cast<std::uint32_t>(spec.kind));
    put_u64(out, static_cast<std::uint64_t>(spec.units));
    put_u64(out, static_cast<std::uint64_t>(spec.out_channels));
    put_u64(out, static_cast<std::uint64_t>(spec.kernel));
    put_u64(out, static_cast<std::uint64_t>(spec.stride));
    put_u64(out, static_cast<std::uint64_t>(spec.block_layers));
    put_u64(out, static_cast<std::uint64_t>(spec.growth));
    put_f64(out, spec.rate);
  }
  for (const auto& layer : net.params) {
    put_u32(out, static_cast<std::uint32_t>(layer.size()));
    for (const Tensor& p : layer) put_param_blob(out, p);
  }
  io::write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string blob = io::read_file(path);
  Reader r(blob, path.string());
  r.expect_magic(kNetMagic);

  Checkpoint ckpt;
  ckpt.config_hash = r.u64();
  const Index metadata_width = static_cast<Index>(r.u32());
  const Index class_count = static_cast<Index>(r.u32());
  std::vector<Index> input_shape(3);
  for (auto& d : input_shape) d = static_cast<Index>(r.u32());
  VectorT<Real> means(metadata_width);
  for (Index i = 0; i < metadata_width; ++i) means[i] = static_cast<Real>(r.f64());

  const std::uint32_t layer_count = r.u32();
  std::vector<LayerSpec> specs;
  specs.reserve(layer_count);
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec spec;
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::Flatten))
      throw DataError(path.string() + ": unknown layer kind");
    spec.kind = static_cast<LayerKind>(kind);
    spec.units = static_cast<Index>(r.u64());
    spec.out_channels = static_cast<Index>(r.u64());
    spec.kernel = static_cast<Index>(r.u64());
    spec.stride = static_cast<Index>(r.u64());
    spec.block_layers = static_cast<Index>(r.u64());
    spec.growth = static_cast<Index>(r.u64());
    spec.rate = r.f64();
    specs.push_back(spec);
  }

  try {
    ckpt.net = build_network<Real>(specs, input_shape, metadata_width, class_count, 0);
  } catch (const ContractError& e) {
    throw DataError(path.string() + ": invalid layer table: " + e.what());
  }
  ckpt.net.metadata_means = std::move(means);

  for (auto& layer : ckpt.net.params) {
    const std::uint32_t n = r.u32();
    if (n != layer.size()) throw DataError(path.string() + ": parameter table mismatch");
    for (Tensor& p : layer) {
      const std::uint32_t rank = r.u32();
      if (rank != static_cast<std::uint32_t>(p.rank()))
        throw DataError(path.string() + ": parameter rank mismatch");
      for (std::uint32_t d = 0; d < rank; ++d)
        if (static_cast<Index>(r.u64()) != p.dim(static_cast<Index>(d)))
          throw DataError(path.string() + ": parameter shape mismatch");
      for (Index i = 0; i < p.size(); ++i) p[i] = static_cast<Real>(r.f64());
    }
  }
  r.done();
  return ckpt;
}

std::uint64_t parameter_checksum(const Network& net) {
  std::string blob;
  for (const auto& layer : net.params)
    for (const Tensor& p : layer) put_param_blob(blob, p);
  return fnv1a_bytes(blob.data(), blob.size());
}

void save_tensor_file(const Tensor& t, const std::filesystem::path& path) {
  std::string out(kTensorMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (Index i = 0; i < t.rank(); ++i) put_u64(out, static_cast<std::uint64_t>(t.dim(i)));
  for (Index i = 0; i < t.size(); ++i) put_f32(out, static_cast<float>(t[i]));
  io::write_file_atomic(path, out);
}

Tensor load_tensor_file(const std::filesystem::path& path) {
  const std::string blob = io::read_file(path);
  Reader r(blob, path.string());
  r.expect_magic(kTensorMagic);
  const std::uint32_t rank = r.u32();
  if (rank == 0 || rank > 4) throw DataError(path.string() + ": unsupported tensor rank");
  std::vector<Index> shape(rank);
  for (auto& d : shape) {
    d = static_cast<Index>(r.u64());
    if (d <= 0) throw DataError(path.string() + ": non-positive dimension");
  }
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(r.f32());
  r.done();
  return t;
}

}  // namespace hydra::serialize
