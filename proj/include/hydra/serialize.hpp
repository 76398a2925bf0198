#pragma once

#include <filesystem>

#include "hydra/net.hpp"

namespace hydra::serialize {

/// A trained network plus the hash of the config that produced it.
struct Checkpoint {
  Network net;
  std::uint64_t config_hash = 0;
};

/// Writes a network checkpoint: "HYDRNET1" magic, config hash, layer spec
/// table, then little-endian float64 parameter blobs. Layout documented in
/// docs/formats.md.
void save_checkpoint(const Network& net, std::uint64_t config_hash,
                     const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the float64-encoded parameter blobs; used to compare
/// checkpoints cheaply.
std::uint64_t parameter_checksum(const Network& net);

/// Raw tensor container ("HYDRTNS1" magic, rank, dims, float32 payload),
/// used for the multi-spectral image analogs.
void save_tensor_file(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor_file(const std::filesystem::path& path);

}  // namespace hydra::serialize
