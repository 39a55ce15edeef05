#pragma once

#include <filesystem>

#include "gridshed/policy.hpp"

namespace gridshed {

// Policy snapshot persisted between runs: parameters plus the observation
// statistics they were trained with.
struct Checkpoint {
    PolicyParams params;
    RunningStats stats;
};

// Binary format, little-endian throughout:
//   magic "GSHEDCKP", u32 format version,
//   u8 policy kind, u32 hidden, u32 input_dim, u32 output_dim,
//   u64 theta length, theta as f64[],
//   u64 stats count, u32 stats dim, mean f64[], m2 f64[],
//   u32 crc32 of everything after the magic.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Loading is strict: wrong magic, unsupported version, truncation, trailing
// bytes, checksum mismatch, non-finite values, or a theta length that does
// not match the declared architecture all raise CheckpointError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace gridshed
