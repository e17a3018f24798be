#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gnnrisk/model.hpp"
#include "gnnrisk/training.hpp"

namespace gnnrisk {

/// Binary checkpoint layout (all integers little-endian, reals IEEE-754
/// binary64 little-endian):
///
///   "GNNRCKPT"              8-byte magic
///   u32 version             currently 1
///   u64 payload_length
///   payload:
///     u8 aggregation (0 mean, 1 sum), u8 self_loops
///     u32 layer_count
///     per layer: u8 kind (0 gcn, 1 attention), u8 activation (0 relu,
///                1 identity), u8 head_mode (0 concat, 1 mean), u32 heads,
///                u32 head_dim, then matrices weight, attention, projection
///     matrix classifier
///     u32 epochs, epochs x f64 train loss, epochs x f64 val loss
///   32-byte SHA-256 of the payload
///
/// A matrix is u32 rows, u32 cols, rows*cols f64 in row-major order; absent
/// matrices are 0x0.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelParams params;
    LossLog log;
};

std::string encode_checkpoint(const ModelParams& params, const LossLog& log);
/// Throws VersionError, TruncatedError, IntegrityError or ShapeError.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelParams& params, const LossLog& log,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Additionally requires every parameter shape to match `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const Architecture& expected);

}  // namespace gnnrisk
