#pragma once

#include <filesystem>
#include <iosfwd>

#include "kln/network.hpp"

namespace kln {

/// Binary model checkpoint, little-endian:
///
///   "KLNCKPT" '\0'             8-byte magic
///   u32 version                currently 1
///   3 x network                encoder, decoder, classifier
///
/// network := u32 layer_count, then per layer
///   u8 activation, f64 slope, u64 rows, u64 cols,
///   rows*cols f64 weights (row-major), rows f64 biases
///
/// Values are stored bit-for-bit, so save followed by load is lossless.
void save_checkpoint(const ModelParams& params, std::ostream& out);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);

/// Throws CheckpointError on bad magic, unknown version, truncation,
/// inconsistent shapes or trailing bytes.
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace kln
