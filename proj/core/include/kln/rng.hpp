#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kln {

/// Engine for the named sub-stream of a run seed ("init", "shuffle-s",
/// "shuffle-t", "split", "diagnostics", ...). Streams are independent, so a
/// new consumer of randomness never shifts the draws of another.
std::mt19937_64 substream(std::uint64_t seed, std::string_view name);

}  // namespace kln
