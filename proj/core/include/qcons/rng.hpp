#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qcons {

/// One step of the splitmix64 sequence; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

/// Hashes an ordered tuple of integers into a single 64-bit key.
std::uint64_t mix_key(std::initializer_list<std::uint64_t> parts);

/// Purpose tags for keyed simulation streams.
enum class StreamRole : std::uint64_t {
  graph = 1,
  signal = 2,
  noise = 3,
  quantizer = 4,
  retry = 5,
};

/// Independent generator for one (seed, trial, node, iteration, role) key.
/// Streams are order independent: the draws of one key never depend on
/// which other keys were used before.
std::mt19937_64 keyed_stream(std::uint64_t seed, std::uint64_t trial,
                             std::uint64_t node, std::uint64_t iteration,
                             StreamRole role);

}  // namespace qcons
