#include "qcons/rng.hpp"

namespace qcons {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x6a09e667f3bcc909ULL;
  std::uint64_t key = 0;
  for (std::uint64_t part : parts) {
    state ^= part;
    key = splitmix64(state);
    state = key;
  }
  return key;
}

std::mt19937_64 keyed_stream(std::uint64_t seed, std::uint64_t trial,
                             std::uint64_t node, std::uint64_t iteration,
                             StreamRole role) {
  std::uint64_t state =
      mix_key({seed, trial, node, iteration, static_cast<std::uint64_t>(role)});
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state))};
  return std::mt19937_64(seq);
}

}  // namespace qcons
