#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mppi_orca {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used only to decorrelate stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a stream seed from a master seed and an ordered list of tags
/// (agent index, step, purpose, ...). Streams never depend on execution order.
inline std::uint64_t stream_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(master);
  for (auto t : tags) h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  return Rng(stream_seed(master, tags));
}

// Purpose tags for stream derivation.
enum class StreamTag : std::uint64_t {
  actuation = 1,
  observation = 2,
  rollout = 3,
  scenario = 4,
};

inline std::uint64_t tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

}  // namespace mppi_orca
