#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace usp::rng {

//! Random engine used for every substream.
using Stream = std::mt19937_64;

//! SplitMix64 finaliser; a bijective mixer on 64-bit words.
constexpr std::uint64_t
mix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

//! Seed of the substream addressed by `path` below `master`. Substreams are
//! keyed by position, not by draw order, so results do not depend on how
//! work is scheduled.
constexpr std::uint64_t
derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
  std::uint64_t h = mix64(master);
  std::uint64_t depth = 0;
  for (const std::uint64_t key : path) {
    ++depth;
    h = mix64(h ^ mix64(key + 0x632be59bd9b4e019ULL * depth));
  }
  return h;
}

inline Stream
make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
  return Stream{ derive_seed(master, path) };
}

//! Purpose tags keep substreams for different consumers disjoint.
enum class Tag : std::uint64_t
{
  permutation = 0x7065726d,
  table = 0x7461626c,
  data = 0x64617461,
  data_y = 0x64617479,
  replicate = 0x7265706c,
};

constexpr std::uint64_t
key(Tag t)
{
  return static_cast<std::uint64_t>(t);
}

inline double
uniform01(Stream& s)
{
  return std::uniform_real_distribution<double>(0.0, 1.0)(s);
}

} // namespace usp::rng
