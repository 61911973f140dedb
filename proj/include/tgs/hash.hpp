#pragma once

#include <cstdint>

namespace tgs {

// SplitMix64 finalizer. Stable across platforms and runs; every placement and
// random-partition decision goes through it.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace tgs
