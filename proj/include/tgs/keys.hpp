#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tgs {

struct PlacementKey {
  std::uint32_t tsid = 0;
  std::uint32_t sid = 0;

  auto operator<=>(const PlacementKey&) const = default;
};

struct DeltaKey {
  std::uint32_t tsid = 0;
  std::uint32_t sid = 0;
  std::uint64_t did = 0;
  std::uint32_t pid = 0;

  auto operator<=>(const DeltaKey&) const = default;

  PlacementKey placement() const { return {tsid, sid}; }
};

// pids at or above this value name auxiliary micro-deltas; the home pid is
// pid - kAuxPidBase. Home-only reads scan [0, kAuxPidBase).
inline constexpr std::uint32_t kAuxPidBase = 0x80000000u;

inline bool is_aux_pid(std::uint32_t pid) { return pid >= kAuxPidBase; }

inline constexpr std::size_t kDeltaKeySize = 4 + 4 + 8 + 4;

// Fixed-width big-endian concatenation: byte order equals field-tuple order.
std::string encode_delta_key(const DeltaKey& k);
DeltaKey decode_delta_key(std::string_view bytes);

// Encoded prefix of the leading fields; a missing field ends the prefix.
std::string encode_delta_prefix(std::uint32_t tsid,
                                std::optional<std::uint32_t> sid = {},
                                std::optional<std::uint64_t> did = {});

// Smallest key greater than every key starting with `prefix`; empty when none.
std::string prefix_successor(std::string_view prefix);

// Shard for a key. Depends on (tsid, sid) only.
std::uint32_t placement_of(const PlacementKey& k, std::uint32_t shards);
inline std::uint32_t placement_of(const DeltaKey& k, std::uint32_t shards) {
  return placement_of(k.placement(), shards);
}

void append_be32(std::string& out, std::uint32_t v);
void append_be64(std::string& out, std::uint64_t v);
std::uint32_t read_be32(std::string_view in, std::size_t at);
std::uint64_t read_be64(std::string_view in, std::size_t at);

}  // namespace tgs
