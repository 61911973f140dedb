#include "tgs/keys.hpp"

#include "tgs/error.hpp"
#include "tgs/hash.hpp"

namespace tgs {

void append_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

void append_be64(std::string& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

std::uint32_t read_be32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(in[at + i]);
  }
  return v;
}

std::uint64_t read_be64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(in[at + i]);
  }
  return v;
}

std::string encode_delta_key(const DeltaKey& k) {
  std::string out;
  out.reserve(kDeltaKeySize);
  append_be32(out, k.tsid);
  append_be32(out, k.sid);
  append_be64(out, k.did);
  append_be32(out, k.pid);
  return out;
}

DeltaKey decode_delta_key(std::string_view bytes) {
  if (bytes.size() != kDeltaKeySize) {
    throw Error(ErrorCode::kCorruptRecord, "delta key has wrong length");
  }
  return DeltaKey{read_be32(bytes, 0), read_be32(bytes, 4), read_be64(bytes, 8),
                  read_be32(bytes, 16)};
}

std::string encode_delta_prefix(std::uint32_t tsid,
                                std::optional<std::uint32_t> sid,
                                std::optional<std::uint64_t> did) {
  std::string out;
  append_be32(out, tsid);
  if (!sid) return out;
  append_be32(out, *sid);
  if (!did) return out;
  append_be64(out, *did);
  return out;
}

std::string prefix_successor(std::string_view prefix) {
  std::string out(prefix);
  while (!out.empty()) {
    auto& last = reinterpret_cast<unsigned char&>(out.back());
    if (last != 0xff) {
      ++last;
      return out;
    }
    out.pop_back();
  }
  return out;
}

std::uint32_t placement_of(const PlacementKey& k, std::uint32_t shards) {
  if (shards <= 1) return 0;
  const std::uint64_t packed = (std::uint64_t{k.tsid} << 32) | k.sid;
  return static_cast<std::uint32_t>(mix64(packed) % shards);
}

}  // namespace tgs
