#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace tgs {

enum class IndexKind : std::uint8_t { kLog, kCopy, kCopyLog, kNodeCentric, kDeltaGraph, kTgi };
enum class Primitive : std::uint8_t {
  kSnapshot,
  kStaticVertex,
  kVertexVersions,
  kOneHop,
  kOneHopVersions,
};

inline constexpr IndexKind kAllIndexKinds[] = {IndexKind::kLog,        IndexKind::kCopy,
                                               IndexKind::kCopyLog,    IndexKind::kNodeCentric,
                                               IndexKind::kDeltaGraph, IndexKind::kTgi};
inline constexpr Primitive kAllPrimitives[] = {Primitive::kSnapshot, Primitive::kStaticVertex,
                                               Primitive::kVertexVersions, Primitive::kOneHop,
                                               Primitive::kOneHopVersions};

std::string_view to_string(IndexKind k);
std::optional<IndexKind> parse_index_kind(std::string_view s);
std::string_view to_string(Primitive p);
std::optional<Primitive> parse_primitive(std::string_view s);

struct CostParams {
  double G = 0;  // total changes
  double S = 0;  // snapshot size
  double E = 0;  // eventlist size
  double h = 0;  // tree height
  double V = 0;  // changes to one node
  double R = 0;  // neighbors of one node
  double p = 1;  // partitions
  double N = 0;  // node count
  double C = 0;  // history size of one node
};

struct Cost {
  double delta_size_sum = 0;
  double delta_count = 0;

  bool operator==(const Cost&) const = default;
};

// Fetch cost of one primitive on one index layout. Quotients by E or p are
// evaluated as written, so zero divisors give inf or nan.
Cost estimate_cost(IndexKind index, Primitive primitive, const CostParams& p);

// Worst-case storage size of the index layout.
double estimate_storage(IndexKind index, const CostParams& p);

}  // namespace tgs
