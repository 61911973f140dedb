#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace tgs {

using NodeId = std::uint64_t;
// Logical timestamp. Only the ordering carries meaning.
using Time = std::uint64_t;

using AttrMap = std::map<std::string, std::string>;

// Direction of an edge as seen from the node that holds the record.
enum class Direction : std::uint8_t { kOut = 0, kIn = 1 };

inline Direction flip(Direction d) {
  return d == Direction::kOut ? Direction::kIn : Direction::kOut;
}

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view s);

struct EdgeKey {
  NodeId neighbor = 0;
  Direction direction = Direction::kOut;

  auto operator<=>(const EdgeKey&) const = default;
};

// State of one vertex at one time. Edges live inside the node record and are
// mirrored at both endpoints: an edge a->b is (b, out) on a and (a, in) on b.
struct StaticNode {
  NodeId id = 0;
  std::map<EdgeKey, AttrMap> edges;
  AttrMap attrs;

  bool operator==(const StaticNode&) const = default;

  bool has_edge(NodeId neighbor, Direction d) const {
    return edges.contains(EdgeKey{neighbor, d});
  }
  // Distinct neighbors regardless of direction.
  std::size_t neighbor_count() const;
};

// Absent optional is a tombstone when stored as a delta entry.
using NodeState = std::optional<StaticNode>;

// Half-open-low interval (lo, hi]. An absent lo means "from the beginning".
struct TimeRange {
  std::optional<Time> lo;
  Time hi = 0;

  bool operator==(const TimeRange&) const = default;

  bool contains(Time t) const { return (!lo || t > *lo) && t <= hi; }
};

}  // namespace tgs
