#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tgs/types.hpp"

namespace tgs {

enum class EventKind : std::uint8_t {
  kAddNode = 0,
  kDeleteNode,
  kAddEdge,
  kDeleteEdge,
  kSetNodeAttr,
  kDelNodeAttr,
  kSetEdgeAttr,
  kDelEdgeAttr,
};

inline constexpr int kEventKindCount = 8;

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view s);

bool is_edge_event(EventKind kind);
bool has_key(EventKind kind);
bool has_value(EventKind kind);

// Smallest unit of change. Edge events name both endpoints; `direction` is
// relative to the subject (kOut means subject -> peer).
struct Event {
  Time time = 0;
  EventKind kind = EventKind::kAddNode;
  NodeId subject = 0;
  NodeId peer = 0;
  Direction direction = Direction::kOut;
  std::string key;
  std::string value;

  bool operator==(const Event&) const = default;

  bool touches(NodeId id) const {
    return subject == id || (is_edge_event(kind) && peer == id);
  }

  static Event add_node(Time t, NodeId n);
  static Event delete_node(Time t, NodeId n);
  static Event add_edge(Time t, NodeId src, NodeId dst);
  static Event delete_edge(Time t, NodeId src, NodeId dst);
  static Event set_node_attr(Time t, NodeId n, std::string k, std::string v);
  static Event del_node_attr(Time t, NodeId n, std::string k);
  static Event set_edge_attr(Time t, NodeId src, NodeId dst, std::string k,
                             std::string v);
  static Event del_edge_attr(Time t, NodeId src, NodeId dst, std::string k);
};

// An event tagged with its position in the canonical log. The sequence number
// orders events that share a timestamp and identifies copies of one edge event
// stored in two partitions.
struct SequencedEvent {
  std::uint64_t seq = 0;
  Event event;

  bool operator==(const SequencedEvent&) const = default;
};

// Chronologically sorted events with scope (lo, hi].
struct EventList {
  std::vector<SequencedEvent> events;
  TimeRange span;

  bool operator==(const EventList&) const = default;

  bool sorted() const;
};

struct PartitionedEventList {
  EventList base;
  std::set<NodeId> scope;
};

// Events with t1 < time <= t2.
EventList filter_by_time(const EventList& el, Time t1, Time t2);
// Events whose subject or edge peer is in `ids`.
EventList filter_by_id(const EventList& el, const std::set<NodeId>& ids);

PartitionedEventList make_partitioned(const EventList& el,
                                      std::set<NodeId> scope);

}  // namespace tgs
