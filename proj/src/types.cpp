#include <set>

#include "tgs/error.hpp"
#include "tgs/event.hpp"
#include "tgs/types.hpp"

namespace tgs {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidEvent: return "InvalidEvent";
    case ErrorCode::kUnsortedLog: return "UnsortedLog";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kBackendIO: return "BackendIO";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kOutOfOrderBatch: return "OutOfOrderBatch";
    case ErrorCode::kInfeasibleBalance: return "InfeasibleBalance";
    case ErrorCode::kOutOfSpan: return "OutOfSpan";
    case ErrorCode::kEmptySeries: return "EmptySeries";
    case ErrorCode::kUnalignedOperands: return "UnalignedOperands";
    case ErrorCode::kInconsistentDelta: return "InconsistentDelta";
    case ErrorCode::kMemberFailure: return "MemberFailure";
    case ErrorCode::kUnknownScript: return "UnknownScript";
    case ErrorCode::kRefuseOverwrite: return "RefuseOverwrite";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

std::string_view to_string(Direction d) {
  return d == Direction::kOut ? "out" : "in";
}

std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "out") return Direction::kOut;
  if (s == "in") return Direction::kIn;
  return std::nullopt;
}

std::size_t StaticNode::neighbor_count() const {
  std::size_t n = 0;
  NodeId last = 0;
  bool first = true;
  // Edge keys are ordered by neighbor first, so duplicates are adjacent.
  for (const auto& [key, _] : edges) {
    if (first || key.neighbor != last) ++n;
    last = key.neighbor;
    first = false;
  }
  return n;
}

namespace {

constexpr std::string_view kKindNames[kEventKindCount] = {
    "ADD_NODE",      "DELETE_NODE",   "ADD_EDGE",      "DELETE_EDGE",
    "SET_NODE_ATTR", "DEL_NODE_ATTR", "SET_EDGE_ATTR", "DEL_EDGE_ATTR",
};

}  // namespace

std::string_view to_string(EventKind kind) {
  return kKindNames[static_cast<int>(kind)];
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (int i = 0; i < kEventKindCount; ++i) {
    if (kKindNames[i] == s) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

bool is_edge_event(EventKind kind) {
  switch (kind) {
    case EventKind::kAddEdge:
    case EventKind::kDeleteEdge:
    case EventKind::kSetEdgeAttr:
    case EventKind::kDelEdgeAttr:
      return true;
    default:
      return false;
  }
}

bool has_key(EventKind kind) {
  switch (kind) {
    case EventKind::kSetNodeAttr:
    case EventKind::kDelNodeAttr:
    case EventKind::kSetEdgeAttr:
    case EventKind::kDelEdgeAttr:
      return true;
    default:
      return false;
  }
}

bool has_value(EventKind kind) {
  return kind == EventKind::kSetNodeAttr || kind == EventKind::kSetEdgeAttr;
}

Event Event::add_node(Time t, NodeId n) {
  return Event{t, EventKind::kAddNode, n, 0, Direction::kOut, {}, {}};
}
Event Event::delete_node(Time t, NodeId n) {
  return Event{t, EventKind::kDeleteNode, n, 0, Direction::kOut, {}, {}};
}
Event Event::add_edge(Time t, NodeId src, NodeId dst) {
  return Event{t, EventKind::kAddEdge, src, dst, Direction::kOut, {}, {}};
}
Event Event::delete_edge(Time t, NodeId src, NodeId dst) {
  return Event{t, EventKind::kDeleteEdge, src, dst, Direction::kOut, {}, {}};
}
Event Event::set_node_attr(Time t, NodeId n, std::string k, std::string v) {
  return Event{t, EventKind::kSetNodeAttr, n, 0, Direction::kOut,
               std::move(k), std::move(v)};
}
Event Event::del_node_attr(Time t, NodeId n, std::string k) {
  return Event{t, EventKind::kDelNodeAttr, n, 0, Direction::kOut,
               std::move(k), {}};
}
Event Event::set_edge_attr(Time t, NodeId src, NodeId dst, std::string k,
                           std::string v) {
  return Event{t, EventKind::kSetEdgeAttr, src, dst, Direction::kOut,
               std::move(k), std::move(v)};
}
Event Event::del_edge_attr(Time t, NodeId src, NodeId dst, std::string k) {
  return Event{t, EventKind::kDelEdgeAttr, src, dst, Direction::kOut,
               std::move(k), {}};
}

bool EventList::sorted() const {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].event.time < events[i - 1].event.time) return false;
  }
  return true;
}

EventList filter_by_time(const EventList& el, Time t1, Time t2) {
  EventList out;
  out.span = TimeRange{t1, t2};
  for (const auto& se : el.events) {
    if (se.event.time > t1 && se.event.time <= t2) out.events.push_back(se);
  }
  return out;
}

EventList filter_by_id(const EventList& el, const std::set<NodeId>& ids) {
  EventList out;
  out.span = el.span;
  for (const auto& se : el.events) {
    const Event& e = se.event;
    if (ids.contains(e.subject) ||
        (is_edge_event(e.kind) && ids.contains(e.peer))) {
      out.events.push_back(se);
    }
  }
  return out;
}

PartitionedEventList make_partitioned(const EventList& el,
                                      std::set<NodeId> scope) {
  PartitionedEventList out;
  out.base = filter_by_id(el, scope);
  out.scope = std::move(scope);
  return out;
}

}  // namespace tgs
