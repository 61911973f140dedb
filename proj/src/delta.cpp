#include "tgs/delta.hpp"

#include <string>

#include "tgs/error.hpp"

namespace tgs {

namespace {

[[noreturn]] void invalid(const Event& e, const std::string& why) {
  throw Error(ErrorCode::kInvalidEvent,
              std::string(to_string(e.kind)) + " at t=" +
                  std::to_string(e.time) + " on node " +
                  std::to_string(e.subject) + ": " + why);
}

EdgeKey edge_key_for(const Event& e, bool as_subject) {
  return as_subject ? EdgeKey{e.peer, e.direction}
                    : EdgeKey{e.subject, flip(e.direction)};
}

}  // namespace

Delta::Delta(Entries entries, std::optional<DeltaKind> provenance)
    : entries_(std::move(entries)),
      size_(entries_.size()),
      provenance_(provenance) {}

const NodeState* Delta::find(NodeId id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

NodeState* Delta::find(NodeId id) {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

bool Delta::contains_live(NodeId id) const {
  const NodeState* s = find(id);
  return s != nullptr && s->has_value();
}

void Delta::put(NodeId id, NodeState state) {
  entries_.insert_or_assign(id, std::move(state));
  ++size_;
}

void Delta::put_node(StaticNode node) {
  const NodeId id = node.id;
  put(id, std::move(node));
}

void Delta::put_tombstone(NodeId id) { put(id, std::nullopt); }

void Delta::erase(NodeId id) { entries_.erase(id); }

Delta Delta::materialized() const {
  Delta out;
  for (const auto& [id, state] : entries_) {
    if (state) out.entries_.emplace(id, state);
  }
  out.size_ = out.entries_.size();
  out.provenance_ = DeltaKind::kSnapshot;
  return out;
}

Delta delta_sum(const Delta& a, const Delta& b) {
  Delta out = a;
  for (const auto& [id, state] : b.entries_) {
    out.entries_.insert_or_assign(id, state);
  }
  out.size_ = a.size_ + b.size_;
  out.provenance_ = DeltaKind::kDerived;
  return out;
}

void delta_sum_into(Delta& a, const Delta& b) {
  for (const auto& [id, state] : b.entries_) a.entries_.insert_or_assign(id, state);
  a.size_ += b.size_;
  a.provenance_ = DeltaKind::kDerived;
}

Delta delta_diff(const Delta& a, const Delta& b) {
  Delta::Entries out;
  for (const auto& [id, state] : a.entries()) {
    const NodeState* other = b.find(id);
    if (other == nullptr || *other != state) out.emplace(id, state);
  }
  return Delta(std::move(out), DeltaKind::kDerived);
}

Delta delta_intersect(const Delta& a, const Delta& b) {
  const Delta& small = a.cardinality() <= b.cardinality() ? a : b;
  const Delta& large = &small == &a ? b : a;
  Delta::Entries out;
  for (const auto& [id, state] : small.entries()) {
    const NodeState* other = large.find(id);
    if (other != nullptr && *other == state) out.emplace(id, state);
  }
  return Delta(std::move(out), DeltaKind::kDerived);
}

Delta delta_union(const Delta& a, const Delta& b) {
  Delta::Entries out = a.entries();
  for (const auto& [id, state] : b.entries()) out.insert_or_assign(id, state);
  return Delta(std::move(out), DeltaKind::kDerived);
}

Delta filter_by_id(const Delta& d, const std::set<NodeId>& ids) {
  Delta::Entries out;
  if (ids.size() < d.cardinality()) {
    for (NodeId id : ids) {
      if (const NodeState* s = d.find(id)) out.emplace(id, *s);
    }
  } else {
    for (const auto& [id, state] : d.entries()) {
      if (ids.contains(id)) out.emplace(id, state);
    }
  }
  return Delta(std::move(out), d.provenance());
}

namespace {

// Why the endpoint cannot take the event, or nullptr when it can.
const char* endpoint_violation(const NodeState& state, const Event& e,
                               bool as_subject) {
  if (e.kind == EventKind::kAddNode) {
    return state ? "node already exists" : nullptr;
  }
  if (!state) return as_subject ? "node does not exist" : "peer does not exist";
  const StaticNode& node = *state;
  switch (e.kind) {
    case EventKind::kAddEdge:
      return node.edges.contains(edge_key_for(e, as_subject))
                 ? "edge already exists"
                 : nullptr;
    case EventKind::kDeleteEdge:
    case EventKind::kSetEdgeAttr:
      return node.edges.contains(edge_key_for(e, as_subject))
                 ? nullptr
                 : "edge does not exist";
    case EventKind::kDelNodeAttr:
      return node.attrs.contains(e.key) ? nullptr : "attribute not set";
    case EventKind::kDelEdgeAttr: {
      auto it = node.edges.find(edge_key_for(e, as_subject));
      if (it == node.edges.end()) return "edge does not exist";
      return it->second.contains(e.key) ? nullptr : "attribute not set";
    }
    default:
      return nullptr;
  }
}

void check_endpoint(const NodeState& state, const Event& e, bool as_subject) {
  if (const char* why = endpoint_violation(state, e, as_subject)) invalid(e, why);
}

}  // namespace

void apply_to_endpoint(NodeState& state, NodeId self, const Event& e,
                       bool as_subject) {
  if (!as_subject && !is_edge_event(e.kind)) return;
  check_endpoint(state, e, as_subject);
  switch (e.kind) {
    case EventKind::kAddNode:
      state = StaticNode{self, {}, {}};
      return;
    case EventKind::kDeleteNode:
      state.reset();
      return;
    case EventKind::kAddEdge:
      state->edges.try_emplace(edge_key_for(e, as_subject));
      return;
    case EventKind::kDeleteEdge:
      state->edges.erase(edge_key_for(e, as_subject));
      return;
    case EventKind::kSetNodeAttr:
      state->attrs.insert_or_assign(e.key, e.value);
      return;
    case EventKind::kDelNodeAttr:
      state->attrs.erase(e.key);
      return;
    case EventKind::kSetEdgeAttr:
      state->edges[edge_key_for(e, as_subject)].insert_or_assign(e.key,
                                                                 e.value);
      return;
    case EventKind::kDelEdgeAttr:
      state->edges[edge_key_for(e, as_subject)].erase(e.key);
      return;
  }
}

void apply_masked(Delta& state, const Event& e, std::uint8_t mask) {
  auto apply_one = [&](NodeId id, bool as_subject) {
    NodeState* slot = state.find(id);
    if (slot == nullptr) {
      NodeState fresh;
      apply_to_endpoint(fresh, id, e, as_subject);
      state.put(id, std::move(fresh));
    } else {
      apply_to_endpoint(*slot, id, e, as_subject);
    }
  };
  if (mask & kMaskSubject) apply_one(e.subject, true);
  if ((mask & kMaskPeer) && is_edge_event(e.kind)) apply_one(e.peer, false);
}

namespace {

NodeState lookup(const Delta& d, NodeId id) {
  const NodeState* s = d.find(id);
  return s == nullptr ? NodeState{} : *s;
}

void check_edge_endpoints(const Event& e) {
  if (is_edge_event(e.kind) && e.subject == e.peer) {
    invalid(e, "self loops are not supported");
  }
}

}  // namespace

Delta event_to_delta(const Event& e, const Delta& prior) {
  check_edge_endpoints(e);
  Delta out(Delta::Entries{}, DeltaKind::kEvent);
  NodeState subject = lookup(prior, e.subject);
  if (e.kind == EventKind::kDeleteNode && subject) {
    for (const auto& [key, _] : subject->edges) {
      NodeState neighbor;
      if (const NodeState* already = out.find(key.neighbor)) {
        neighbor = *already;
      } else {
        neighbor = lookup(prior, key.neighbor);
      }
      if (neighbor) neighbor->edges.erase(EdgeKey{e.subject, flip(key.direction)});
      out.put(key.neighbor, std::move(neighbor));
    }
  }
  apply_to_endpoint(subject, e.subject, e, true);
  if (is_edge_event(e.kind)) {
    NodeState peer = lookup(prior, e.peer);
    apply_to_endpoint(peer, e.peer, e, false);
    out.put(e.peer, std::move(peer));
  }
  out.put(e.subject, std::move(subject));
  return out;
}

void apply_event(Delta& state, const Event& e) {
  check_edge_endpoints(e);
  if (e.kind == EventKind::kDeleteNode) {
    NodeState* subject = state.find(e.subject);
    if (subject != nullptr && subject->has_value()) {
      for (const auto& [key, _] : (*subject)->edges) {
        NodeState* neighbor = state.find(key.neighbor);
        if (neighbor != nullptr && neighbor->has_value()) {
          (*neighbor)->edges.erase(EdgeKey{e.subject, flip(key.direction)});
        }
      }
    }
  }
  if (is_edge_event(e.kind)) {
    // Both endpoints are checked before either is touched so a rejected event
    // leaves the state as it was.
    static const NodeState kAbsent;
    const NodeState* peer = state.find(e.peer);
    const NodeState* subject = state.find(e.subject);
    check_endpoint(peer ? *peer : kAbsent, e, false);
    check_endpoint(subject ? *subject : kAbsent, e, true);
    apply_masked(state, e, kMaskBoth);
    return;
  }
  apply_masked(state, e, kMaskSubject);
}

Delta apply_events(const Delta& state, const EventList& el) {
  Delta out = state;
  for (const auto& se : el.events) apply_event(out, se.event);
  return out;
}

Delta apply_events(const Delta& state, std::span<const Event> events) {
  Delta out = state;
  for (const auto& e : events) apply_event(out, e);
  return out;
}

}  // namespace tgs
