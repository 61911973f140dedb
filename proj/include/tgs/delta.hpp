#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "tgs/event.hpp"
#include "tgs/types.hpp"

namespace tgs {

enum class DeltaKind : std::uint8_t {
  kEvent = 1,
  kEventList = 2,
  kSnapshot = 3,
  kDerived = 4,
};

// A keyed set of node states: at most one entry per node, where an entry is
// either a full StaticNode or a tombstone (std::nullopt).
//
// cardinality() counts unique entries; size() counts every node description
// accumulated into the delta, so sums report the work they absorbed.
class Delta {
 public:
  using Entries = std::map<NodeId, NodeState>;

  Delta() = default;
  explicit Delta(Entries entries, std::optional<DeltaKind> provenance = {});

  const Entries& entries() const { return entries_; }
  std::size_t cardinality() const { return entries_.size(); }
  std::size_t size() const { return size_; }
  bool empty() const { return entries_.empty(); }

  std::optional<DeltaKind> provenance() const { return provenance_; }
  void set_provenance(std::optional<DeltaKind> k) { provenance_ = k; }
  // Deserialization only; must not be below cardinality().
  void restore_size(std::size_t size) { size_ = size; }

  // nullptr when the node has no entry; a non-null pointer to an empty
  // optional is a tombstone.
  const NodeState* find(NodeId id) const;
  NodeState* find(NodeId id);
  bool contains_live(NodeId id) const;

  void put(NodeId id, NodeState state);
  void put_node(StaticNode node);
  void put_tombstone(NodeId id);
  void erase(NodeId id);

  // Copy without tombstones.
  Delta materialized() const;

  friend bool operator==(const Delta& a, const Delta& b) {
    return a.entries_ == b.entries_;
  }

 private:
  friend Delta delta_sum(const Delta&, const Delta&);
  friend void delta_sum_into(Delta&, const Delta&);

  Entries entries_;
  std::size_t size_ = 0;
  std::optional<DeltaKind> provenance_;
};

// b's entry wins for ids present in both. Associative, not commutative.
Delta delta_sum(const Delta& a, const Delta& b);
// a = a + b without copying a.
void delta_sum_into(Delta& a, const Delta& b);
// Entries of a whose (id, state) pair does not appear in b.
Delta delta_diff(const Delta& a, const Delta& b);
// Entries identical in both operands.
Delta delta_intersect(const Delta& a, const Delta& b);
// All entries of both; conflicting ids resolve to b.
Delta delta_union(const Delta& a, const Delta& b);

inline Delta operator+(const Delta& a, const Delta& b) { return delta_sum(a, b); }
inline Delta operator-(const Delta& a, const Delta& b) { return delta_diff(a, b); }

Delta filter_by_id(const Delta& d, const std::set<NodeId>& ids);

// Which endpoints of an event a partial application updates.
enum EndpointMask : std::uint8_t {
  kMaskSubject = 1,
  kMaskPeer = 2,
  kMaskBoth = 3,
};

// Applies one endpoint's half of an event to that endpoint's state. Checks only
// what the endpoint itself can see (the node exists, the edge is present or
// absent as required). Throws Error(kInvalidEvent).
void apply_to_endpoint(NodeState& state, NodeId self, const Event& e,
                       bool as_subject);

// Applies the endpoints selected by `mask` to `state`, creating entries as
// needed. Used to replay partitioned eventlists into partitioned snapshots.
void apply_masked(Delta& state, const Event& e, std::uint8_t mask);

// Post-state of every node the event changes, given the prior graph state.
// DeleteNode on a node that still has edges also rewrites each neighbor.
Delta event_to_delta(const Event& e, const Delta& prior);

// In-place equivalent of `state = state + event_to_delta(e, state)`.
void apply_event(Delta& state, const Event& e);

Delta apply_events(const Delta& state, const EventList& el);
Delta apply_events(const Delta& state, std::span<const Event> events);

}  // namespace tgs
