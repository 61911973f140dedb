#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgs/delta.hpp"
#include "tgs/event.hpp"
#include "tgs/graph.hpp"
#include "tgs/tgi.hpp"

namespace tgs {

// A micro fetch is one request for one micro-partition (home or auxiliary) of
// one horizontal partition, whether or not any record comes back.
struct FetchCounters {
  std::uint64_t micro_fetches = 0;
  std::uint64_t aux_fetches = 0;
  ReadCounters reads;

  FetchCounters& operator+=(const FetchCounters& o) {
    micro_fetches += o.micro_fetches;
    aux_fetches += o.aux_fetches;
    reads += o.reads;
    return *this;
  }
};

// State at ts, then every event touching the node in (ts, te], in log order.
struct NodeHistory {
  NodeId id = 0;
  Time ts = 0;
  Time te = 0;
  NodeState initial;
  std::vector<Event> events;
  // Log sequence number of each event.
  std::vector<std::uint64_t> seqs;

  bool operator==(const NodeHistory&) const = default;

  bool known() const { return initial.has_value() || !events.empty(); }
  // ts <= t <= te.
  NodeState state_at(Time t) const;
};

// Interval during which a neighbor was adjacent to the center. The neighbor
// joins at `from`; it has left by `to` unless `adjacent_at_end`.
struct AdjacencyInterval {
  Time from = 0;
  Time to = 0;
  bool adjacent_at_end = false;
  NodeHistory history;

  bool operator==(const AdjacencyInterval&) const = default;

  bool covers(Time t) const { return from <= t && (t < to || (adjacent_at_end && t == to)); }
};

struct OneHopHistory {
  NodeHistory center;
  // Per neighbor, ordered by id then interval start.
  std::map<NodeId, std::vector<AdjacencyInterval>> neighbors;

  bool operator==(const OneHopHistory&) const = default;

  // Center plus the neighbors adjacent at t, as an induced subgraph.
  GraphS materialize(Time t) const;
};

enum class KHopStrategy : std::uint8_t { kAuto, kSnapshotFirst, kExpand };

// Query coordinator over one index. Workers split reads across horizontal
// and micro partitions; results do not depend on the worker count.
class Retriever {
 public:
  explicit Retriever(const Tgi& tgi, std::size_t workers = 1);

  std::size_t workers() const { return workers_; }
  const Tgi& index() const { return *tgi_; }

  // Raw state at t with tombstones; reads only home micro-partitions.
  Delta get_snapshot_delta(Time t, FetchCounters* counters = nullptr) const;
  GraphS get_snapshot(Time t, FetchCounters* counters = nullptr) const;

  // Only micro-deltas named by the node's version chain are fetched.
  NodeHistory get_node_history(NodeId id, Time ts, Time te,
                               FetchCounters* counters = nullptr) const;
  // State just before ts (absent when ts is 0), then events in [ts, te].
  NodeHistory get_node_history_closed(NodeId id, Time ts, Time te,
                                      FetchCounters* counters = nullptr) const;
  std::optional<StaticNode> get_node_at(NodeId id, Time t,
                                        FetchCounters* counters = nullptr) const;

  GraphS get_k_hop_snapshot_first(NodeId id, Time t, unsigned hops,
                                  FetchCounters* counters = nullptr) const;
  // Fetches the micro-partitions of the nodes it visits, each with its
  // auxiliary when one exists, and stops once every needed state is known.
  GraphS get_k_hop_expand(NodeId id, Time t, unsigned hops,
                          FetchCounters* counters = nullptr) const;
  // kAuto expands for hops <= 2.
  GraphS get_k_hop(NodeId id, Time t, unsigned hops,
                   KHopStrategy strategy = KHopStrategy::kAuto,
                   FetchCounters* counters = nullptr) const;

  OneHopHistory get_1hop_history(NodeId id, Time ts, Time te,
                                 FetchCounters* counters = nullptr) const;
  // Element j is the hops-neighborhood at times[j].
  std::vector<GraphS> get_neighborhood_versions(NodeId id, unsigned hops,
                                                std::span<const Time> times,
                                                KHopStrategy strategy = KHopStrategy::kAuto,
                                                FetchCounters* counters = nullptr) const;

  // Home state of every node at t, kept per storage shard in shard order.
  // Used for direct handoff to analytics workers.
  std::vector<Delta> get_snapshot_by_shard(Time t, FetchCounters* counters = nullptr) const;

 private:
  NodeHistory history_impl(NodeId id, Time ts, Time te, bool closed,
                           FetchCounters* counters) const;

  const Tgi* tgi_;
  std::size_t workers_;
};

// Canonical text renderings; stable across worker and shard counts.
std::string render_graph(const GraphS& g);
std::string render_history(const NodeHistory& h);
std::string render_one_hop_history(const OneHopHistory& h);

}  // namespace tgs
