#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tgs/delta.hpp"
#include "tgs/event.hpp"

namespace tgs {

enum class CollapseFn : std::uint8_t { kMedian, kUnionMax, kUnionMean };
enum class NodeWeightFn : std::uint8_t { kUnit, kDegree, kMeanDegree };

std::string_view to_string(CollapseFn f);
std::optional<CollapseFn> parse_collapse_fn(std::string_view s);
std::string_view to_string(NodeWeightFn f);
std::optional<NodeWeightFn> parse_node_weight_fn(std::string_view s);

// Undirected weighted graph. Edge keys are (min id, max id).
struct CollapsedGraph {
  std::map<NodeId, double> node_weight;
  std::map<std::pair<NodeId, NodeId>, double> edges;

  double total_node_weight() const;
  double total_edge_weight() const;
  // Per node, (neighbor, weight) sorted by neighbor.
  std::map<NodeId, std::vector<std::pair<NodeId, double>>> adjacency() const;
};

// Edge weight as seen in one state: the "weight" attribute of each directed
// record between the pair (1 when absent or unparsable), summed over both
// directions.
std::map<std::pair<NodeId, NodeId>, double> weighted_edges(const Delta& state);

// Collapses the history over tau = [start, end_exclusive): `initial` holds
// before start and every event time lies in tau. A state reached after the
// events at time t holds until the next event time. The node set is every
// node alive in `initial` plus every node added during tau.
CollapsedGraph collapse(const Delta& initial, std::span<const Event> events,
                        Time start, Time end_exclusive, CollapseFn fn,
                        NodeWeightFn wfn);

struct PartitionMap {
  std::uint32_t tsid = 0;
  std::uint32_t k = 1;
  std::map<NodeId, std::uint32_t> assign;

  bool operator==(const PartitionMap&) const = default;

  std::vector<std::size_t> sizes() const;
  std::optional<std::uint32_t> pid_of(NodeId id) const;
};

// floor(|V|/k) <= |P_r| <= ceil(|V|/k) for every r < k.
bool is_balanced(const PartitionMap& pm);
// |W_r - W/k| <= max node weight for every r < k.
bool is_weight_balanced(const PartitionMap& pm, const CollapsedGraph& g);

double edge_cut(const CollapsedGraph& g, const PartitionMap& pm);

std::uint32_t random_pid(NodeId id, std::uint32_t k, std::uint64_t seed);
PartitionMap partition_random(const std::set<NodeId>& nids, std::uint32_t k,
                              std::uint64_t seed = 0);

struct LocalityOptions {
  // Balance on node weights instead of node counts.
  bool weighted = false;
  int max_passes = 20;
};

// Greedy BFS growth from seeds, then pairwise swap refinement that never
// breaks the balance bound. Throws InfeasibleBalance when k is 0 or exceeds
// the node count.
PartitionMap partition_locality(const CollapsedGraph& g, std::uint32_t k,
                                const LocalityOptions& opts = {});

// Renames pids so the new map overlaps `prev` as much as possible. Part sizes
// are untouched.
PartitionMap align_labels(const PartitionMap& fresh, const PartitionMap& prev);

struct SpanPartitionParams {
  bool locality = false;
  std::uint32_t k = 1;
  std::uint64_t seed = 0;
  CollapseFn collapse = CollapseFn::kUnionMax;
  NodeWeightFn weights = NodeWeightFn::kUnit;
};

// Fresh collapse and partition for one span. Random mode ignores the history
// and reproduces partition_random over `universe`. Locality mode partitions
// the collapsed graph restricted to `universe` and aligns labels with `prev`.
PartitionMap repartition_for_span(const std::optional<PartitionMap>& prev,
                                  std::uint32_t tsid,
                                  const std::set<NodeId>& universe,
                                  const Delta& initial,
                                  std::span<const Event> events, Time start,
                                  Time end_exclusive,
                                  const SpanPartitionParams& params);

// Locality step of repartition_for_span over an already collapsed span.
PartitionMap partition_span_locality(const std::optional<PartitionMap>& prev,
                                     std::uint32_t tsid,
                                     const std::set<NodeId>& universe,
                                     const CollapsedGraph& collapsed,
                                     const SpanPartitionParams& params);

// Restricts a collapsed graph to the given nodes.
CollapsedGraph restrict_graph(const CollapsedGraph& g, const std::set<NodeId>& ids);

// Nodes adjacent to some member of `members` in `state` but not in it.
std::set<NodeId> frontier_of(const Delta& state, const std::set<NodeId>& members);

struct AuxiliaryMicroDelta {
  std::uint32_t owner = 0;
  Delta nodes;
};

// For each pid, the states of every out-of-partition neighbor of its members.
// Pids with an empty frontier get an empty delta.
std::map<std::uint32_t, AuxiliaryMicroDelta> build_auxiliary(
    const Delta& state, const PartitionMap& pm);

}  // namespace tgs
