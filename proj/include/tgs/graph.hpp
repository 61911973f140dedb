#pragma once

#include <map>
#include <set>
#include <vector>

#include "tgs/delta.hpp"
#include "tgs/types.hpp"

namespace tgs {

// Materialized in-memory graph: live nodes only, every edge record's neighbor
// present in `nodes`.
struct GraphS {
  std::map<NodeId, StaticNode> nodes;

  bool operator==(const GraphS&) const = default;

  bool empty() const { return nodes.empty(); }
  std::size_t node_count() const { return nodes.size(); }
  // Directed edge count (each edge counted once, at its source).
  std::size_t edge_count() const;
  const StaticNode* find(NodeId id) const;

  static GraphS from_delta(const Delta& d);
  Delta to_delta() const;
};

// Nodes of `g` in `ids`, keeping only edges whose both endpoints are kept.
GraphS induced_subgraph(const GraphS& g, const std::set<NodeId>& ids);
// Same, over a raw state; tombstones are dropped.
GraphS induced_subgraph(const Delta& state, const std::set<NodeId>& ids);

std::set<NodeId> neighbor_ids(const StaticNode& n);

// Ids within `hops` undirected hops of `center` (including it); empty when
// the center is absent.
std::set<NodeId> k_hop_ball(const GraphS& g, NodeId center, unsigned hops);

// Directed density m / (n (n - 1)); 0 for fewer than two nodes.
double density(const GraphS& g);
// Local clustering coefficient on the undirected view.
double clustering_coefficient(const GraphS& g, NodeId id);
// Nodes whose attribute `key` equals `value`.
std::size_t label_count(const GraphS& g, const std::string& key,
                        const std::string& value);

// Every edge record refers to a live node holding the mirrored record.
bool referentially_intact(const GraphS& g);

}  // namespace tgs
