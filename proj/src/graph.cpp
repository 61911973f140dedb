#include "tgs/graph.hpp"

#include <deque>

namespace tgs {

std::size_t GraphS::edge_count() const {
  std::size_t m = 0;
  for (const auto& [id, node] : nodes) {
    for (const auto& [key, _] : node.edges) {
      if (key.direction == Direction::kOut) ++m;
    }
  }
  return m;
}

const StaticNode* GraphS::find(NodeId id) const {
  auto it = nodes.find(id);
  return it == nodes.end() ? nullptr : &it->second;
}

GraphS GraphS::from_delta(const Delta& d) {
  GraphS g;
  for (const auto& [id, state] : d.entries()) {
    if (state) g.nodes.emplace_hint(g.nodes.end(), id, *state);
  }
  return g;
}

Delta GraphS::to_delta() const {
  Delta::Entries entries;
  for (const auto& [id, node] : nodes) entries.emplace_hint(entries.end(), id, node);
  return Delta(std::move(entries), DeltaKind::kSnapshot);
}

namespace {

StaticNode restrict_edges(const StaticNode& n, const std::set<NodeId>& ids) {
  StaticNode out{n.id, {}, n.attrs};
  for (const auto& [key, attrs] : n.edges) {
    if (ids.contains(key.neighbor)) out.edges.emplace(key, attrs);
  }
  return out;
}

}  // namespace

GraphS induced_subgraph(const GraphS& g, const std::set<NodeId>& ids) {
  GraphS out;
  for (NodeId id : ids) {
    if (const StaticNode* n = g.find(id)) {
      out.nodes.emplace_hint(out.nodes.end(), id, restrict_edges(*n, ids));
    }
  }
  return out;
}

GraphS induced_subgraph(const Delta& state, const std::set<NodeId>& ids) {
  GraphS out;
  std::set<NodeId> live;
  for (NodeId id : ids) {
    if (state.contains_live(id)) live.insert(id);
  }
  for (NodeId id : live) {
    out.nodes.emplace_hint(out.nodes.end(), id,
                           restrict_edges(**state.find(id), live));
  }
  return out;
}

std::set<NodeId> neighbor_ids(const StaticNode& n) {
  std::set<NodeId> out;
  for (const auto& [key, _] : n.edges) out.insert(key.neighbor);
  return out;
}

std::set<NodeId> k_hop_ball(const GraphS& g, NodeId center, unsigned hops) {
  std::set<NodeId> seen;
  if (g.find(center) == nullptr) return seen;
  seen.insert(center);
  std::vector<NodeId> frontier{center};
  for (unsigned h = 0; h < hops && !frontier.empty(); ++h) {
    std::vector<NodeId> next;
    for (NodeId id : frontier) {
      for (const auto& [key, _] : g.find(id)->edges) {
        if (seen.insert(key.neighbor).second) next.push_back(key.neighbor);
      }
    }
    frontier = std::move(next);
  }
  return seen;
}

double density(const GraphS& g) {
  const double n = static_cast<double>(g.node_count());
  if (n < 2) return 0.0;
  return static_cast<double>(g.edge_count()) / (n * (n - 1));
}

double clustering_coefficient(const GraphS& g, NodeId id) {
  const StaticNode* n = g.find(id);
  if (n == nullptr) return 0.0;
  std::set<NodeId> nbrs = neighbor_ids(*n);
  nbrs.erase(id);
  const std::size_t d = nbrs.size();
  if (d < 2) return 0.0;
  std::size_t links = 0;
  for (NodeId a : nbrs) {
    const StaticNode* na = g.find(a);
    if (na == nullptr) continue;
    for (NodeId b : neighbor_ids(*na)) {
      if (b > a && nbrs.contains(b)) ++links;
    }
  }
  return 2.0 * static_cast<double>(links) / static_cast<double>(d * (d - 1));
}

std::size_t label_count(const GraphS& g, const std::string& key,
                        const std::string& value) {
  std::size_t c = 0;
  for (const auto& [id, node] : g.nodes) {
    auto it = node.attrs.find(key);
    if (it != node.attrs.end() && it->second == value) ++c;
  }
  return c;
}

bool referentially_intact(const GraphS& g) {
  for (const auto& [id, node] : g.nodes) {
    if (node.id != id) return false;
    for (const auto& [key, attrs] : node.edges) {
      const StaticNode* other = g.find(key.neighbor);
      if (other == nullptr) return false;
      auto it = other->edges.find(EdgeKey{id, flip(key.direction)});
      if (it == other->edges.end() || it->second != attrs) return false;
    }
  }
  return true;
}

}  // namespace tgs
