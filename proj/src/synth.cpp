#include "tgs/synth.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>

namespace tgs {

namespace {

struct Model {
  std::set<NodeId> alive;
  // Directed edges (src, dst) with their attribute keys.
  std::map<std::pair<NodeId, NodeId>, std::set<std::string>> edges;
  std::map<NodeId, std::set<std::string>> attrs;
};

template <class C>
auto pick(const C& c, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, c.size() - 1);
  return *std::next(c.begin(), static_cast<std::ptrdiff_t>(d(rng)));
}

}  // namespace

std::vector<Event> random_log(const RandomLogOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0, 1);
  Model m;
  NodeId next_id = 0;
  Time t = opts.start;
  std::vector<Event> out;
  out.reserve(opts.events);

  auto key = [&] { return "k" + std::to_string(rng() % std::max<std::size_t>(opts.attr_keys, 1)); };
  auto value = [&] {
    return "v" + std::to_string(rng() % std::max<std::size_t>(opts.attr_values, 1));
  };

  // Weights per kind, in EventKind order.
  const double weights[kEventKindCount] = {3, 0.6, 5, 1.5, 2, 0.7, 1.5, 0.5};
  std::discrete_distribution<int> kind_dist(std::begin(weights), std::end(weights));

  while (out.size() < opts.events) {
    if (!out.empty() && unit(rng) >= opts.same_time) t += 1 + rng() % 3;
    std::optional<Event> e;
    switch (static_cast<EventKind>(kind_dist(rng))) {
      case EventKind::kAddNode:
        if (next_id < opts.max_nodes) e = Event::add_node(t, next_id++);
        break;
      case EventKind::kDeleteNode:
        if (m.alive.size() > 2) e = Event::delete_node(t, pick(m.alive, rng));
        break;
      case EventKind::kAddEdge:
        if (m.alive.size() >= 2) {
          const NodeId a = pick(m.alive, rng);
          const NodeId b = pick(m.alive, rng);
          if (a != b && !m.edges.contains({a, b})) e = Event::add_edge(t, a, b);
        }
        break;
      case EventKind::kDeleteEdge:
        if (!m.edges.empty()) {
          const auto [a, b] = pick(m.edges, rng).first;
          e = Event::delete_edge(t, a, b);
        }
        break;
      case EventKind::kSetNodeAttr:
        if (!m.alive.empty()) e = Event::set_node_attr(t, pick(m.alive, rng), key(), value());
        break;
      case EventKind::kDelNodeAttr: {
        std::vector<NodeId> with;
        for (const auto& [n, ks] : m.attrs) {
          if (!ks.empty()) with.push_back(n);
        }
        if (!with.empty()) {
          const NodeId n = pick(with, rng);
          e = Event::del_node_attr(t, n, pick(m.attrs[n], rng));
        }
        break;
      }
      case EventKind::kSetEdgeAttr:
        if (!m.edges.empty()) {
          const auto [a, b] = pick(m.edges, rng).first;
          e = Event::set_edge_attr(t, a, b, key(), value());
        }
        break;
      case EventKind::kDelEdgeAttr: {
        std::vector<std::pair<NodeId, NodeId>> with;
        for (const auto& [ab, ks] : m.edges) {
          if (!ks.empty()) with.push_back(ab);
        }
        if (!with.empty()) {
          const auto ab = pick(with, rng);
          e = Event::del_edge_attr(t, ab.first, ab.second, pick(m.edges[ab], rng));
        }
        break;
      }
    }
    if (!e) continue;

    switch (e->kind) {
      case EventKind::kAddNode:
        m.alive.insert(e->subject);
        break;
      case EventKind::kDeleteNode:
        m.alive.erase(e->subject);
        m.attrs.erase(e->subject);
        std::erase_if(m.edges, [&](const auto& kv) {
          return kv.first.first == e->subject || kv.first.second == e->subject;
        });
        break;
      case EventKind::kAddEdge:
        m.edges[{e->subject, e->peer}];
        break;
      case EventKind::kDeleteEdge:
        m.edges.erase({e->subject, e->peer});
        break;
      case EventKind::kSetNodeAttr:
        m.attrs[e->subject].insert(e->key);
        break;
      case EventKind::kDelNodeAttr:
        m.attrs[e->subject].erase(e->key);
        break;
      case EventKind::kSetEdgeAttr:
        m.edges[{e->subject, e->peer}].insert(e->key);
        break;
      case EventKind::kDelEdgeAttr:
        m.edges[{e->subject, e->peer}].erase(e->key);
        break;
    }
    out.push_back(std::move(*e));
  }
  return out;
}

std::vector<Event> planted_partition_log(const PlantedPartitionOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0, 1);
  const std::size_t n = opts.communities * opts.community_size;
  std::vector<Event> out;
  for (NodeId i = 0; i < n; ++i) out.push_back(Event::add_node(opts.start, i));
  Time t = opts.start;
  for (NodeId a = 0; a < n; ++a) {
    for (NodeId b = a + 1; b < n; ++b) {
      const bool same = a / opts.community_size == b / opts.community_size;
      if (unit(rng) < (same ? opts.p_in : opts.p_out)) out.push_back(Event::add_edge(++t, a, b));
    }
  }
  return out;
}

}  // namespace tgs
