#include "tgs/partitioner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "tgs/error.hpp"
#include "tgs/hash.hpp"

namespace tgs {

std::string_view to_string(CollapseFn f) {
  switch (f) {
    case CollapseFn::kMedian: return "median";
    case CollapseFn::kUnionMax: return "union-max";
    case CollapseFn::kUnionMean: return "union-mean";
  }
  return "union-max";
}

std::optional<CollapseFn> parse_collapse_fn(std::string_view s) {
  if (s == "median") return CollapseFn::kMedian;
  if (s == "union-max") return CollapseFn::kUnionMax;
  if (s == "union-mean") return CollapseFn::kUnionMean;
  return std::nullopt;
}

std::string_view to_string(NodeWeightFn f) {
  switch (f) {
    case NodeWeightFn::kUnit: return "unit";
    case NodeWeightFn::kDegree: return "degree";
    case NodeWeightFn::kMeanDegree: return "mean-degree";
  }
  return "unit";
}

std::optional<NodeWeightFn> parse_node_weight_fn(std::string_view s) {
  if (s == "unit") return NodeWeightFn::kUnit;
  if (s == "degree") return NodeWeightFn::kDegree;
  if (s == "mean-degree") return NodeWeightFn::kMeanDegree;
  return std::nullopt;
}

double CollapsedGraph::total_node_weight() const {
  double w = 0;
  for (const auto& [id, nw] : node_weight) w += nw;
  return w;
}

double CollapsedGraph::total_edge_weight() const {
  double w = 0;
  for (const auto& [e, ew] : edges) w += ew;
  return w;
}

std::map<NodeId, std::vector<std::pair<NodeId, double>>> CollapsedGraph::adjacency()
    const {
  std::map<NodeId, std::vector<std::pair<NodeId, double>>> adj;
  for (const auto& [id, w] : node_weight) adj[id];
  for (const auto& [e, w] : edges) {
    adj[e.first].emplace_back(e.second, w);
    adj[e.second].emplace_back(e.first, w);
  }
  for (auto& [id, list] : adj) std::sort(list.begin(), list.end());
  return adj;
}

namespace {

double attr_weight(const AttrMap& attrs) {
  auto it = attrs.find("weight");
  if (it == attrs.end()) return 1.0;
  double v = 0;
  const std::string& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return 1.0;
  return v;
}

}  // namespace

std::map<std::pair<NodeId, NodeId>, double> weighted_edges(const Delta& state) {
  std::map<std::pair<NodeId, NodeId>, double> out;
  for (const auto& [id, node] : state.entries()) {
    if (!node) continue;
    for (const auto& [key, attrs] : node->edges) {
      // Count each directed edge once, at its source.
      if (key.direction != Direction::kOut) continue;
      auto e = std::minmax(id, key.neighbor);
      out[{e.first, e.second}] += attr_weight(attrs);
    }
  }
  return out;
}

CollapsedGraph collapse(const Delta& initial, std::span<const Event> events,
                        Time start, Time end_exclusive, CollapseFn fn,
                        NodeWeightFn wfn) {
  if (end_exclusive <= start) {
    throw Error(ErrorCode::kInvalidConfig, "collapse needs a non-empty span");
  }
  const double length = static_cast<double>(end_exclusive - start);
  const Time median = start + (end_exclusive - start - 1) / 2;

  Delta state = initial.materialized();
  std::set<NodeId> universe;
  for (const auto& [id, s] : state.entries()) universe.insert(id);

  struct EdgeAcc {
    double max = -std::numeric_limits<double>::infinity();
    double integral = 0;
  };
  std::map<std::pair<NodeId, NodeId>, EdgeAcc> acc;
  std::map<NodeId, double> degree_integral;
  std::optional<Delta> median_state;

  Time cur = start;
  auto credit = [&](Time until) {
    if (until <= cur) return;
    const double dur = static_cast<double>(until - cur);
    for (const auto& [e, w] : weighted_edges(state)) {
      EdgeAcc& a = acc[e];
      a.max = std::max(a.max, w);
      a.integral += w * dur;
    }
    if (wfn == NodeWeightFn::kMeanDegree) {
      for (const auto& [id, s] : state.entries()) {
        if (s) degree_integral[id] += static_cast<double>(s->neighbor_count()) * dur;
      }
    }
    if (cur <= median && median < until) median_state = state;
    cur = until;
  };

  for (std::size_t i = 0; i < events.size();) {
    const Time t = events[i].time;
    if (t < start || t >= end_exclusive) {
      throw Error(ErrorCode::kInvalidConfig, "event outside collapse span");
    }
    credit(t);
    for (; i < events.size() && events[i].time == t; ++i) {
      if (events[i].kind == EventKind::kAddNode) universe.insert(events[i].subject);
      apply_event(state, events[i]);
    }
  }
  credit(end_exclusive);

  CollapsedGraph g;
  if (fn == CollapseFn::kMedian) {
    if (median_state) g.edges = weighted_edges(*median_state);
  } else {
    for (const auto& [e, a] : acc) {
      g.edges[e] = fn == CollapseFn::kUnionMax ? a.max : a.integral / length;
    }
  }
  std::map<NodeId, std::size_t> degree;
  for (const auto& [e, w] : g.edges) {
    ++degree[e.first];
    ++degree[e.second];
  }
  for (NodeId id : universe) {
    double w = 1.0;
    if (wfn == NodeWeightFn::kDegree) {
      auto it = degree.find(id);
      w = it == degree.end() ? 0.0 : static_cast<double>(it->second);
    } else if (wfn == NodeWeightFn::kMeanDegree) {
      auto it = degree_integral.find(id);
      w = it == degree_integral.end() ? 0.0 : it->second / length;
    }
    g.node_weight.emplace(id, w);
  }
  return g;
}

std::vector<std::size_t> PartitionMap::sizes() const {
  std::vector<std::size_t> out(k, 0);
  for (const auto& [id, pid] : assign) {
    if (pid < k) ++out[pid];
  }
  return out;
}

std::optional<std::uint32_t> PartitionMap::pid_of(NodeId id) const {
  auto it = assign.find(id);
  if (it == assign.end()) return std::nullopt;
  return it->second;
}

bool is_balanced(const PartitionMap& pm) {
  if (pm.k == 0) return false;
  const std::size_t n = pm.assign.size();
  const std::size_t lo = n / pm.k;
  const std::size_t hi = (n + pm.k - 1) / pm.k;
  for (const auto& [id, pid] : pm.assign) {
    if (pid >= pm.k) return false;
  }
  for (std::size_t s : pm.sizes()) {
    if (s < lo || s > hi) return false;
  }
  return true;
}

bool is_weight_balanced(const PartitionMap& pm, const CollapsedGraph& g) {
  if (pm.k == 0) return false;
  std::vector<double> w(pm.k, 0.0);
  double wmax = 0;
  for (const auto& [id, pid] : pm.assign) {
    auto it = g.node_weight.find(id);
    const double nw = it == g.node_weight.end() ? 0.0 : it->second;
    if (pid >= pm.k) return false;
    w[pid] += nw;
    wmax = std::max(wmax, nw);
  }
  const double target = g.total_node_weight() / pm.k;
  const double slack = wmax * (1 + 1e-9) + 1e-9;
  for (double x : w) {
    if (std::fabs(x - target) > slack) return false;
  }
  return true;
}

double edge_cut(const CollapsedGraph& g, const PartitionMap& pm) {
  double cut = 0;
  for (const auto& [e, w] : g.edges) {
    auto a = pm.pid_of(e.first);
    auto b = pm.pid_of(e.second);
    if (a && b && *a != *b) cut += w;
  }
  return cut;
}

std::uint32_t random_pid(NodeId id, std::uint32_t k, std::uint64_t seed) {
  if (k <= 1) return 0;
  // Must stay independent of the sid, mix64(id) % ns.
  return static_cast<std::uint32_t>(mix64(mix64(id) ^ seed) % k);
}

PartitionMap partition_random(const std::set<NodeId>& nids, std::uint32_t k,
                              std::uint64_t seed) {
  if (k == 0) throw Error(ErrorCode::kInfeasibleBalance, "partition count must be >= 1");
  PartitionMap pm;
  pm.k = k;
  for (NodeId id : nids) pm.assign.emplace_hint(pm.assign.end(), id, random_pid(id, k, seed));
  return pm;
}

namespace {

// Dense working form of a collapsed graph for the locality partitioner.
class LocalityWorker {
 public:
  LocalityWorker(const CollapsedGraph& g, std::uint32_t k, const LocalityOptions& opts)
      : k_(k), weighted_(opts.weighted) {
    for (const auto& [id, w] : g.node_weight) {
      index_.emplace(id, ids_.size());
      ids_.push_back(id);
      weight_.push_back(weighted_ ? w : 1.0);
    }
    adj_.resize(ids_.size());
    for (const auto& [e, w] : g.edges) {
      auto a = index_.find(e.first);
      auto b = index_.find(e.second);
      if (a == index_.end() || b == index_.end() || a->second == b->second) continue;
      adj_[a->second].emplace_back(b->second, w);
      adj_[b->second].emplace_back(a->second, w);
    }
    for (auto& list : adj_) std::sort(list.begin(), list.end());
    for (double w : weight_) {
      total_ += w;
      wmax_ = std::max(wmax_, w);
    }
    const std::size_t n = ids_.size();
    if (weighted_) {
      lo_ = total_ / k_ - wmax_;
      hi_ = total_ / k_ + wmax_;
    } else {
      lo_ = static_cast<double>(n / k_);
      hi_ = static_cast<double>((n + k_ - 1) / k_);
    }
    part_.assign(n, -1);
    part_weight_.assign(k_, 0.0);
    members_.resize(k_);
  }

  PartitionMap run(int max_passes) {
    grow();
    if (weighted_) repair();
    refine(max_passes);
    PartitionMap pm;
    pm.k = k_;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      pm.assign.emplace(ids_[i], static_cast<std::uint32_t>(part_[i]));
    }
    return pm;
  }

 private:
  std::size_t n() const { return ids_.size(); }

  void place(std::size_t v, int p) {
    if (part_[v] >= 0) {
      part_weight_[part_[v]] -= weight_[v];
      members_[part_[v]].erase(v);
    }
    part_[v] = p;
    part_weight_[p] += weight_[v];
    members_[p].insert(v);
  }

  double edge_weight(std::size_t u, std::size_t v) const {
    auto it = std::lower_bound(adj_[u].begin(), adj_[u].end(),
                               std::make_pair(v, -std::numeric_limits<double>::infinity()));
    return it != adj_[u].end() && it->first == v ? it->second : 0.0;
  }

  double connection(std::size_t v, int p) const {
    double c = 0;
    for (const auto& [u, w] : adj_[v]) {
      if (part_[u] == p) c += w;
    }
    return c;
  }

  // Next seed: unassigned node least tied to assigned nodes, then highest
  // degree, then lowest id.
  std::size_t pick_seed(const std::vector<double>& tied) const {
    std::size_t best = n();
    for (std::size_t v = 0; v < n(); ++v) {
      if (part_[v] >= 0) continue;
      if (best == n() || tied[v] < tied[best] ||
          (tied[v] == tied[best] && adj_[v].size() > adj_[best].size())) {
        best = v;
      }
    }
    return best;
  }

  void grow() {
    std::vector<double> tied(n(), 0.0);
    double remaining = total_;
    std::size_t unassigned = n();
    for (std::uint32_t r = 0; r < k_; ++r) {
      const int p = static_cast<int>(r);
      if (r + 1 == k_) {
        for (std::size_t v = 0; v < n(); ++v) {
          if (part_[v] < 0) place(v, p);
        }
        return;
      }
      // Unit mode uses exact floor/ceil counts; weighted mode an adaptive
      // share of what is left.
      const std::size_t count_target = n() / k_ + (r < n() % k_ ? 1 : 0);
      const double weight_target = remaining / static_cast<double>(k_ - r);
      auto full = [&](std::size_t count, double w) {
        if (unassigned <= static_cast<std::size_t>(k_ - r - 1)) return true;
        return weighted_ ? w >= weight_target : count >= count_target;
      };
      std::vector<double> gain(n(), 0.0);
      std::set<std::pair<double, std::size_t>> frontier;  // (-gain, v)
      std::size_t count = 0;
      double w = 0;
      auto add = [&](std::size_t v) {
        place(v, p);
        ++count;
        w += weight_[v];
        remaining -= weight_[v];
        --unassigned;
        for (const auto& [u, ew] : adj_[v]) {
          tied[u] += ew;
          if (part_[u] >= 0) continue;
          frontier.erase({-gain[u], u});
          gain[u] += ew;
          frontier.insert({-gain[u], u});
        }
      };
      while (!full(count, w)) {
        std::size_t v;
        if (frontier.empty()) {
          v = pick_seed(tied);
          if (v == n()) break;
        } else {
          v = frontier.begin()->second;
          frontier.erase(frontier.begin());
        }
        add(v);
      }
    }
  }

  bool fits(int p, double delta) const {
    const double w = part_weight_[p] + delta;
    const double eps = 1e-9 * (1 + std::fabs(hi_));
    return w >= lo_ - eps && w <= hi_ + eps;
  }

  // Weighted mode: move nodes from overweight to underweight parts until the
  // bound holds.
  void repair() {
    const std::size_t cap = n() * k_ + 16;
    for (std::size_t iter = 0; iter < cap; ++iter) {
      int heavy = 0, light = 0;
      for (int p = 0; p < static_cast<int>(k_); ++p) {
        if (part_weight_[p] > part_weight_[heavy]) heavy = p;
        if (part_weight_[p] < part_weight_[light]) light = p;
      }
      if (fits(heavy, 0) && fits(light, 0)) {
        bool ok = true;
        for (int p = 0; p < static_cast<int>(k_); ++p) ok = ok && fits(p, 0);
        if (ok) return;
      }
      const double excess = part_weight_[heavy] - part_weight_[light];
      std::size_t best = n();
      double best_conn = -1;
      for (std::size_t v : members_[heavy]) {
        if (weight_[v] <= 0 || weight_[v] >= excess) continue;
        const double c = connection(v, light);
        if (c > best_conn) {
          best = v;
          best_conn = c;
        }
      }
      if (best == n()) break;
      place(best, light);
    }
    for (int p = 0; p < static_cast<int>(k_); ++p) {
      if (!fits(p, 0)) {
        throw Error(ErrorCode::kInfeasibleBalance,
                    "cannot balance node weights across " + std::to_string(k_) +
                        " partitions");
      }
    }
  }

  void refine(int max_passes) {
    if (k_ < 2) return;
    constexpr double kEps = 1e-12;
    for (int pass = 0; pass < max_passes; ++pass) {
      bool improved = false;
      for (std::size_t u = 0; u < n(); ++u) {
        const int a = part_[u];
        std::map<int, double> conn;
        for (const auto& [v, w] : adj_[u]) conn[part_[v]] += w;
        const double internal = conn.count(a) ? conn[a] : 0.0;
        std::vector<std::pair<double, int>> targets;
        for (const auto& [b, c] : conn) {
          if (b != a && c - internal > kEps) targets.emplace_back(-(c - internal), b);
        }
        std::sort(targets.begin(), targets.end());
        for (const auto& [neg_gain, b] : targets) {
          const double gain = -neg_gain;
          if (fits(a, -weight_[u]) && fits(b, weight_[u])) {
            place(u, b);
            improved = true;
            break;
          }
          std::size_t best = n();
          double best_gain = kEps;
          for (std::size_t v : members_[b]) {
            double to_a = 0, inside = 0;
            for (const auto& [x, w] : adj_[v]) {
              if (part_[x] == a) to_a += w;
              if (part_[x] == b) inside += w;
            }
            const double g = gain + (to_a - inside) - 2 * edge_weight(u, v);
            if (g > best_gain &&
                fits(a, weight_[v] - weight_[u]) && fits(b, weight_[u] - weight_[v])) {
              best = v;
              best_gain = g;
            }
          }
          if (best != n()) {
            place(u, b);
            place(best, a);
            improved = true;
            break;
          }
        }
      }
      if (!improved) return;
    }
  }

  std::uint32_t k_;
  bool weighted_;
  std::vector<NodeId> ids_;
  std::map<NodeId, std::size_t> index_;
  std::vector<double> weight_;
  std::vector<std::vector<std::pair<std::size_t, double>>> adj_;
  double total_ = 0;
  double wmax_ = 0;
  double lo_ = 0;
  double hi_ = 0;
  std::vector<int> part_;
  std::vector<double> part_weight_;
  std::vector<std::set<std::size_t>> members_;
};

}  // namespace

PartitionMap partition_locality(const CollapsedGraph& g, std::uint32_t k,
                                const LocalityOptions& opts) {
  const std::size_t n = g.node_weight.size();
  if (k == 0 || k > n) {
    throw Error(ErrorCode::kInfeasibleBalance,
                "cannot split " + std::to_string(n) + " nodes into " +
                    std::to_string(k) + " non-empty partitions");
  }
  PartitionMap pm;
  pm.k = k;
  if (k == 1) {
    for (const auto& [id, w] : g.node_weight) pm.assign.emplace(id, 0);
    return pm;
  }
  if (k == n) {
    std::uint32_t p = 0;
    for (const auto& [id, w] : g.node_weight) pm.assign.emplace(id, p++);
    return pm;
  }
  return LocalityWorker(g, k, opts).run(opts.max_passes);
}

PartitionMap align_labels(const PartitionMap& fresh, const PartitionMap& prev) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> overlap;
  for (const auto& [id, pid] : fresh.assign) {
    auto old = prev.pid_of(id);
    if (old && *old < fresh.k) ++overlap[{pid, *old}];
  }
  std::vector<std::tuple<std::size_t, std::uint32_t, std::uint32_t>> pairs;
  for (const auto& [fp, c] : overlap) pairs.emplace_back(c, fp.first, fp.second);
  std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
    if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
    return std::make_pair(std::get<1>(x), std::get<2>(x)) <
           std::make_pair(std::get<1>(y), std::get<2>(y));
  });
  std::vector<std::optional<std::uint32_t>> rename(fresh.k);
  std::vector<bool> used(fresh.k, false);
  for (const auto& [c, fp, op] : pairs) {
    if (rename[fp] || used[op]) continue;
    rename[fp] = op;
    used[op] = true;
  }
  std::uint32_t next = 0;
  for (auto& r : rename) {
    if (r) continue;
    while (used[next]) ++next;
    r = next;
    used[next] = true;
  }
  PartitionMap out = fresh;
  for (auto& [id, pid] : out.assign) pid = *rename[pid];
  return out;
}

CollapsedGraph restrict_graph(const CollapsedGraph& g, const std::set<NodeId>& ids) {
  CollapsedGraph out;
  for (NodeId id : ids) {
    auto it = g.node_weight.find(id);
    out.node_weight.emplace(id, it == g.node_weight.end() ? 1.0 : it->second);
  }
  for (const auto& [e, w] : g.edges) {
    if (ids.contains(e.first) && ids.contains(e.second)) out.edges.emplace(e, w);
  }
  return out;
}

namespace {

std::uint32_t clamp_parts(std::uint32_t k, std::size_t universe) {
  return std::max<std::uint32_t>(
      1, std::min<std::uint32_t>(
             k, static_cast<std::uint32_t>(std::max<std::size_t>(universe, 1))));
}

}  // namespace

PartitionMap partition_span_locality(const std::optional<PartitionMap>& prev,
                                     std::uint32_t tsid,
                                     const std::set<NodeId>& universe,
                                     const CollapsedGraph& collapsed,
                                     const SpanPartitionParams& params) {
  PartitionMap pm;
  pm.k = clamp_parts(params.k, universe.size());
  if (!universe.empty()) {
    LocalityOptions opts;
    opts.weighted = params.weights != NodeWeightFn::kUnit;
    pm = partition_locality(restrict_graph(collapsed, universe), pm.k, opts);
    if (prev) pm = align_labels(pm, *prev);
  }
  pm.tsid = tsid;
  return pm;
}

PartitionMap repartition_for_span(const std::optional<PartitionMap>& prev,
                                  std::uint32_t tsid,
                                  const std::set<NodeId>& universe,
                                  const Delta& initial,
                                  std::span<const Event> events, Time start,
                                  Time end_exclusive,
                                  const SpanPartitionParams& params) {
  if (!params.locality) {
    PartitionMap pm = partition_random(universe, clamp_parts(params.k, universe.size()),
                                       params.seed);
    pm.tsid = tsid;
    return pm;
  }
  if (universe.empty()) return partition_span_locality(prev, tsid, universe, {}, params);
  return partition_span_locality(
      prev, tsid, universe,
      collapse(initial, events, start, end_exclusive, params.collapse, params.weights),
      params);
}

std::set<NodeId> frontier_of(const Delta& state, const std::set<NodeId>& members) {
  std::set<NodeId> out;
  for (NodeId id : members) {
    const NodeState* s = state.find(id);
    if (s == nullptr || !s->has_value()) continue;
    for (const auto& [key, _] : (*s)->edges) {
      if (!members.contains(key.neighbor)) out.insert(key.neighbor);
    }
  }
  return out;
}

std::map<std::uint32_t, AuxiliaryMicroDelta> build_auxiliary(const Delta& state,
                                                              const PartitionMap& pm) {
  std::map<std::uint32_t, std::set<NodeId>> members;
  for (std::uint32_t p = 0; p < pm.k; ++p) members[p];
  for (const auto& [id, pid] : pm.assign) members[pid].insert(id);
  std::map<std::uint32_t, AuxiliaryMicroDelta> out;
  for (const auto& [pid, ids] : members) {
    AuxiliaryMicroDelta aux;
    aux.owner = pid;
    for (NodeId f : frontier_of(state, ids)) {
      const NodeState* s = state.find(f);
      if (s != nullptr && s->has_value()) aux.nodes.put(f, *s);
    }
    out.emplace(pid, std::move(aux));
  }
  return out;
}

}  // namespace tgs
