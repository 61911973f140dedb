#include "tgs/retrieval.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include "tgs/error.hpp"
#include "tgs/event_log.hpp"
#include "tgs/keys.hpp"
#include "tgs/parallel.hpp"
#include "tgs/serialize.hpp"

namespace tgs {

NodeState NodeHistory::state_at(Time t) const {
  NodeState s = initial;
  for (const Event& e : events) {
    if (e.time > t) break;
    apply_to_endpoint(s, id, e, e.subject == id);
  }
  return s;
}

GraphS OneHopHistory::materialize(Time t) const {
  NodeState c = center.state_at(t);
  if (!c) return {};
  Delta d;
  std::set<NodeId> ball{center.id};
  d.put(center.id, std::move(c));
  for (const auto& [nb, intervals] : neighbors) {
    for (const auto& iv : intervals) {
      if (!iv.covers(t)) continue;
      ball.insert(nb);
      d.put(nb, iv.history.state_at(t));
      break;
    }
  }
  return induced_subgraph(d, ball);
}

Retriever::Retriever(const Tgi& tgi, std::size_t workers)
    : tgi_(&tgi), workers_(std::max<std::size_t>(workers, 1)) {}

namespace {

struct SnapshotTask {
  std::uint32_t sid = 0;
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  std::uint32_t micros = 0;
};

std::vector<SnapshotTask> snapshot_tasks(const TimeSpanRecord& span, std::uint32_t ns,
                                         std::size_t workers) {
  std::vector<SnapshotTask> tasks;
  for (std::uint32_t sid = 0; sid < ns; ++sid) {
    const std::uint32_t parts = sid < span.partitions.size() ? span.partitions[sid] : 1;
    const std::uint32_t chunks =
        static_cast<std::uint32_t>(std::clamp<std::size_t>(workers, 1, parts));
    for (std::uint32_t c = 0; c < chunks; ++c) {
      const std::uint32_t lo = static_cast<std::uint32_t>(std::uint64_t{parts} * c / chunks);
      const std::uint32_t hi =
          static_cast<std::uint32_t>(std::uint64_t{parts} * (c + 1) / chunks);
      tasks.push_back({sid, lo, c + 1 == chunks ? kAuxPidBase : hi, hi - lo});
    }
  }
  return tasks;
}

void add_counters(FetchCounters* dst, const FetchCounters& src) {
  if (dst) *dst += src;
}

}  // namespace

std::vector<Delta> Retriever::get_snapshot_by_shard(Time t, FetchCounters* counters) const {
  const std::uint32_t shards = tgi_->store().shard_count();
  std::vector<Delta> out(shards);
  auto s = tgi_->span_for(t);
  if (!s) return out;
  const TimeSpanRecord& span = tgi_->spans()[*s];
  const auto tasks = snapshot_tasks(span, tgi_->config().ns, workers_);
  std::vector<Delta> parts(tasks.size());
  std::vector<FetchCounters> stats(tasks.size());
  parallel_for(tasks.size(), workers_, [&](std::size_t i) {
    const SnapshotTask& task = tasks[i];
    parts[i] = tgi_->materialize(span, task.sid, task.lo, task.hi, t, &stats[i].reads);
    stats[i].micro_fetches = task.micros;
  });
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::uint32_t shard = placement_of(PlacementKey{span.tsid, tasks[i].sid}, shards);
    delta_sum_into(out[shard], parts[i]);
    add_counters(counters, stats[i]);
  }
  return out;
}

Delta Retriever::get_snapshot_delta(Time t, FetchCounters* counters) const {
  Delta out;
  for (const Delta& d : get_snapshot_by_shard(t, counters)) delta_sum_into(out, d);
  return out;
}

GraphS Retriever::get_snapshot(Time t, FetchCounters* counters) const {
  return GraphS::from_delta(get_snapshot_delta(t, counters));
}

namespace {

std::string fetch_record(const TgiStore& store, const DeltaKey& key, FetchCounters& c) {
  auto v = store.get_delta(key);
  if (!v) throw Error(ErrorCode::kInconsistentDelta, "version chain names a missing record");
  ++c.reads.records;
  c.reads.bytes += v->size();
  return std::move(*v);
}

std::uint8_t side_of(const Event& e, NodeId id) {
  return e.subject == id ? kMaskSubject : kMaskPeer;
}

}  // namespace

std::optional<StaticNode> Retriever::get_node_at(NodeId id, Time t,
                                                 FetchCounters* counters) const {
  auto s = tgi_->span_for(t);
  if (!s) return std::nullopt;
  const TimeSpanRecord& span = tgi_->spans()[*s];
  auto chain = tgi_->store().get_versions(id, span.tsid);
  if (!chain) return std::nullopt;

  const TreeShape shape = TreeShape::for_leaves(span.checkpts.size(), span.k);
  const std::size_t leaf = anchor_leaf(span, t);
  std::set<std::uint64_t> path;
  for (const auto& [level, index] : shape.path_to_leaf(leaf)) path.insert(shape.did(level, index));
  std::vector<DeltaKey> tree_keys;
  std::optional<DeltaKey> gap_key;
  for (const ChainPointer& p : *chain) {
    if (is_aux_pid(p.key.pid)) continue;
    if (is_eventlist_did(p.key.did)) {
      if (needs_events(span, t) && p.key.did == eventlist_did(leaf)) gap_key = p.key;
    } else if (path.contains(p.key.did)) {
      tree_keys.push_back(p.key);
    }
  }
  std::sort(tree_keys.begin(), tree_keys.end());

  FetchCounters local;
  local.micro_fetches = 1;
  NodeState state;
  for (const DeltaKey& key : tree_keys) {
    const Delta d = deserialize_delta(fetch_record(tgi_->store(), key, local));
    if (const NodeState* e = d.find(id)) state = *e;
  }
  if (gap_key) {
    for (const MaskedEvent& me :
         deserialize_masked_events(fetch_record(tgi_->store(), *gap_key, local))) {
      if (me.event.time > t) break;
      if (!me.event.touches(id)) continue;
      apply_to_endpoint(state, id, me.event, side_of(me.event, id) == kMaskSubject);
    }
  }
  add_counters(counters, local);
  return state;
}

NodeHistory Retriever::get_node_history(NodeId id, Time ts, Time te,
                                        FetchCounters* counters) const {
  return history_impl(id, ts, te, false, counters);
}

NodeHistory Retriever::get_node_history_closed(NodeId id, Time ts, Time te,
                                               FetchCounters* counters) const {
  return history_impl(id, ts, te, true, counters);
}

NodeHistory Retriever::history_impl(NodeId id, Time ts, Time te, bool closed,
                                    FetchCounters* counters) const {
  NodeHistory h;
  h.id = id;
  h.ts = ts;
  h.te = te;
  if (te < ts) return h;
  FetchCounters local;
  if (!closed || ts > 0) {
    auto init = get_node_at(id, closed ? ts - 1 : ts, &local);
    if (init) h.initial = std::move(*init);
  }
  auto in_range = [&](Time t) { return (closed ? t >= ts : t > ts) && t <= te; };

  const auto& spans = tgi_->spans();
  std::vector<DeltaKey> keys;
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const TimeSpanRecord& span = spans[s];
    if (span.start > te || span.end <= ts) continue;
    auto chain = tgi_->store().get_versions(id, span.tsid);
    if (!chain) continue;
    bool any = false;
    for (const ChainPointer& p : *chain) {
      if (is_aux_pid(p.key.pid) || !is_eventlist_did(p.key.did)) continue;
      const std::size_t gap = static_cast<std::size_t>(p.key.did / 2);
      const Time gap_hi = gap + 1 < span.checkpts.size() ? span.checkpts[gap + 1] : span.end;
      if (p.time > te || gap_hi < ts || (!closed && gap_hi == ts)) continue;
      keys.push_back(p.key);
      any = true;
    }
    if (any) ++local.micro_fetches;
  }

  std::vector<std::vector<MaskedEvent>> parts(keys.size());
  std::vector<FetchCounters> stats(keys.size());
  parallel_for(keys.size(), workers_, [&](std::size_t i) {
    for (MaskedEvent& me :
         deserialize_masked_events(fetch_record(tgi_->store(), keys[i], stats[i]))) {
      if (!in_range(me.event.time) || !me.event.touches(id)) continue;
      parts[i].push_back(std::move(me));
    }
  });
  for (std::size_t i = 0; i < keys.size(); ++i) {
    local += stats[i];
    for (MaskedEvent& me : parts[i]) {
      h.seqs.push_back(me.seq);
      h.events.push_back(std::move(me.event));
    }
  }
  add_counters(counters, local);
  return h;
}

GraphS Retriever::get_k_hop_snapshot_first(NodeId id, Time t, unsigned hops,
                                           FetchCounters* counters) const {
  const GraphS g = get_snapshot(t, counters);
  return induced_subgraph(g, k_hop_ball(g, id, hops));
}

GraphS Retriever::get_k_hop_expand(NodeId id, Time t, unsigned hops,
                                   FetchCounters* counters) const {
  auto s = tgi_->span_for(t);
  if (!s) return {};
  const TimeSpanRecord& span = tgi_->spans()[*s];

  struct Micro {
    std::uint32_t sid;
    std::uint32_t pid;
    bool with_aux;
    auto operator<=>(const Micro&) const = default;
  };
  std::map<NodeId, NodeState> known;
  std::set<std::pair<std::uint32_t, std::uint32_t>> fetched_home;
  std::set<std::pair<std::uint32_t, std::uint32_t>> fetched_aux;
  FetchCounters local;

  // Fetches the micro-partitions holding `ids` that are not yet known.
  auto ensure = [&](const std::set<NodeId>& ids, bool with_aux) {
    std::set<Micro> plan;
    for (NodeId n : ids) {
      if (known.contains(n)) continue;
      auto pid = tgi_->pid_of(n, span);
      if (!pid) {
        known.emplace(n, NodeState{});
        continue;
      }
      plan.insert({tgi_->sid_of(n), *pid, with_aux && span.aux});
    }
    std::vector<Micro> todo(plan.begin(), plan.end());
    std::vector<Delta> home(todo.size());
    std::vector<Delta> aux(todo.size());
    std::vector<FetchCounters> stats(todo.size());
    parallel_for(todo.size(), workers_, [&](std::size_t i) {
      const Micro& m = todo[i];
      if (!fetched_home.contains({m.sid, m.pid})) {
        home[i] = tgi_->materialize(span, m.sid, m.pid, m.pid + 1, t, &stats[i].reads);
        ++stats[i].micro_fetches;
      }
      if (m.with_aux && !fetched_aux.contains({m.sid, m.pid})) {
        aux[i] = tgi_->materialize(span, m.sid, kAuxPidBase + m.pid, kAuxPidBase + m.pid + 1, t,
                                   &stats[i].reads);
        ++stats[i].micro_fetches;
        ++stats[i].aux_fetches;
      }
    });
    for (std::size_t i = 0; i < todo.size(); ++i) {
      const Micro& m = todo[i];
      fetched_home.insert({m.sid, m.pid});
      if (m.with_aux) fetched_aux.insert({m.sid, m.pid});
      for (const auto& [n, st] : home[i].entries()) known.insert_or_assign(n, st);
      for (const auto& [n, st] : aux[i].entries()) known.emplace(n, st);
      local += stats[i];
    }
    for (NodeId n : ids) known.emplace(n, NodeState{});
  };

  ensure({id}, hops > 0);
  auto live = [&](NodeId n) -> const StaticNode* {
    auto it = known.find(n);
    return it != known.end() && it->second ? &*it->second : nullptr;
  };
  if (!live(id)) {
    add_counters(counters, local);
    return {};
  }
  std::set<NodeId> ball{id};
  std::set<NodeId> frontier{id};
  for (unsigned r = 1; r <= hops && !frontier.empty(); ++r) {
    std::set<NodeId> next;
    for (NodeId m : frontier) {
      const StaticNode* st = live(m);
      if (!st) continue;
      for (NodeId nb : neighbor_ids(*st)) {
        if (ball.insert(nb).second) next.insert(nb);
      }
    }
    ensure(next, r < hops);
    frontier = std::move(next);
  }

  Delta d;
  for (NodeId n : ball) {
    if (const StaticNode* st = live(n)) d.put_node(*st);
  }
  add_counters(counters, local);
  return induced_subgraph(d, ball);
}

GraphS Retriever::get_k_hop(NodeId id, Time t, unsigned hops, KHopStrategy strategy,
                            FetchCounters* counters) const {
  const bool expand = strategy == KHopStrategy::kExpand ||
                      (strategy == KHopStrategy::kAuto && hops <= 2);
  return expand ? get_k_hop_expand(id, t, hops, counters)
                : get_k_hop_snapshot_first(id, t, hops, counters);
}

OneHopHistory Retriever::get_1hop_history(NodeId id, Time ts, Time te,
                                          FetchCounters* counters) const {
  OneHopHistory out;
  out.center = get_node_history(id, ts, te, counters);
  if (!out.center.known() || te < ts) return out;

  struct Pending {
    NodeId nb;
    Time from;
    Time to;
    bool open;
  };
  std::vector<Pending> intervals;
  std::map<NodeId, Time> open;
  NodeState state = out.center.initial;
  auto neighbors = [](const NodeState& s) {
    return s ? neighbor_ids(*s) : std::set<NodeId>{};
  };
  for (NodeId nb : neighbors(state)) open.emplace(nb, ts);
  const auto& ev = out.center.events;
  for (std::size_t i = 0; i < ev.size();) {
    const Time t = ev[i].time;
    for (; i < ev.size() && ev[i].time == t; ++i) {
      apply_to_endpoint(state, id, ev[i], ev[i].subject == id);
    }
    const std::set<NodeId> now = neighbors(state);
    for (auto it = open.begin(); it != open.end();) {
      if (now.contains(it->first)) {
        ++it;
        continue;
      }
      intervals.push_back({it->first, it->second, t, false});
      it = open.erase(it);
    }
    for (NodeId nb : now) open.emplace(nb, t);
  }
  for (const auto& [nb, from] : open) intervals.push_back({nb, from, te, true});
  std::sort(intervals.begin(), intervals.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.nb, a.from) < std::tie(b.nb, b.from);
  });

  std::vector<NodeHistory> hist(intervals.size());
  std::vector<FetchCounters> stats(intervals.size());
  parallel_for(intervals.size(), workers_, [&](std::size_t i) {
    const Pending& p = intervals[i];
    hist[i] = Retriever(*tgi_, 1).get_node_history(p.nb, p.from, p.to, &stats[i]);
  });
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const Pending& p = intervals[i];
    out.neighbors[p.nb].push_back({p.from, p.to, p.open, std::move(hist[i])});
    add_counters(counters, stats[i]);
  }
  return out;
}

std::vector<GraphS> Retriever::get_neighborhood_versions(NodeId id, unsigned hops,
                                                         std::span<const Time> times,
                                                         KHopStrategy strategy,
                                                         FetchCounters* counters) const {
  std::vector<GraphS> out;
  out.reserve(times.size());
  for (Time t : times) out.push_back(get_k_hop(id, t, hops, strategy, counters));
  return out;
}

namespace {

void render_node(std::ostream& out, const StaticNode& n) {
  out << "node\t" << n.id << '\n';
  for (const auto& [k, v] : n.attrs) out << "attr\t" << n.id << '\t' << k << '\t' << v << '\n';
  for (const auto& [key, attrs] : n.edges) {
    out << "edge\t" << n.id << '\t' << key.neighbor << '\t' << to_string(key.direction) << '\n';
    for (const auto& [k, v] : attrs) {
      out << "edge_attr\t" << n.id << '\t' << key.neighbor << '\t' << to_string(key.direction)
          << '\t' << k << '\t' << v << '\n';
    }
  }
}

void render_history_to(std::ostream& out, const NodeHistory& h) {
  out << "history\t" << h.id << '\t' << h.ts << '\t' << h.te << '\n';
  if (h.initial) {
    render_node(out, *h.initial);
  } else {
    out << "absent\t" << h.id << '\n';
  }
  for (const Event& e : h.events) out << format_event(e) << '\n';
}

}  // namespace

std::string render_graph(const GraphS& g) {
  std::ostringstream out;
  for (const auto& [_, n] : g.nodes) render_node(out, n);
  return out.str();
}

std::string render_history(const NodeHistory& h) {
  std::ostringstream out;
  render_history_to(out, h);
  return out.str();
}

std::string render_one_hop_history(const OneHopHistory& h) {
  std::ostringstream out;
  render_history_to(out, h.center);
  for (const auto& [nb, intervals] : h.neighbors) {
    for (const auto& iv : intervals) {
      out << "adjacent\t" << nb << '\t' << iv.from << '\t' << iv.to << '\t'
          << (iv.adjacent_at_end ? "open" : "closed") << '\n';
      render_history_to(out, iv.history);
    }
  }
  return out.str();
}

}  // namespace tgs
