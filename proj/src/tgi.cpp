#include "tgs/tgi.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "tgs/error.hpp"
#include "tgs/event_log.hpp"
#include "tgs/hash.hpp"
#include "tgs/parallel.hpp"

namespace tgs {

// ---- IndexConfig ------------------------------------------------------------

void IndexConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidConfig, what);
  };
  need(ts_events >= 1, "ts_events must be >= 1");
  need(ns >= 1, "ns must be >= 1");
  need(l >= 1, "l must be >= 1");
  need(psize >= 1, "psize must be >= 1");
  need(k >= 1, "k must be >= 1");
  need(build_workers >= 1, "build_workers must be >= 1");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_uint(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::kInvalidConfig,
                "bad value for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::kInvalidConfig,
              "bad value for " + std::string(key) + ": '" + std::string(v) + "'");
}

}  // namespace

IndexConfig IndexConfig::parse(std::string_view text) {
  IndexConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidConfig,
                  "config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view v = trim(line.substr(eq + 1));
    if (key == "ts_events") {
      cfg.ts_events = parse_uint<std::uint64_t>(key, v);
    } else if (key == "ns") {
      cfg.ns = parse_uint<std::uint32_t>(key, v);
    } else if (key == "l") {
      cfg.l = parse_uint<std::uint32_t>(key, v);
    } else if (key == "psize") {
      cfg.psize = parse_uint<std::uint32_t>(key, v);
    } else if (key == "k") {
      cfg.k = parse_uint<std::uint32_t>(key, v);
    } else if (key == "partitioning") {
      if (v == "random") {
        cfg.partitioning = PartitioningMode::kRandom;
      } else if (v == "locality") {
        cfg.partitioning = PartitioningMode::kLocality;
      } else {
        throw Error(ErrorCode::kInvalidConfig, "partitioning must be random or locality");
      }
    } else if (key == "replicate_1hop") {
      cfg.replicate_1hop = parse_bool(key, v);
    } else if (key == "seed") {
      cfg.seed = parse_uint<std::uint64_t>(key, v);
    } else if (key == "collapse") {
      auto f = parse_collapse_fn(v);
      if (!f) throw Error(ErrorCode::kInvalidConfig, "collapse must be median, union-max or union-mean");
      cfg.collapse = *f;
    } else if (key == "node_weights") {
      auto f = parse_node_weight_fn(v);
      if (!f) throw Error(ErrorCode::kInvalidConfig, "node_weights must be unit, degree or mean-degree");
      cfg.node_weights = *f;
    } else if (key == "compress") {
      cfg.compress = parse_bool(key, v);
    } else if (key == "build_workers") {
      cfg.build_workers = parse_uint<std::uint32_t>(key, v);
    } else {
      throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + std::string(key) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::string IndexConfig::to_text() const {
  std::ostringstream out;
  out << "ts_events=" << ts_events << '\n'
      << "ns=" << ns << '\n'
      << "l=" << l << '\n'
      << "psize=" << psize << '\n'
      << "k=" << k << '\n'
      << "partitioning="
      << (partitioning == PartitioningMode::kLocality ? "locality" : "random") << '\n'
      << "replicate_1hop=" << (replicate_1hop ? "true" : "false") << '\n'
      << "seed=" << seed << '\n'
      << "collapse=" << to_string(collapse) << '\n'
      << "node_weights=" << to_string(node_weights) << '\n'
      << "compress=" << (compress ? "true" : "false") << '\n'
      << "build_workers=" << build_workers << '\n';
  return out.str();
}

// ---- TreeShape --------------------------------------------------------------

TreeShape TreeShape::for_leaves(std::size_t leaves, std::uint32_t k) {
  TreeShape t;
  leaves = std::max<std::size_t>(leaves, 1);
  t.arity_ = k >= 2 ? k : static_cast<std::uint32_t>(std::max<std::size_t>(leaves, 2));
  std::vector<std::size_t> bottom_up{leaves};
  while (bottom_up.back() > 1) {
    bottom_up.push_back((bottom_up.back() + t.arity_ - 1) / t.arity_);
  }
  t.levels_.assign(bottom_up.rbegin(), bottom_up.rend());
  std::size_t off = 0;
  for (std::size_t s : t.levels_) {
    t.offsets_.push_back(off);
    off += s;
  }
  return t;
}

std::size_t TreeShape::node_count() const {
  return offsets_.back() + levels_.back();
}

std::uint64_t TreeShape::did(std::size_t level, std::size_t index) const {
  return 2 * static_cast<std::uint64_t>(offsets_[level] + index);
}

std::size_t TreeShape::first_leaf(std::size_t level, std::size_t index) const {
  std::size_t leaf = index;
  for (std::size_t l = level; l + 1 < levels_.size(); ++l) leaf *= arity_;
  return leaf;
}

std::vector<std::pair<std::size_t, std::size_t>> TreeShape::path_to_leaf(
    std::size_t leaf) const {
  std::vector<std::pair<std::size_t, std::size_t>> path(levels_.size());
  std::size_t index = leaf;
  for (std::size_t l = levels_.size(); l-- > 0;) {
    path[l] = {l, index};
    index /= arity_;
  }
  return path;
}

std::size_t anchor_leaf(const TimeSpanRecord& span, Time t) {
  if (span.checkpts.size() <= 1) return 0;
  auto it = std::upper_bound(span.checkpts.begin() + 1, span.checkpts.end(), t);
  return static_cast<std::size_t>(it - span.checkpts.begin()) - 1;
}

bool needs_events(const TimeSpanRecord& span, Time t) {
  const std::size_t j = anchor_leaf(span, t);
  return j == 0 || span.checkpts[j] != t;
}

std::vector<DeltaRecord> read_micro_range(const TgiStore& store, std::uint32_t tsid,
                                          std::uint32_t sid, std::uint64_t did,
                                          std::uint32_t pid_lo, std::uint32_t pid_hi,
                                          ReadCounters* counters) {
  if (pid_lo >= pid_hi) return {};
  auto recs = store.scan_delta_range(DeltaKey{tsid, sid, did, pid_lo},
                                     DeltaKey{tsid, sid, did, pid_hi});
  if (counters) {
    for (const auto& r : recs) {
      ++counters->records;
      if (is_aux_pid(r.key.pid)) ++counters->aux_records;
      counters->bytes += r.dval.size();
    }
  }
  return recs;
}

std::vector<MaskedEvent> merge_masked(std::vector<std::vector<MaskedEvent>> parts) {
  std::vector<MaskedEvent> all;
  for (auto& p : parts) {
    all.insert(all.end(), std::make_move_iterator(p.begin()),
               std::make_move_iterator(p.end()));
  }
  std::sort(all.begin(), all.end(),
            [](const MaskedEvent& a, const MaskedEvent& b) { return a.seq < b.seq; });
  std::vector<MaskedEvent> out;
  for (auto& me : all) {
    if (!out.empty() && out.back().seq == me.seq) {
      out.back().mask |= me.mask;
    } else {
      out.push_back(std::move(me));
    }
  }
  return out;
}

// ---- Build ------------------------------------------------------------------

namespace {

struct SpanInput {
  std::uint32_t tsid = 0;
  std::span<const Event> events;  // normalized
  std::uint64_t first_seq = 0;
  Time start = 0;
  Time end = 0;
  std::vector<Time> checkpts;
  // gap_begin[j] is the first event index of gap j; gap j ends where gap j+1
  // begins, the last at events.size().
  std::vector<std::size_t> gap_begin;
  // Full graph state at each leaf, tombstones for nodes deleted within the
  // span.
  std::vector<Delta> leaf_state;
};

struct SidOutput {
  std::vector<DeltaRecord> records;
  std::map<NodeId, std::vector<ChainPointer>> chains;
  std::vector<MicroPartitionRecord> micro;
};

std::vector<Time> make_checkpoints(std::span<const Event> ev, std::uint32_t l) {
  std::vector<Time> cps{ev.front().time};
  const Time end = ev.back().time;
  for (std::size_t q = l; q <= ev.size(); q += l) {
    const Time c = ev[q - 1].time;
    if (c == end) break;
    if (cps.size() > 1 && cps.back() == c) continue;
    cps.push_back(c);
  }
  return cps;
}

Delta entries_for(const Delta& full, const std::set<NodeId>& ids, DeltaKind kind) {
  Delta::Entries out;
  for (NodeId id : ids) {
    const NodeState* s = full.find(id);
    out.emplace_hint(out.end(), id, s ? *s : NodeState{});
  }
  return Delta(std::move(out), kind);
}

// Writes one intersection tree over `leaves`, split by pid. `chain` receives
// one pointer per (node, record) when set.
void write_tree(const SpanInput& in, std::uint32_t sid, const std::vector<Delta>& leaves,
                const std::function<std::uint32_t(NodeId)>& pid_of, std::uint32_t pid_base,
                std::uint32_t arity, bool compress, SidOutput& out, bool chains) {
  const TreeShape shape = TreeShape::for_leaves(leaves.size(), arity);
  std::vector<std::vector<Delta>> nodes(shape.levels());
  nodes.back() = leaves;
  for (std::size_t level = shape.levels() - 1; level-- > 0;) {
    nodes[level].resize(shape.level_size(level));
    for (std::size_t i = 0; i < shape.level_size(level); ++i) {
      const std::size_t lo = i * shape.arity();
      const std::size_t hi = std::min(lo + shape.arity(), nodes[level + 1].size());
      Delta acc = nodes[level + 1][lo];
      for (std::size_t c = lo + 1; c < hi; ++c) acc = delta_intersect(acc, nodes[level + 1][c]);
      acc.set_provenance(DeltaKind::kDerived);
      nodes[level][i] = std::move(acc);
    }
  }
  for (std::size_t level = 0; level < shape.levels(); ++level) {
    for (std::size_t i = 0; i < shape.level_size(level); ++i) {
      const Delta stored =
          level == 0 ? nodes[0][0] : delta_diff(nodes[level][i], nodes[level - 1][i / shape.arity()]);
      std::map<std::uint32_t, Delta::Entries> split;
      for (const auto& [id, state] : stored.entries()) split[pid_of(id)].emplace(id, state);
      const Time ptime = in.checkpts[shape.first_leaf(level, i)];
      for (auto& [pid, entries] : split) {
        const DeltaKey key{in.tsid, sid, shape.did(level, i), pid_base + pid};
        if (chains) {
          for (const auto& [id, _] : entries) out.chains[id].push_back({ptime, key});
        }
        Delta micro(std::move(entries),
                    level == 0 ? DeltaKind::kSnapshot : DeltaKind::kDerived);
        out.records.push_back({key, serialize_delta(micro, compress)});
      }
    }
  }
}

SidOutput build_sid(const SpanInput& in, std::uint32_t sid, const std::set<NodeId>& universe,
                    const PartitionMap& pm, const IndexConfig& cfg, bool aux) {
  SidOutput out;
  auto pid_of = [&](NodeId id) { return pm.assign.at(id); };
  const bool compress = cfg.compress;

  std::vector<Delta> leaves;
  leaves.reserve(in.leaf_state.size());
  for (const Delta& full : in.leaf_state) {
    leaves.push_back(entries_for(full, universe, DeltaKind::kSnapshot));
  }
  write_tree(in, sid, leaves, pid_of, 0, cfg.k, compress, out, true);

  const std::size_t gaps = in.checkpts.size();
  auto gap_range = [&](std::size_t j) {
    const std::size_t b = in.gap_begin[j];
    const std::size_t e = j + 1 < gaps ? in.gap_begin[j + 1] : in.events.size();
    return std::make_pair(b, e);
  };

  for (std::size_t j = 0; j < gaps; ++j) {
    const auto [b, e] = gap_range(j);
    std::map<std::uint32_t, std::vector<MaskedEvent>> per_pid;
    for (std::size_t x = b; x < e; ++x) {
      const Event& ev = in.events[x];
      const std::uint64_t seq = in.first_seq + x;
      auto add = [&](NodeId id, std::uint8_t bit) {
        auto& list = per_pid[pid_of(id)];
        if (!list.empty() && list.back().seq == seq) {
          list.back().mask |= bit;
        } else {
          list.push_back({seq, ev, bit});
        }
      };
      if (universe.contains(ev.subject)) add(ev.subject, kMaskSubject);
      if (is_edge_event(ev.kind) && universe.contains(ev.peer)) add(ev.peer, kMaskPeer);
    }
    for (const auto& [pid, list] : per_pid) {
      const DeltaKey key{in.tsid, sid, eventlist_did(j), pid};
      std::map<NodeId, Time> first_touch;
      for (const auto& me : list) {
        if (me.mask & kMaskSubject) first_touch.emplace(me.event.subject, me.event.time);
        if (me.mask & kMaskPeer) first_touch.emplace(me.event.peer, me.event.time);
      }
      for (const auto& [id, t] : first_touch) out.chains[id].push_back({t, key});
      out.records.push_back({key, serialize_masked_events(list, compress)});
    }
  }

  if (cfg.partitioning == PartitioningMode::kLocality) {
    for (const auto& [id, pid] : pm.assign) out.micro.push_back({id, in.tsid, pid});
  }

  if (aux) {
    std::vector<std::set<NodeId>> members(pm.k);
    for (const auto& [id, pid] : pm.assign) members[pid].insert(id);
    for (std::uint32_t p = 0; p < pm.k; ++p) {
      const std::set<NodeId>& mine = members[p];
      std::vector<std::set<NodeId>> frontier(gaps);
      std::vector<Delta> aux_leaves;
      for (std::size_t j = 0; j < gaps; ++j) {
        frontier[j] = frontier_of(in.leaf_state[j], mine);
        const auto [b, e] = gap_range(j);
        for (std::size_t x = b; x < e; ++x) {
          const Event& ev = in.events[x];
          if (ev.kind != EventKind::kAddEdge) continue;
          const bool s_in = mine.contains(ev.subject);
          const bool p_in = mine.contains(ev.peer);
          if (s_in && !p_in) frontier[j].insert(ev.peer);
          if (p_in && !s_in) frontier[j].insert(ev.subject);
        }
        aux_leaves.push_back(entries_for(in.leaf_state[j], frontier[j], DeltaKind::kSnapshot));
      }
      write_tree(in, sid, aux_leaves, [](NodeId) { return 0u; }, kAuxPidBase + p, cfg.k,
                 compress, out, false);
      for (std::size_t j = 0; j < gaps; ++j) {
        const auto [b, e] = gap_range(j);
        std::vector<MaskedEvent> list;
        for (std::size_t x = b; x < e; ++x) {
          const Event& ev = in.events[x];
          std::uint8_t mask = 0;
          if (frontier[j].contains(ev.subject)) mask |= kMaskSubject;
          if (is_edge_event(ev.kind) && frontier[j].contains(ev.peer)) mask |= kMaskPeer;
          if (mask) list.push_back({in.first_seq + x, ev, mask});
        }
        if (list.empty()) continue;
        out.records.push_back({DeltaKey{in.tsid, sid, eventlist_did(j), kAuxPidBase + p},
                               serialize_masked_events(list, compress)});
      }
    }
  }
  return out;
}

}  // namespace

std::uint32_t Tgi::sid_of(NodeId id) const {
  if (cfg_.ns <= 1) return 0;
  return static_cast<std::uint32_t>(mix64(id) % cfg_.ns);
}

std::optional<std::uint32_t> Tgi::pid_of(NodeId id, const TimeSpanRecord& span) const {
  if (span.mode == PartitioningMode::kLocality) {
    return store_->get_micropartition(id, span.tsid);
  }
  const std::uint32_t sid = sid_of(id);
  const std::uint32_t parts = sid < span.partitions.size() ? span.partitions[sid] : 1;
  return random_pid(id, parts, span.seed);
}

std::optional<std::size_t> Tgi::span_for(Time t) const {
  auto it = std::upper_bound(spans_.begin(), spans_.end(), t,
                             [](Time x, const TimeSpanRecord& s) { return x < s.start; });
  if (it == spans_.begin()) return std::nullopt;
  return static_cast<std::size_t>(it - spans_.begin()) - 1;
}

void Tgi::append_spans(std::span<const Event> ev, std::uint64_t first_seq,
                       const Delta& prior) {
  TgiStore::Epoch epoch = store_->begin_epoch();
  if (spans_.empty() && meta_.tscount == 0) epoch.put_config(cfg_.to_text());

  const bool locality = cfg_.partitioning == PartitioningMode::kLocality;
  const bool aux = locality && cfg_.replicate_1hop;
  std::vector<std::optional<PartitionMap>> prev(cfg_.ns);
  if (locality && !spans_.empty()) {
    const std::uint32_t last = spans_.back().tsid;
    for (const auto& rec : store_->micropartitions(last)) {
      auto& pm = prev[sid_of(rec.nid)];
      if (!pm) {
        pm.emplace();
        pm->tsid = last;
        pm->k = spans_.back().partitions[sid_of(rec.nid)];
      }
      pm->assign.emplace(rec.nid, rec.pid);
    }
  }

  Delta state = prior.materialized();
  std::vector<TimeSpanRecord> added;
  std::uint32_t tsid = static_cast<std::uint32_t>(spans_.size());
  for (std::size_t i = 0; i < ev.size(); ++tsid) {
    std::size_t j = std::min<std::size_t>(i + cfg_.ts_events, ev.size());
    while (j < ev.size() && ev[j].time == ev[j - 1].time) ++j;

    SpanInput in;
    in.tsid = tsid;
    in.events = ev.subspan(i, j - i);
    in.first_seq = first_seq + i;
    in.start = in.events.front().time;
    in.end = in.events.back().time;
    in.checkpts = make_checkpoints(in.events, cfg_.l);

    std::vector<std::set<NodeId>> universe(cfg_.ns);
    for (const auto& [id, s] : state.entries()) universe[sid_of(id)].insert(id);
    for (const Event& e : in.events) {
      universe[sid_of(e.subject)].insert(e.subject);
      if (is_edge_event(e.kind)) universe[sid_of(e.peer)].insert(e.peer);
    }

    in.leaf_state.push_back(state);
    in.gap_begin.push_back(0);
    std::size_t x = 0;
    for (std::size_t c = 1; c < in.checkpts.size(); ++c) {
      while (x < in.events.size() && in.events[x].time <= in.checkpts[c]) {
        apply_event(state, in.events[x++]);
      }
      in.leaf_state.push_back(state);
      in.gap_begin.push_back(x);
    }
    for (; x < in.events.size(); ++x) apply_event(state, in.events[x]);

    std::vector<std::uint32_t> parts(cfg_.ns);
    std::vector<PartitionMap> maps(cfg_.ns);
    std::optional<CollapsedGraph> collapsed;
    for (std::uint32_t sid = 0; sid < cfg_.ns; ++sid) {
      const std::size_t n = universe[sid].size();
      parts[sid] = static_cast<std::uint32_t>(std::max<std::size_t>(1, (n + cfg_.psize - 1) / cfg_.psize));
      SpanPartitionParams params;
      params.locality = locality;
      params.k = parts[sid];
      params.seed = cfg_.seed;
      params.collapse = cfg_.collapse;
      params.weights = cfg_.node_weights;
      if (!locality || n == 0) {
        maps[sid] = partition_random(universe[sid], parts[sid], cfg_.seed);
        maps[sid].tsid = tsid;
        continue;
      }
      if (!collapsed) {
        collapsed = collapse(in.leaf_state.front(), in.events, in.start, in.end + 1,
                             cfg_.collapse, cfg_.node_weights);
      }
      maps[sid] = partition_span_locality(prev[sid], tsid, universe[sid], *collapsed, params);
      parts[sid] = maps[sid].k;
    }

    std::vector<SidOutput> outputs(cfg_.ns);
    parallel_for(cfg_.ns, cfg_.build_workers, [&](std::size_t sid) {
      if (universe[sid].empty()) return;
      outputs[sid] = build_sid(in, static_cast<std::uint32_t>(sid), universe[sid], maps[sid],
                               cfg_, aux);
    });
    for (auto& o : outputs) {
      for (const auto& r : o.records) epoch.put_delta(r);
      for (auto& [id, chain] : o.chains) {
        std::sort(chain.begin(), chain.end());
        epoch.put_versions(id, tsid, chain);
      }
      for (const auto& m : o.micro) epoch.put_micropartition(m);
    }

    TimeSpanRecord rec;
    rec.tsid = tsid;
    rec.start = in.start;
    rec.end = in.end;
    rec.checkpts = in.checkpts;
    rec.k = cfg_.k;
    rec.df = cfg_.l;
    rec.partitions = parts;
    rec.first_seq = in.first_seq;
    rec.event_count = in.events.size();
    rec.mode = cfg_.partitioning;
    rec.aux = aux;
    rec.seed = cfg_.seed;
    epoch.put_timespan(rec);
    added.push_back(rec);

    for (std::uint32_t sid = 0; sid < cfg_.ns; ++sid) {
      if (locality) prev[sid] = maps[sid];
    }
    state = state.materialized();
    i = j;
  }

  GraphMetaRecord meta = meta_;
  if (!added.empty()) {
    if (spans_.empty()) meta.start = added.front().start;
    meta.end = added.back().end;
  }
  meta.tscount = static_cast<std::uint32_t>(spans_.size() + added.size());
  epoch.put_graph_meta(meta);
  store_->commit(std::move(epoch));
  meta_ = meta;
  spans_.insert(spans_.end(), added.begin(), added.end());
}

Tgi Tgi::build(TgiStore& store, std::span<const Event> log, const IndexConfig& cfg) {
  cfg.validate();
  if (store.get_graph_meta()) {
    throw Error(ErrorCode::kRefuseOverwrite, "store already holds an index");
  }
  NormalizedLog norm = normalize_log(log);
  Tgi tgi(store);
  tgi.cfg_ = cfg;
  tgi.meta_.events = log.size();
  tgi.meta_.normalized_events = norm.events.size();
  tgi.append_spans(norm.events, 0, Delta{});
  return tgi;
}

void Tgi::reload() {
  auto text = store_->get_config();
  cfg_ = text ? IndexConfig::parse(*text) : IndexConfig{};
  meta_ = store_->get_graph_meta().value_or(GraphMetaRecord{});
  spans_ = store_->timespans();
}

Tgi Tgi::open(TgiStore& store) {
  if (!store.get_graph_meta()) {
    throw Error(ErrorCode::kNotFound, "store holds no index");
  }
  Tgi tgi(store);
  tgi.reload();
  return tgi;
}

void Tgi::update(std::span<const Event> batch) {
  if (batch.empty()) return;
  if (!spans_.empty()) {
    for (const Event& e : batch) {
      if (e.time <= meta_.end) {
        throw Error(ErrorCode::kOutOfOrderBatch,
                    "batch event at t=" + std::to_string(e.time) +
                        " is not after index end t=" + std::to_string(meta_.end));
      }
    }
  }
  const Delta prior = spans_.empty() ? Delta{} : state_at(meta_.end);
  NormalizedLog norm = normalize_log(batch, prior);
  const std::uint64_t first_seq = meta_.normalized_events;
  const GraphMetaRecord before = meta_;
  meta_.events += batch.size();
  meta_.normalized_events += norm.events.size();
  try {
    append_spans(norm.events, first_seq, prior);
  } catch (...) {
    meta_ = before;
    reload();
    throw;
  }
}

Delta Tgi::materialize(const TimeSpanRecord& span, std::uint32_t sid, std::uint32_t pid_lo,
                       std::uint32_t pid_hi, Time t, ReadCounters* counters) const {
  const TreeShape shape = TreeShape::for_leaves(span.checkpts.size(), span.k);
  const std::size_t leaf = anchor_leaf(span, t);
  Delta state;
  for (const auto& [level, index] : shape.path_to_leaf(leaf)) {
    for (const auto& rec : read_micro_range(*store_, span.tsid, sid, shape.did(level, index),
                                            pid_lo, pid_hi, counters)) {
      delta_sum_into(state, deserialize_delta(rec.dval));
    }
  }
  if (needs_events(span, t)) {
    std::vector<std::vector<MaskedEvent>> parts;
    for (const auto& rec : read_micro_range(*store_, span.tsid, sid, eventlist_did(leaf),
                                            pid_lo, pid_hi, counters)) {
      parts.push_back(deserialize_masked_events(rec.dval));
    }
    for (const auto& me : merge_masked(std::move(parts))) {
      if (me.event.time > t) break;
      apply_masked(state, me.event, me.mask);
    }
  }
  return state;
}

Delta Tgi::state_at(Time t) const {
  auto s = span_for(t);
  if (!s) return Delta{};
  Delta out;
  for (std::uint32_t sid = 0; sid < cfg_.ns; ++sid) {
    delta_sum_into(out, materialize(spans_[*s], sid, 0, kAuxPidBase, t));
  }
  return out.materialized();
}

IndexStats Tgi::describe() const {
  IndexStats st;
  st.meta = meta_;
  for (const auto& span : spans_) {
    const TreeShape shape = TreeShape::for_leaves(span.checkpts.size(), span.k);
    SpanStats s;
    s.tsid = span.tsid;
    s.start = span.start;
    s.end = span.end;
    s.checkpoints = span.checkpts;
    s.tree_height = shape.height();
    s.tree_nodes = shape.node_count();
    s.events = span.event_count;
    s.partitions = span.partitions;
    st.spans.push_back(std::move(s));
  }
  const BackendStats d = store_->delta_stats();
  const BackendStats m = store_->meta_stats();
  st.delta_records = d.records;
  st.delta_bytes = d.value_bytes;
  st.meta_records = m.records;
  st.meta_bytes = m.value_bytes;
  return st;
}

}  // namespace tgs
