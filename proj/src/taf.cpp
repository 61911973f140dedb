#include "tgs/taf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iterator>
#include <ostream>
#include <utility>

#include "tgs/error.hpp"
#include "tgs/keys.hpp"
#include "tgs/parallel.hpp"

namespace tgs {

namespace {

Error out_of_span(Time t, Time ts, Time te) {
  return Error(ErrorCode::kOutOfSpan, "t=" + std::to_string(t) + " outside [" +
                                          std::to_string(ts) + ", " + std::to_string(te) + ")");
}

void apply_member_event(Delta& state, const std::set<NodeId>& universe, const Event& e) {
  std::uint8_t mask = 0;
  if (universe.contains(e.subject)) mask |= kMaskSubject;
  if (is_edge_event(e.kind) && universe.contains(e.peer)) mask |= kMaskPeer;
  apply_masked(state, e, mask);
}

std::vector<Time> sorted_unique(std::vector<Time> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

// ---- Operands ---------------------------------------------------------------

Delta TemporalMember::state_at(Time t) const {
  if (t < ts || t >= te) throw out_of_span(t, ts, te);
  Delta d = initial;
  for (const Event& e : events) {
    if (e.time > t) break;
    apply_member_event(d, universe, e);
  }
  return d.materialized();
}

std::vector<Time> TemporalMember::change_points() const {
  std::vector<Time> out{ts};
  for (const Event& e : events) {
    if (out.back() != e.time) out.push_back(e.time);
  }
  return out;
}

const StaticNode* StaticMember::node() const {
  const NodeState* s = state.find(id);
  return s && *s ? &**s : nullptr;
}

std::vector<Time> uniform_sample(Time ts, Time te, std::size_t n) {
  std::vector<Time> out;
  if (te <= ts || n == 0) return out;
  const unsigned __int128 width = te - ts;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(ts + static_cast<Time>(width * i / n));
  }
  return sorted_unique(std::move(out));
}

TemporalSet::TemporalSet(Time ts, Time te, unsigned hops, std::vector<TemporalMember> members)
    : ts_(ts), te_(te), hops_(hops), members_(std::move(members)) {
  std::sort(members_.begin(), members_.end(),
            [](const TemporalMember& a, const TemporalMember& b) { return a.id < b.id; });
}

const TemporalMember* TemporalSet::find(NodeId id) const {
  auto it = std::lower_bound(members_.begin(), members_.end(), id,
                             [](const TemporalMember& m, NodeId x) { return m.id < x; });
  return it != members_.end() && it->id == id ? &*it : nullptr;
}

TafCounters& TafCounters::operator+=(const TafCounters& o) {
  f_calls += o.f_calls;
  f_delta_calls += o.f_delta_calls;
  members_fetched += o.members_fetched;
  fetch += o.fetch;
  return *this;
}

// ---- FetchSpec --------------------------------------------------------------

FetchSpec& FetchSpec::ids(std::set<NodeId> ids) {
  if (ids_) {
    std::set<NodeId> both;
    std::set_intersection(ids_->begin(), ids_->end(), ids.begin(), ids.end(),
                          std::inserter(both, both.end()));
    ids_ = std::move(both);
  } else {
    ids_ = std::move(ids);
  }
  return *this;
}

FetchSpec& FetchSpec::where_id(std::function<bool(NodeId)> pred) {
  filters_.push_back(std::move(pred));
  return *this;
}

FetchSpec& FetchSpec::between(Time ts, Time te) {
  range_ = {ts, te};
  return *this;
}

FetchSpec& FetchSpec::khop(unsigned hops) {
  hops_ = hops;
  return *this;
}

// ---- Fetch ------------------------------------------------------------------

namespace {

std::optional<TemporalMember> fetch_node(const Retriever& r, NodeId id, Time ts, Time te,
                                         FetchCounters& c) {
  NodeHistory h = r.get_node_history_closed(id, ts, te - 1, &c);
  if (!h.known()) return std::nullopt;
  TemporalMember m;
  m.id = id;
  m.ts = ts;
  m.te = te;
  m.universe = {id};
  if (h.initial) m.initial.put_node(std::move(*h.initial));
  m.events = std::move(h.events);
  return m;
}

std::optional<TemporalMember> fetch_subgraph(const Retriever& r, NodeId id, unsigned hops,
                                             Time ts, Time te, FetchCounters& c) {
  std::map<NodeId, NodeHistory> hist;
  std::set<NodeId> pending{id};
  std::set<NodeId> universe;
  while (!pending.empty()) {
    for (NodeId n : pending) {
      if (!hist.contains(n)) hist.emplace(n, r.get_node_history_closed(n, ts, te - 1, &c));
    }
    pending.clear();
    if (!hist.at(id).known()) return std::nullopt;

    // Sweep every known history in log order; after each timestamp the ball
    // around the center is recomputed from the current states.
    std::map<std::uint64_t, std::pair<Event, std::vector<NodeId>>> merged;
    std::map<NodeId, NodeState> state;
    for (const auto& [n, h] : hist) {
      state[n] = h.initial;
      for (std::size_t i = 0; i < h.events.size(); ++i) {
        auto& slot = merged[h.seqs[i]];
        slot.first = h.events[i];
        slot.second.push_back(n);
      }
    }
    auto ball_now = [&]() {
      std::map<NodeId, unsigned> depth;
      auto it0 = state.find(id);
      if (it0 == state.end() || !it0->second) return;
      std::vector<NodeId> frontier{id};
      depth[id] = 0;
      for (unsigned d = 0; d < hops && !frontier.empty(); ++d) {
        std::vector<NodeId> next;
        for (NodeId m : frontier) {
          auto it = state.find(m);
          if (it == state.end()) continue;
          if (!it->second) continue;
          for (NodeId nb : neighbor_ids(*it->second)) {
            if (depth.emplace(nb, d + 1).second) next.push_back(nb);
          }
        }
        frontier = std::move(next);
      }
      for (const auto& [n, _] : depth) {
        universe.insert(n);
        if (!hist.contains(n)) pending.insert(n);
      }
    };
    auto it = merged.begin();
    if (it == merged.end() || it->second.first.time > ts) ball_now();
    while (it != merged.end()) {
      const Time t = it->second.first.time;
      for (; it != merged.end() && it->second.first.time == t; ++it) {
        for (NodeId n : it->second.second) {
          apply_to_endpoint(state[n], n, it->second.first, it->second.first.subject == n);
        }
      }
      ball_now();
    }
  }

  TemporalMember m;
  m.id = id;
  m.hops = hops;
  m.ts = ts;
  m.te = te;
  m.universe = universe;
  std::map<std::uint64_t, const Event*> events;
  for (NodeId n : universe) {
    const NodeHistory& h = hist.at(n);
    if (h.initial) {
      StaticNode node = *h.initial;
      std::erase_if(node.edges, [&](const auto& kv) { return !universe.contains(kv.first.neighbor); });
      m.initial.put_node(std::move(node));
    }
    for (std::size_t i = 0; i < h.events.size(); ++i) {
      const Event& e = h.events[i];
      if (is_edge_event(e.kind) &&
          !(universe.contains(e.subject) && universe.contains(e.peer))) {
        continue;
      }
      events.emplace(h.seqs[i], &e);
    }
  }
  for (const auto& [_, e] : events) m.events.push_back(*e);
  return m;
}

}  // namespace

Taf::Taf(const Tgi& tgi, TafOptions opts) : tgi_(&tgi), opts_(opts) {
  opts_.workers = std::max<std::size_t>(opts_.workers, 1);
}

TemporalSet Taf::fetch(const FetchSpec& spec) {
  const GraphMetaRecord& meta = tgi_->meta();
  Time ts = meta.start;
  Time te = meta.end + 1;
  if (auto r = spec.time_scope()) std::tie(ts, te) = *r;
  if (tgi_->empty() || te <= ts) return TemporalSet(ts, te, spec.hops(), {});

  std::vector<NodeId> ids;
  if (spec.id_scope()) {
    ids.assign(spec.id_scope()->begin(), spec.id_scope()->end());
  } else {
    ids = tgi_->store().node_ids();
  }
  std::erase_if(ids, [&](NodeId id) {
    for (const auto& f : spec.id_filters()) {
      if (!f(id)) return true;
    }
    return false;
  });

  // Members follow the placement of their home record at ts.
  const std::uint32_t shards = tgi_->store().shard_count();
  const auto span_idx = tgi_->span_for(ts);
  const std::uint32_t tsid = tgi_->spans()[span_idx.value_or(0)].tsid;
  std::vector<std::vector<NodeId>> by_shard(shards);
  for (NodeId id : ids) {
    by_shard[placement_of(PlacementKey{tsid, tgi_->sid_of(id)}, shards)].push_back(id);
  }

  const std::size_t workers = opts_.workers;
  std::vector<std::vector<TemporalMember>> got(workers);
  std::vector<TafCounters> stats(workers);
  const unsigned hops = spec.hops();
  parallel_for(workers, workers, [&](std::size_t w) {
    const Retriever r(*tgi_, 1);
    for (std::size_t shard = w; shard < shards; shard += workers) {
      for (NodeId id : by_shard[shard]) {
        auto m = hops == 0 ? fetch_node(r, id, ts, te, stats[w].fetch)
                           : fetch_subgraph(r, id, hops, ts, te, stats[w].fetch);
        if (!m) continue;
        ++stats[w].members_fetched;
        got[w].push_back(std::move(*m));
      }
    }
  });
  std::vector<TemporalMember> members;
  for (std::size_t w = 0; w < workers; ++w) {
    counters_ += stats[w];
    for (auto& m : got[w]) members.push_back(std::move(m));
  }
  return TemporalSet(ts, te, hops, std::move(members));
}

// ---- Operators --------------------------------------------------------------

TemporalSet Taf::select(const TemporalSet& s, const MemberPredicate& pred) const {
  std::vector<TemporalMember> kept;
  for (const auto& m : s.members()) {
    if (pred(m)) kept.push_back(m);
  }
  return TemporalSet(s.ts(), s.te(), s.hops(), std::move(kept));
}

StaticSet Taf::timeslice(const TemporalSet& s, Time t) const {
  if (t < s.ts() || t >= s.te()) throw out_of_span(t, s.ts(), s.te());
  StaticSet out;
  out.time = t;
  out.members.resize(s.size());
  parallel_for(s.size(), opts_.workers, [&](std::size_t i) {
    const TemporalMember& m = s.members()[i];
    out.members[i] = StaticMember{m.id, t, m.state_at(t)};
  });
  return out;
}

std::vector<StaticSet> Taf::timeslice(const TemporalSet& s, std::span<const Time> times) const {
  std::vector<StaticSet> out;
  out.reserve(times.size());
  for (Time t : times) out.push_back(timeslice(s, t));
  return out;
}

GraphS Taf::to_graph(const TemporalSet& s, std::optional<Time> t) const {
  const StaticSet slice = timeslice(s, t.value_or(s.ts()));
  Delta all;
  std::set<NodeId> ids;
  for (const auto& m : slice.members) {
    ids.insert(m.id);
    delta_sum_into(all, m.state);
  }
  return induced_subgraph(all, ids);
}

namespace {

double call_member(const StaticFn& f, const StaticMember& m) {
  try {
    return f(m);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kMemberFailure, "member " + std::to_string(m.id) + ": " + e.what());
  }
}

}  // namespace

std::map<NodeId, double> Taf::node_compute(const StaticSet& s, const StaticFn& f) {
  std::vector<double> values(s.members.size());
  parallel_for(s.members.size(), opts_.workers,
               [&](std::size_t i) { values[i] = call_member(f, s.members[i]); });
  counters_.f_calls += s.members.size();
  std::map<NodeId, double> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.emplace(s.members[i].id, values[i]);
  return out;
}

std::map<NodeId, TimeSeries> Taf::node_compute_temporal(const TemporalSet& s, const StaticFn& f,
                                                        const TimepointSpec& tp,
                                                        const DeltaFn& f_delta) {
  if (f_delta) return node_compute_delta(s, f, f_delta, tp);
  std::vector<TimeSeries> series(s.size());
  std::vector<std::uint64_t> calls(s.size());
  parallel_for(s.size(), opts_.workers, [&](std::size_t i) {
    const TemporalMember& m = s.members()[i];
    StaticMember cur{m.id, m.ts, m.initial};
    std::size_t next = 0;
    for (Time t : resolve(tp, m)) {
      for (; next < m.events.size() && m.events[next].time <= t; ++next) {
        apply_member_event(cur.state, m.universe, m.events[next]);
      }
      cur.time = t;
      StaticMember view{m.id, t, cur.state.materialized()};
      series[i].points.emplace_back(t, call_member(f, view));
      ++calls[i];
    }
  });
  std::map<NodeId, TimeSeries> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    counters_.f_calls += calls[i];
    out.emplace(s.members()[i].id, std::move(series[i]));
  }
  return out;
}

std::map<NodeId, TimeSeries> Taf::node_compute_delta(const TemporalSet& s, const StaticFn& f,
                                                     const DeltaFn& f_delta,
                                                     const TimepointSpec& tp) {
  std::vector<TimeSeries> series(s.size());
  std::vector<std::uint64_t> f_calls(s.size());
  std::vector<std::uint64_t> d_calls(s.size());
  const std::size_t check_every = opts_.check_every;
  parallel_for(s.size(), opts_.workers, [&](std::size_t i) {
    const TemporalMember& m = s.members()[i];
    StaticMember cur{m.id, m.ts, m.initial};
    double value = call_member(f, cur);
    ++f_calls[i];
    std::any aux;
    std::size_t next = 0;
    for (Time t : resolve(tp, m)) {
      for (; next < m.events.size() && m.events[next].time <= t; ++next) {
        const Event& e = m.events[next];
        cur.time = e.time;
        try {
          value = f_delta(cur, aux, value, e);
        } catch (const std::exception& ex) {
          throw Error(ErrorCode::kMemberFailure,
                      "member " + std::to_string(m.id) + ": " + ex.what());
        }
        ++d_calls[i];
        apply_member_event(cur.state, m.universe, e);
        if (check_every != 0 && d_calls[i] % check_every == 0) {
          StaticMember view{m.id, e.time, cur.state.materialized()};
          const double expect = call_member(f, view);
          if (expect != value) {
            throw Error(ErrorCode::kInconsistentDelta,
                        "member " + std::to_string(m.id) + ": incremental value " +
                            format_value(value) + " != " + format_value(expect) + " at t=" +
                            std::to_string(e.time));
          }
        }
      }
      series[i].points.emplace_back(t, value);
    }
  });
  std::map<NodeId, TimeSeries> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    counters_.f_calls += f_calls[i];
    counters_.f_delta_calls += d_calls[i];
    out.emplace(s.members()[i].id, std::move(series[i]));
  }
  return out;
}

std::map<NodeId, double> Taf::compare(const StaticSet& a, const StaticSet& b, const StaticFn& f) {
  if (a.members.size() != b.members.size() ||
      !std::equal(a.members.begin(), a.members.end(), b.members.begin(),
                  [](const StaticMember& x, const StaticMember& y) { return x.id == y.id; })) {
    throw Error(ErrorCode::kUnalignedOperands, "compare operands hold different members");
  }
  const auto fa = node_compute(a, f);
  const auto fb = node_compute(b, f);
  std::map<NodeId, double> out;
  for (const auto& [id, v] : fa) out.emplace(id, v - fb.at(id));
  return out;
}

std::map<NodeId, double> Taf::compare(const TemporalSet& s, Time t1, Time t2, const StaticFn& f) {
  return compare(timeslice(s, t1), timeslice(s, t2), f);
}

TimeSeries Taf::evolution(const TemporalSet& s, const SetFn& f, const TimepointSpec& tp) {
  const std::vector<Time> times = resolve(tp, s);
  std::vector<double> values(times.size());
  // Members are already spread over the workers inside timeslice.
  for (std::size_t i = 0; i < times.size(); ++i) values[i] = f(timeslice(s, times[i]));
  counters_.f_calls += times.size();
  TimeSeries out;
  for (std::size_t i = 0; i < times.size(); ++i) out.points.emplace_back(times[i], values[i]);
  return out;
}

namespace {

std::vector<Time> checked(std::vector<Time> v, Time ts, Time te) {
  v = sorted_unique(std::move(v));
  for (Time t : v) {
    if (t < ts || t >= te) throw out_of_span(t, ts, te);
  }
  return v;
}

}  // namespace

std::vector<Time> Taf::resolve(const TimepointSpec& tp, const TemporalMember& m) const {
  if (std::holds_alternative<AllChangePoints>(tp)) return m.change_points();
  if (const auto* u = std::get_if<UniformSample>(&tp)) return uniform_sample(m.ts, m.te, u->n);
  if (const auto* v = std::get_if<std::vector<Time>>(&tp)) return checked(*v, m.ts, m.te);
  return checked(std::get<TimepointFn>(tp)(m), m.ts, m.te);
}

std::vector<Time> Taf::resolve(const TimepointSpec& tp, const TemporalSet& s) const {
  if (std::holds_alternative<AllChangePoints>(tp)) {
    std::vector<Time> all{s.ts()};
    for (const auto& m : s.members()) {
      for (const Event& e : m.events) all.push_back(e.time);
    }
    return sorted_unique(std::move(all));
  }
  if (const auto* u = std::get_if<UniformSample>(&tp)) return uniform_sample(s.ts(), s.te(), u->n);
  if (const auto* v = std::get_if<std::vector<Time>>(&tp)) return checked(*v, s.ts(), s.te());
  std::vector<Time> all;
  for (const auto& m : s.members()) {
    auto part = std::get<TimepointFn>(tp)(m);
    all.insert(all.end(), part.begin(), part.end());
  }
  return checked(std::move(all), s.ts(), s.te());
}

// ---- Aggregation and output -------------------------------------------------

AggregateResult temp_aggregate(const TimeSeries& ts, Aggregate agg, double epsilon) {
  if (ts.empty()) throw Error(ErrorCode::kEmptySeries, "aggregate over an empty series");
  const auto& p = ts.points;
  switch (agg) {
    case Aggregate::kMax: {
      double v = p.front().second;
      for (const auto& [_, x] : p) v = std::max(v, x);
      return {std::nullopt, v};
    }
    case Aggregate::kMin: {
      double v = p.front().second;
      for (const auto& [_, x] : p) v = std::min(v, x);
      return {std::nullopt, v};
    }
    case Aggregate::kMean: {
      double sum = 0;
      for (const auto& [_, x] : p) sum += x;
      return {std::nullopt, sum / static_cast<double>(p.size())};
    }
    case Aggregate::kPeak: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i].second > p[best].second) best = i;
      }
      return {p[best].first, p[best].second};
    }
    case Aggregate::kSaturate: {
      const double final_v = p.back().second;
      const double band = epsilon * std::fabs(final_v);
      std::size_t first = p.size() - 1;
      while (first > 0 && std::fabs(p[first - 1].second - final_v) <= band) --first;
      return {p[first].first, p[first].second};
    }
  }
  return {};
}

std::string format_value(double v) {
  if (v == 0) v = 0;  // drops the sign of -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_series_csv(std::ostream& out, const std::map<NodeId, TimeSeries>& series) {
  out << "id,time,value\n";
  for (const auto& [id, s] : series) {
    for (const auto& [t, v] : s.points) out << id << ',' << t << ',' << format_value(v) << '\n';
  }
}

void write_values_csv(std::ostream& out, const std::map<NodeId, double>& values) {
  out << "id,value\n";
  for (const auto& [id, v] : values) out << id << ',' << format_value(v) << '\n';
}

}  // namespace tgs
