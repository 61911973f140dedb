// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.
//
// Usage: acceptance_test TGS_BINARY DATA_DIR WORK_DIR E2E_SCRIPT
// Criterion 12 is skipped as FAIL when the arguments are missing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracle.hpp"
#include "support/random_delta.hpp"
#include "tgs/cost_model.hpp"
#include "tgs/event_log.hpp"
#include "tgs/partitioner.hpp"
#include "tgs/retrieval.hpp"
#include "tgs/serialize.hpp"
#include "tgs/synth.hpp"
#include "tgs/taf.hpp"
#include "tgs/tgi.hpp"

namespace {

using namespace tgs;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and sizes.
constexpr double kSnapshotBudgetSeconds = 120.0;
constexpr double kCliBudgetSeconds = 60.0;
constexpr double kRandomFetchMeanMin = 3.0;
constexpr std::uint64_t kLocalityFetches = 2;

// Collects failures for one criterion; keeps the first few messages.
class Tally {
 public:
  void check(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (messages_.size() < 5) messages_.push_back(what);
  }
  void note(std::string s) { notes_.push_back(std::move(s)); }
  bool ok() const { return failures_ == 0 && checks_ > 0; }
  std::string summary() const {
    std::ostringstream out;
    out << checks_ << " checks";
    if (failures_) out << ", " << failures_ << " failed";
    for (const auto& n : notes_) out << "; " << n;
    for (const auto& m : messages_) out << "\n    " << m;
    return out.str();
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::vector<std::string> messages_;
  std::vector<std::string> notes_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::set<NodeId> logged_ids(std::span<const Event> log) {
  std::set<NodeId> ids;
  for (const auto& e : log) ids.insert(e.subject);
  return ids;
}

NodeId pick(const std::set<NodeId>& ids, std::mt19937_64& rng) {
  return *std::next(ids.begin(), static_cast<long>(rng() % ids.size()));
}

std::string history_text(const NodeHistory& h) { return render_history(h); }

// ---- 1 ---------------------------------------------------------------------

void snapshot_oracle(Tally& t) {
  const auto t0 = Clock::now();
  std::size_t logs = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    RandomLogOptions opts;
    opts.seed = 1000 + seed;
    opts.events = 2000 + (seed * 157) % 8000;
    opts.max_nodes = 100 + (seed * 53) % 900;
    const auto log = random_log(opts);
    std::set<EventKind> kinds;
    for (const auto& e : log) kinds.insert(e.kind);
    t.check(kinds.size() == 8 && log.size() <= 10000 && logged_ids(log).size() <= 1000,
            "log " + std::to_string(seed) + " outside the generator bounds");

    IndexConfig cfg;
    cfg.ts_events = 500 + (seed % 4) * 700;
    cfg.ns = 1 + seed % 3;
    cfg.l = 25 + (seed % 5) * 40;
    cfg.psize = 10 + (seed % 3) * 25;
    cfg.k = 1 + seed % 4;
    cfg.partitioning = seed % 2 ? PartitioningMode::kLocality : PartitioningMode::kRandom;
    cfg.replicate_1hop = cfg.partitioning == PartitioningMode::kLocality && seed % 4 == 1;
    cfg.compress = seed % 5 == 0;
    cfg.seed = seed;
    auto store = TgiStore::in_memory(1 + seed % 4);
    const Tgi tgi = Tgi::build(*store, log, cfg);
    const Retriever r(tgi, 1 + seed % 3);

    std::mt19937_64 rng(seed);
    std::vector<Time> times;
    for (int i = 0; i < 20; ++i) times.push_back(rng() % (log.back().time + 5));
    const auto want = oracle::replay_at(log, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      t.check(r.get_snapshot(times[i]) == want[i],
              "log " + std::to_string(seed) + " t=" + std::to_string(times[i]));
    }
    ++logs;
  }
  const double secs = seconds_since(t0);
  t.check(secs < kSnapshotBudgetSeconds, "runtime " + std::to_string(secs) + " s");
  std::ostringstream n;
  n << logs << " logs x 20 times in " << std::fixed;
  n.precision(1);
  n << secs << " s";
  t.note(n.str());
}

// ---- 2 ---------------------------------------------------------------------

void history_oracle(Tally& t) {
  std::size_t triples = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    RandomLogOptions opts;
    opts.seed = 2000 + seed;
    opts.events = 3000;
    opts.max_nodes = 150;
    const auto log = random_log(opts);
    IndexConfig cfg;
    cfg.ts_events = 700;
    cfg.ns = 2;
    cfg.l = 60;
    cfg.psize = 15;
    cfg.partitioning = seed % 2 ? PartitioningMode::kLocality : PartitioningMode::kRandom;
    cfg.replicate_1hop = seed == 3;
    auto store = TgiStore::in_memory(2);
    const Tgi tgi = Tgi::build(*store, log, cfg);
    const Retriever r(tgi);
    const auto ids = logged_ids(log);
    const Time end = log.back().time + 3;
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 25; ++i, ++triples) {
      const NodeId id = pick(ids, rng);
      Time ts = rng() % end, te = rng() % end;
      if (ts > te) std::swap(ts, te);
      const NodeHistory h = r.get_node_history(id, ts, te);
      const oracle::History want = oracle::history(log, id, ts, te);
      t.check(h.initial == want.initial && h.events == want.events,
              "node " + std::to_string(id) + " (" + std::to_string(ts) + ", " + std::to_string(te) + "]");
    }
  }
  t.note(std::to_string(triples) + " triples");
}

// ---- 3 ---------------------------------------------------------------------

// 30 probes rendered as text, run against one index.
std::vector<std::string> probe_suite(const Tgi& tgi, std::span<const Event> log) {
  const Retriever r(tgi);
  const auto ids = logged_ids(log);
  const Time end = log.back().time + 2;
  std::mt19937_64 rng(33);
  std::vector<std::string> out;
  for (int i = 0; i < 10; ++i) out.push_back(render_graph(r.get_snapshot(rng() % end)));
  for (int i = 0; i < 8; ++i) {
    const NodeId id = pick(ids, rng);
    Time a = rng() % end, b = rng() % end;
    if (a > b) std::swap(a, b);
    out.push_back(history_text(r.get_node_history(id, a, b)));
  }
  for (int i = 0; i < 6; ++i) {
    out.push_back(render_graph(r.get_k_hop(pick(ids, rng), rng() % end, static_cast<unsigned>(i % 3))));
  }
  for (int i = 0; i < 4; ++i) {
    const NodeId id = pick(ids, rng);
    Time a = rng() % end, b = rng() % end;
    if (a > b) std::swap(a, b);
    out.push_back(render_one_hop_history(r.get_1hop_history(id, a, b)));
  }
  for (int i = 0; i < 2; ++i) {
    const std::vector<Time> times = {rng() % end, rng() % end, rng() % end};
    std::string s;
    for (const auto& g : r.get_neighborhood_versions(pick(ids, rng), 1, times)) s += render_graph(g) + "--\n";
    out.push_back(s);
  }
  return out;
}

void build_update_equivalence(Tally& t) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    RandomLogOptions opts;
    opts.seed = 3000 + seed;
    opts.events = 4000;
    opts.max_nodes = 200;
    const auto log = random_log(opts);
    std::size_t cut = log.size() / 2;
    while (cut < log.size() && log[cut].time == log[cut - 1].time) ++cut;
    const std::vector<Event> l1(log.begin(), log.begin() + static_cast<long>(cut));
    const std::vector<Event> l2(log.begin() + static_cast<long>(cut), log.end());

    IndexConfig cfg;
    cfg.ts_events = 600;
    cfg.ns = 2;
    cfg.l = 50;
    cfg.psize = 20;
    cfg.partitioning = seed == 2 ? PartitioningMode::kRandom : PartitioningMode::kLocality;
    cfg.replicate_1hop = seed == 3;
    auto sa = TgiStore::in_memory(2);
    Tgi a = Tgi::build(*sa, l1, cfg);
    a.update(l2);
    auto sb = TgiStore::in_memory(2);
    const Tgi b = Tgi::build(*sb, log, cfg);

    const auto pa = probe_suite(a, log);
    const auto pb = probe_suite(b, log);
    t.check(pa.size() == 30, "probe suite size");
    for (std::size_t i = 0; i < pa.size(); ++i) {
      t.check(pa[i] == pb[i], "seed " + std::to_string(seed) + " probe " + std::to_string(i));
    }
    // The first ten probes are snapshots; anchor them to the replay oracle.
    std::mt19937_64 rng(33);
    const Time end = log.back().time + 2;
    for (int i = 0; i < 10; ++i) {
      t.check(pa[static_cast<std::size_t>(i)] == render_graph(oracle::replay(log, rng() % end)),
              "seed " + std::to_string(seed) + " snapshot probe " + std::to_string(i) + " vs replay");
    }
  }
  t.note("3 logs x 30 probes");
}

// ---- 4 ---------------------------------------------------------------------

void delta_laws(Tally& t) {
  std::mt19937_64 rng(4);
  const Delta empty;
  constexpr int kRounds = 2000;
  for (int i = 0; i < kRounds; ++i) {
    const Delta a = testing_support::random_delta(rng);
    const Delta b = testing_support::random_delta(rng);
    const Delta c = testing_support::random_delta(rng);
    t.check(a + empty == a, "a + 0 = a");
    t.check((a + b) + c == a + (b + c), "(a + b) + c = a + (b + c)");
    t.check(a - empty == a, "a - 0 = a");
    t.check((a - a).empty(), "a - a = 0");
    t.check(delta_intersect(a, empty).empty(), "a & 0 = 0");
    t.check(delta_union(a, empty) == a, "a | 0 = a");
  }
  t.note(std::to_string(kRounds) + " operand sets per law");
}

// ---- 5 ---------------------------------------------------------------------

// Cost table cells, written out independently of the library.
Cost hand_cost(IndexKind index, Primitive q, const CostParams& c) {
  const double G = c.G, S = c.S, E = c.E, h = c.h, V = c.V, R = c.R, p = c.p, N = c.N, C = c.C;
  const int col = static_cast<int>(q);
  switch (index) {
    case IndexKind::kLog:
      return {G, G / E};
    case IndexKind::kCopy: {
      const Cost row[] = {{S, 1}, {S, 1}, {S * G, G}, {S, 1}, {S * G, G}};
      return row[col];
    }
    case IndexKind::kCopyLog: {
      const Cost row[] = {{S + E, 2}, {S + E, 2}, {G, G / E}, {S + E, 2}, {G, G / E}};
      return row[col];
    }
    case IndexKind::kNodeCentric: {
      const Cost row[] = {{2 * G, N}, {C, 1}, {C, 1}, {R * V, R}, {R * V, R}};
      return row[col];
    }
    case IndexKind::kDeltaGraph: {
      const Cost row[] = {{h * S + E, 2 * h}, {h * S + E, 2 * h}, {G, G / E}, {h * (S + E), 2 * h}, {G, G / E}};
      return row[col];
    }
    case IndexKind::kTgi: {
      const Cost row[] = {{h * S + E, 2 * h},
                          {h * S / p + E / p, 2 * h},
                          {V * (1 + S / p), V + 1},
                          {h * (S + E) / p, 2 * h},
                          {V * (1 + S / p), V + 1}};
      return row[col];
    }
  }
  return {};
}

double hand_storage(IndexKind index, const CostParams& c) {
  switch (index) {
    case IndexKind::kLog: return c.G;
    case IndexKind::kCopy: return c.G * c.G;
    case IndexKind::kCopyLog: return c.G * c.G / c.E;
    case IndexKind::kNodeCentric: return 2 * c.G;
    case IndexKind::kDeltaGraph: return c.G * (c.h + 1);
    case IndexKind::kTgi: return c.G * (2 * c.h + 3);
  }
  return 0;
}

void cost_fidelity(Tally& t) {
  std::mt19937_64 rng(5);
  auto draw = [&](int lo, int hi) { return static_cast<double>(lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1))); };
  std::size_t cells = 0;
  for (int setting = 0; setting < 3; ++setting) {
    CostParams c;
    c.G = draw(1000, 1000000);
    c.S = draw(10, 50000);
    c.E = draw(1, 5000);
    c.h = draw(1, 12);
    c.V = draw(1, 500);
    c.R = draw(1, 300);
    c.p = draw(1, 64);
    c.N = draw(10, 100000);
    c.C = draw(1, 2000);
    for (IndexKind k : kAllIndexKinds) {
      for (Primitive q : kAllPrimitives) {
        const Cost got = estimate_cost(k, q, c);
        const Cost want = hand_cost(k, q, c);
        const std::string cell = std::string(to_string(k)) + "/" + std::string(to_string(q));
        t.check(got.delta_size_sum == want.delta_size_sum, cell + " size sum");
        t.check(got.delta_count == want.delta_count, cell + " count");
        cells += 2;
      }
      t.check(estimate_storage(k, c) == hand_storage(k, c), std::string(to_string(k)) + " storage");
    }
  }
  CostParams ex;
  ex.G = 1000;
  ex.E = 10;
  t.check(estimate_cost(IndexKind::kLog, Primitive::kSnapshot, ex) == Cost{1000, 100}, "Log snapshot example");
  CostParams ex2;
  ex2.S = 100;
  ex2.E = 10;
  ex2.h = 3;
  ex2.p = 5;
  t.check(estimate_cost(IndexKind::kTgi, Primitive::kStaticVertex, ex2) == Cost{62, 6}, "TGI static vertex example");
  t.note(std::to_string(cells) + " cell metrics");
}

// ---- 6 ---------------------------------------------------------------------

void partition_balance(Tally& t) {
  std::mt19937_64 rng(6);
  std::size_t graphs = 0;
  for (int g = 0; g < 120; ++g, ++graphs) {
    CollapsedGraph cg;
    const std::size_t n = 2 + rng() % 300;
    for (NodeId i = 0; i < n; ++i) cg.node_weight[i * 3 + g] = 1.0;
    std::vector<NodeId> ids;
    for (const auto& [id, _] : cg.node_weight) ids.push_back(id);
    const std::size_t m = rng() % (4 * n);
    for (std::size_t e = 0; e < m; ++e) {
      NodeId a = ids[rng() % n], b = ids[rng() % n];
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      cg.edges[{a, b}] += 1.0 + static_cast<double>(rng() % 4);
    }
    const auto k = static_cast<std::uint32_t>(1 + rng() % std::min<std::size_t>(n, 24));
    const PartitionMap pm = partition_locality(cg, k);
    std::vector<std::size_t> sizes(k, 0);
    bool complete = pm.assign.size() == n;
    for (const auto& [id, pid] : pm.assign) {
      if (pid >= k || !cg.node_weight.contains(id)) {
        complete = false;
        continue;
      }
      ++sizes[pid];
    }
    const std::size_t lo = n / k, hi = (n + k - 1) / k;
    bool balanced = complete;
    for (std::size_t s : sizes) balanced = balanced && s >= lo && s <= hi;
    t.check(balanced, "graph " + std::to_string(g) + " n=" + std::to_string(n) + " k=" + std::to_string(k));
  }
  t.note(std::to_string(graphs) + " random graphs");
}

// ---- 7 ---------------------------------------------------------------------

void locality_benefit(Tally& t) {
  PlantedPartitionOptions opts;
  opts.communities = 8;
  opts.community_size = 100;
  opts.seed = 7;
  const auto log = planted_partition_log(opts);
  const Time at = log.back().time;
  const GraphS g = oracle::replay(log, at);

  auto run = [&](PartitioningMode mode, bool aux, std::vector<std::uint64_t>& fetches) {
    IndexConfig cfg;
    cfg.ts_events = 1000000;
    cfg.ns = 1;
    cfg.l = 500;
    cfg.psize = 100;
    cfg.partitioning = mode;
    cfg.replicate_1hop = aux;
    cfg.seed = 7;
    auto store = TgiStore::in_memory(1);
    const Tgi tgi = Tgi::build(*store, log, cfg);
    const Retriever r(tgi);
    for (NodeId id = 0; id < 800; ++id) {
      FetchCounters c;
      const GraphS got = r.get_k_hop(id, at, 1, KHopStrategy::kExpand, &c);
      t.check(got == oracle::induced(g, oracle::ball(g, id, 1)), "1-hop result for node " + std::to_string(id));
      fetches.push_back(c.micro_fetches);
    }
  };

  std::vector<std::uint64_t> loc, rnd;
  run(PartitioningMode::kLocality, true, loc);
  run(PartitioningMode::kRandom, false, rnd);
  for (std::size_t i = 0; i < loc.size(); ++i) {
    t.check(loc[i] == kLocalityFetches, "locality fetches for node " + std::to_string(i) + " = " + std::to_string(loc[i]));
  }
  double mean = 0;
  for (auto f : rnd) mean += static_cast<double>(f);
  mean /= static_cast<double>(rnd.size());
  t.check(mean >= kRandomFetchMeanMin, "random mean fetches " + std::to_string(mean));
  std::ostringstream n;
  n.precision(3);
  n << "locality+aux max " << *std::max_element(loc.begin(), loc.end()) << ", random mean " << mean;
  t.note(n.str());
}

// ---- 8 ---------------------------------------------------------------------

void khop_equivalence(Tally& t) {
  std::size_t probes = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    RandomLogOptions opts;
    opts.seed = 8000 + seed;
    opts.events = 3000;
    opts.max_nodes = 120;
    const auto log = random_log(opts);
    IndexConfig cfg;
    cfg.ts_events = 800;
    cfg.ns = 2;
    cfg.l = 70;
    cfg.psize = 12;
    cfg.partitioning = seed % 2 ? PartitioningMode::kLocality : PartitioningMode::kRandom;
    cfg.replicate_1hop = seed == 1;
    auto store = TgiStore::in_memory(2);
    const Tgi tgi = Tgi::build(*store, log, cfg);
    const Retriever r(tgi);
    const auto ids = logged_ids(log);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 25; ++i, ++probes) {
      const NodeId id = pick(ids, rng);
      const Time at = rng() % (log.back().time + 2);
      const auto hops = static_cast<unsigned>(rng() % 3);
      const GraphS a = r.get_k_hop_snapshot_first(id, at, hops);
      const GraphS b = r.get_k_hop_expand(id, at, hops);
      const GraphS g = oracle::replay(log, at);
      const std::string where = "node " + std::to_string(id) + " t=" + std::to_string(at) + " k=" + std::to_string(hops);
      t.check(a == b, where + " strategies differ");
      t.check(a == oracle::induced(g, oracle::ball(g, id, hops)), where + " vs BFS oracle");
    }
  }
  t.note(std::to_string(probes) + " probes");
}

// ---- 9 ---------------------------------------------------------------------

bool is_label(const NodeState* s) {
  return s && *s && (*s)->attrs.contains("k0") && (*s)->attrs.at("k0") == "v0";
}

double label_count_full(const StaticMember& m) {
  double c = 0;
  for (const auto& [id, s] : m.state.entries()) c += is_label(&s) ? 1 : 0;
  return c;
}

double label_count_step(const StaticMember& before, std::any&, double value, const Event& e) {
  const bool had = is_label(before.state.find(e.subject));
  switch (e.kind) {
    case EventKind::kSetNodeAttr:
      if (e.key != "k0") return value;
      return value - (had ? 1 : 0) + (e.value == "v0" ? 1 : 0);
    case EventKind::kDelNodeAttr:
      return e.key == "k0" && had ? value - 1 : value;
    case EventKind::kDeleteNode:
      return had ? value - 1 : value;
    default:
      return value;
  }
}

void incremental_operator(Tally& t) {
  constexpr std::size_t kMembers = 200;
  const Time ts = 1000;
  for (std::size_t versions : {10u, 50u, 250u}) {
    // Center 2c with leaf 2c+1; each subgraph changes once per time step.
    std::vector<Event> log;
    for (NodeId c = 0; c < kMembers; ++c) {
      log.push_back(Event::add_node(1, 2 * c));
      log.push_back(Event::add_node(1, 2 * c + 1));
    }
    for (NodeId c = 0; c < kMembers; ++c) log.push_back(Event::add_edge(2, 2 * c, 2 * c + 1));
    for (std::size_t j = 0; j < versions; ++j) {
      for (NodeId c = 0; c < kMembers; ++c) {
        const NodeId target = 2 * c + (j + c) % 2;
        log.push_back(Event::set_node_attr(ts + j, target, "k0", (j + c) % 3 == 0 ? "v0" : "v1"));
      }
    }
    IndexConfig cfg;
    cfg.ts_events = 1000000;
    cfg.ns = 2;
    cfg.l = 2000;
    cfg.psize = 50;
    auto store = TgiStore::in_memory(2);
    const Tgi tgi = Tgi::build(*store, log, cfg);
    Taf taf(tgi);
    std::set<NodeId> centers;
    for (NodeId c = 0; c < kMembers; ++c) centers.insert(2 * c);
    const TemporalSet s = taf.fetch(FetchSpec().ids(centers).khop(1).between(ts, ts + versions));
    bool shape = s.size() == kMembers;
    for (const auto& m : s.members()) shape = shape && m.change_points().size() == versions;
    t.check(shape, "T=" + std::to_string(versions) + " member shape");

    taf.reset_counters();
    const auto full = taf.node_compute_temporal(s, label_count_full);
    const TafCounters full_c = taf.counters();
    taf.reset_counters();
    const auto inc = taf.node_compute_delta(s, label_count_full, label_count_step);
    const TafCounters inc_c = taf.counters();

    const std::string tag = "T=" + std::to_string(versions);
    t.check(full == inc, tag + " series differ");
    t.check(inc_c.f_calls == kMembers, tag + " delta f calls " + std::to_string(inc_c.f_calls));
    t.check(inc_c.f_delta_calls == kMembers * versions, tag + " delta f_delta calls " + std::to_string(inc_c.f_delta_calls));
    t.check(full_c.f_calls == kMembers * versions, tag + " temporal f calls " + std::to_string(full_c.f_calls));
    // Spot-check values against a direct count over the replayed graph.
    for (NodeId c : {NodeId{0}, NodeId{2 * 77}, NodeId{2 * 199}}) {
      const auto& series = full.at(c);
      for (const auto& [at, v] : series.points) {
        const GraphS g = oracle::replay(log, at);
        double want = 0;
        for (NodeId n : {c, c + 1}) {
          const StaticNode* x = g.find(n);
          want += x && x->attrs.contains("k0") && x->attrs.at("k0") == "v0" ? 1 : 0;
        }
        t.check(v == want, tag + " value of member " + std::to_string(c) + " at " + std::to_string(at));
      }
    }
    t.note(tag + ": f=" + std::to_string(inc_c.f_calls) + " f_delta=" + std::to_string(inc_c.f_delta_calls) +
           " vs f=" + std::to_string(full_c.f_calls));
  }
}

// ---- 10 --------------------------------------------------------------------

std::string render_temporal_set(const TemporalSet& s) {
  std::ostringstream out;
  out << "set " << s.ts() << ' ' << s.te() << ' ' << s.hops() << '\n';
  for (const auto& m : s.members()) {
    out << "member " << m.id << ' ' << m.hops << ' ' << m.ts << ' ' << m.te << " u";
    for (NodeId u : m.universe) out << ' ' << u;
    out << '\n' << serialize_delta(m.initial) << '\n';
    for (const auto& e : m.events) out << format_event(e) << '\n';
  }
  return out.str();
}

std::string render_static_set(const StaticSet& s) {
  std::ostringstream out;
  out << "static " << s.time << '\n';
  for (const auto& m : s.members) out << m.id << ' ' << m.time << ' ' << serialize_delta(m.state) << '\n';
  return out.str();
}

std::string render_series(const std::map<NodeId, TimeSeries>& m) {
  std::ostringstream out;
  write_series_csv(out, m);
  return out.str();
}

std::string render_values(const std::map<NodeId, double>& m) {
  std::ostringstream out;
  write_values_csv(out, m);
  return out.str();
}

double degree(const StaticMember& m) {
  const StaticNode* n = m.node();
  return n ? static_cast<double>(n->neighbor_count()) : 0.0;
}

// Every primitive and operator, concatenated.
std::string everything(const Tgi& tgi, std::size_t workers, std::span<const Event> log) {
  std::ostringstream out;
  const Retriever r(tgi, workers);
  const auto ids = logged_ids(log);
  const Time end = log.back().time + 2;
  std::mt19937_64 rng(10);
  for (int i = 0; i < 4; ++i) {
    const Time at = rng() % end;
    out << render_graph(r.get_snapshot(at));
    out << serialize_delta(r.get_snapshot_delta(at));
    Delta merged;
    for (const auto& d : r.get_snapshot_by_shard(at)) delta_sum_into(merged, d);
    out << serialize_delta(merged);
  }
  for (int i = 0; i < 6; ++i) {
    const NodeId id = pick(ids, rng);
    Time a = rng() % end, b = rng() % end;
    if (a > b) std::swap(a, b);
    out << render_history(r.get_node_history(id, a, b));
    out << render_history(r.get_node_history_closed(id, a, b));
    const auto n = r.get_node_at(id, b);
    out << (n ? serialize_delta(Delta(Delta::Entries{{id, NodeState(*n)}})) : std::string("absent")) << '\n';
    for (unsigned h = 0; h <= 2; ++h) {
      out << render_graph(r.get_k_hop_snapshot_first(id, b, h));
      out << render_graph(r.get_k_hop_expand(id, b, h));
    }
    out << render_one_hop_history(r.get_1hop_history(id, a, b));
    const std::vector<Time> times = {a, b};
    for (const auto& g : r.get_neighborhood_versions(id, 2, times)) out << render_graph(g);
  }

  Taf taf(tgi, TafOptions{workers, 0});
  const Time ts = log.front().time + (end - log.front().time) / 4;
  const Time te = end - (end - log.front().time) / 4;
  const TemporalSet son = taf.fetch(FetchSpec().between(ts, te));
  const TemporalSet sots = taf.fetch(FetchSpec().between(ts, te).khop(1).where_id([](NodeId id) { return id % 3 == 0; }));
  out << render_temporal_set(son) << render_temporal_set(sots);
  out << render_temporal_set(taf.select(son, [](const TemporalMember& m) { return m.events.size() > 2; }));
  const Time mid = (ts + te) / 2;
  out << render_static_set(taf.timeslice(son, mid));
  const std::vector<Time> slices = {ts, mid, te - 1};
  for (const auto& s : taf.timeslice(sots, slices)) out << render_static_set(s);
  out << render_graph(taf.to_graph(son, mid));
  out << render_values(taf.node_compute(taf.timeslice(son, mid), degree));
  out << render_series(taf.node_compute_temporal(sots, label_count_full));
  out << render_series(taf.node_compute_temporal(son, degree, UniformSample{5}));
  out << render_series(taf.node_compute_delta(sots, label_count_full, label_count_step));
  out << render_values(taf.compare(taf.timeslice(son, ts), taf.timeslice(son, mid), degree));
  out << render_values(taf.compare(son, mid, ts, degree));
  const TimeSeries ev = taf.evolution(son, [](const StaticSet& s) {
    double n = 0;
    for (const auto& m : s.members) n += m.node() ? 1 : 0;
    return n;
  });
  for (const auto& [at, v] : ev.points) out << at << ',' << format_value(v) << '\n';
  if (!ev.empty()) {
    for (Aggregate a : {Aggregate::kPeak, Aggregate::kSaturate, Aggregate::kMax, Aggregate::kMin, Aggregate::kMean}) {
      const AggregateResult res = temp_aggregate(ev, a);
      out << (res.time ? std::to_string(*res.time) : "-") << ',' << format_value(res.value) << '\n';
    }
  }
  return out.str();
}

void parallel_soundness(Tally& t) {
  RandomLogOptions opts;
  opts.seed = 10;
  opts.events = 2500;
  opts.max_nodes = 120;
  const auto log = random_log(opts);
  for (PartitioningMode mode : {PartitioningMode::kRandom, PartitioningMode::kLocality}) {
    IndexConfig cfg;
    cfg.ts_events = 700;
    cfg.ns = 2;
    cfg.l = 60;
    cfg.psize = 15;
    cfg.partitioning = mode;
    cfg.replicate_1hop = mode == PartitioningMode::kLocality;
    std::optional<std::string> first;
    for (std::uint32_t shards : {1u, 4u}) {
      auto store = TgiStore::in_memory(shards);
      const Tgi tgi = Tgi::build(*store, log, cfg);
      for (std::size_t workers : {1u, 2u, 4u}) {
        const std::string got = everything(tgi, workers, log);
        if (!first) first = got;
        t.check(got == *first, std::string(mode == PartitioningMode::kRandom ? "random" : "locality") +
                                   " m=" + std::to_string(shards) + " c=" + std::to_string(workers));
      }
    }
    t.note(std::to_string(first->size()) + " bytes per run");
  }
}

// ---- 11 --------------------------------------------------------------------

Delta tree_node(const TgiStore& store, const TimeSpanRecord& span, std::uint32_t sid,
                const TreeShape& shape, std::size_t level, std::size_t index) {
  std::vector<std::pair<std::size_t, std::size_t>> path;
  for (std::size_t lv = level + 1, i = index; lv-- > 0; i /= shape.arity()) path.insert(path.begin(), {lv, i});
  Delta out;
  for (const auto& [lv, i] : path) {
    for (const auto& rec : store.scan_delta(span.tsid, sid, shape.did(lv, i))) {
      if (is_aux_pid(rec.key.pid)) continue;
      out = out + deserialize_delta(rec.dval);
    }
  }
  return out;
}

void tree_invariants(Tally& t) {
  struct Shape {
    std::uint64_t ts_events;
    std::uint32_t ns, l, psize, k;
    PartitioningMode mode;
    bool aux;
  };
  const Shape shapes[] = {{1000, 1, 50, 100, 2, PartitioningMode::kRandom, false},
                          {300, 2, 17, 8, 3, PartitioningMode::kRandom, false},
                          {250, 3, 40, 10, 1, PartitioningMode::kRandom, false},
                          {400, 2, 25, 12, 2, PartitioningMode::kLocality, true},
                          {200, 1, 10, 20, 4, PartitioningMode::kLocality, false},
                          {1000, 2, 3, 30, 2, PartitioningMode::kLocality, true}};
  std::size_t trees = 0;
  std::uint64_t seed = 0;
  for (const Shape& s : shapes) {
    for (int rep = 0; rep < 2; ++rep) {
      RandomLogOptions opts;
      opts.seed = 11000 + ++seed;
      opts.events = 600 + 150 * static_cast<std::size_t>(rep);
      opts.max_nodes = 60;
      const auto log = random_log(opts);
      IndexConfig cfg;
      cfg.ts_events = s.ts_events;
      cfg.ns = s.ns;
      cfg.l = s.l;
      cfg.psize = s.psize;
      cfg.k = s.k;
      cfg.partitioning = s.mode;
      cfg.replicate_1hop = s.aux;
      cfg.seed = seed;
      auto store = TgiStore::in_memory(3);
      const Tgi tgi = Tgi::build(*store, log, cfg);
      t.check(tgi.meta().events <= 1000, "log over 1000 events");
      for (const auto& span : tgi.spans()) {
        const TreeShape shape = TreeShape::for_leaves(span.checkpts.size(), span.k);
        std::vector<Delta> leaves(shape.leaf_count());
        for (std::uint32_t sid = 0; sid < cfg.ns; ++sid, ++trees) {
          const std::string where = "seed " + std::to_string(seed) + " span " + std::to_string(span.tsid) +
                                    " sid " + std::to_string(sid);
          for (std::size_t level = 0; level + 1 < shape.levels(); ++level) {
            for (std::size_t i = 0; i < shape.level_size(level); ++i) {
              const Delta parent = tree_node(*store, span, sid, shape, level, i);
              std::optional<Delta> acc;
              const std::size_t hi = std::min((i + 1) * shape.arity(), shape.level_size(level + 1));
              for (std::size_t c = i * shape.arity(); c < hi; ++c) {
                const Delta child = tree_node(*store, span, sid, shape, level + 1, c);
                acc = acc ? delta_intersect(*acc, child) : child;
              }
              t.check(acc && parent == *acc, where + " node " + std::to_string(level) + "," + std::to_string(i));
            }
          }
          for (std::size_t j = 0; j < shape.leaf_count(); ++j) {
            const Delta leaf = tree_node(*store, span, sid, shape, shape.height(), j);
            bool own = true;
            for (const auto& [id, st] : leaf.entries()) own = own && tgi.sid_of(id) == sid;
            t.check(own, where + " leaf " + std::to_string(j) + " holds a foreign node");
            delta_sum_into(leaves[j], leaf.materialized());
          }
        }
        // Leaves of all horizontal partitions reconstruct the checkpoint state.
        for (std::size_t j = 0; j < leaves.size(); ++j) {
          const GraphS want = j == 0 ? (span.start == 0 ? GraphS{} : oracle::replay(log, span.start - 1))
                                     : oracle::replay(log, span.checkpts[j]);
          t.check(leaves[j] == want.to_delta(),
                  "seed " + std::to_string(seed) + " span " + std::to_string(span.tsid) + " leaf " + std::to_string(j));
        }
      }
    }
  }
  t.note(std::to_string(trees) + " trees");
}

// ---- 12 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Snapshot rows in the CLI's CSV layout.
std::multiset<std::string> snapshot_rows(const GraphS& g) {
  std::multiset<std::string> rows;
  for (const auto& [id, n] : g.nodes) {
    rows.insert("node," + std::to_string(id) + ",,,,");
    for (const auto& [k, v] : n.attrs) rows.insert("attr," + std::to_string(id) + ",,," + k + "," + v);
    for (const auto& [key, attrs] : n.edges) {
      const std::string base = std::to_string(id) + "," + std::to_string(key.neighbor) + "," +
                               (key.direction == Direction::kOut ? "out" : "in");
      rows.insert("edge," + base + ",,");
      for (const auto& [k, v] : attrs) rows.insert("edge_attr," + base + "," + k + "," + v);
    }
  }
  return rows;
}

// Undirected local clustering coefficient, counted from scratch.
double clustering(const GraphS& g, NodeId id) {
  const StaticNode* n = g.find(id);
  if (!n) return 0;
  std::set<NodeId> nb;
  for (const auto& [key, _] : n->edges) {
    if (key.neighbor != id) nb.insert(key.neighbor);
  }
  if (nb.size() < 2) return 0;
  std::size_t links = 0;
  for (auto a = nb.begin(); a != nb.end(); ++a) {
    for (auto b = std::next(a); b != nb.end(); ++b) {
      const StaticNode* x = g.find(*a);
      links += x && (x->has_edge(*b, Direction::kOut) || x->has_edge(*b, Direction::kIn)) ? 1 : 0;
    }
  }
  return 2.0 * static_cast<double>(links) / (static_cast<double>(nb.size()) * static_cast<double>(nb.size() - 1));
}

void cli_pipeline(Tally& t, int argc, char** argv) {
  if (argc < 5) {
    t.check(false, "needs TGS_BINARY DATA_DIR WORK_DIR E2E_SCRIPT");
    return;
  }
  const fs::path tgs_bin = argv[1], data = argv[2], work = argv[3], script = argv[4];
  const std::string cmd = "bash '" + script.string() + "' '" + tgs_bin.string() + "' '" + data.string() + "' '" +
                          work.string() + "' > '" + (work.string() + ".log") + "' 2>&1";
  fs::create_directories(work.parent_path());
  const auto t0 = Clock::now();
  const int rc = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  t.check(rc == 0, "e2e script failed, see " + work.string() + ".log");
  t.check(secs < kCliBudgetSeconds, "pipeline took " + std::to_string(secs) + " s");

  // The goldens themselves must agree with independent computations.
  const auto log = read_event_log(data / "sample.log");
  t.check(log.size() == 5000, "sample log has " + std::to_string(log.size()) + " events");
  const fs::path golden = data / "golden";

  auto snap = lines_of(slurp(golden / "snapshot"));
  t.check(!snap.empty() && snap.front() == "record,id,peer,direction,key,value", "snapshot header");
  if (!snap.empty()) snap.erase(snap.begin());
  t.check(std::multiset<std::string>(snap.begin(), snap.end()) == snapshot_rows(oracle::replay(log, 4000)),
          "snapshot golden vs replay");

  const auto density_rows = lines_of(slurp(golden / "density"));
  const Time ts = log.front().time, te = log.back().time + 1;
  bool dens_ok = density_rows.size() == 11 && density_rows.front() == "id,time,value";
  for (std::size_t i = 1; dens_ok && i < density_rows.size(); ++i) {
    const Time at = ts + (i - 1) * (te - ts) / 10;
    const GraphS g = oracle::replay(log, at);
    const double n = static_cast<double>(g.node_count());
    double m = 0;
    for (const auto& [_, node] : g.nodes) {
      for (const auto& [key, __] : node.edges) m += key.direction == Direction::kOut ? 1 : 0;
    }
    const double want = n < 2 ? 0.0 : m / (n * (n - 1));
    dens_ok = density_rows[i] == "all," + std::to_string(at) + "," + format_value(want);
  }
  t.check(dens_ok, "density golden vs replay");

  const GraphS g5 = oracle::replay(log, 5000);
  NodeId best_id = 0;
  double best = -1;
  for (const auto& [id, _] : g5.nodes) {
    const double c = clustering(g5, id);
    if (c > best) best = c, best_id = id;
  }
  t.check(slurp(golden / "max_cc") == "id,value\n" + std::to_string(best_id) + "," + format_value(best) + "\n",
          "max clustering golden vs hand count");
  std::ostringstream n;
  n.precision(2);
  n << std::fixed << "pipeline " << secs << " s";
  t.note(n.str());
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int number;
    const char* name;
    std::function<void(Tally&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "snapshot equals log replay", snapshot_oracle},
      {2, "node history equals log filter", history_oracle},
      {3, "build+update equals single build", build_update_equivalence},
      {4, "delta algebra identities", delta_laws},
      {5, "cost table fidelity", cost_fidelity},
      {6, "partition balance", partition_balance},
      {7, "locality fetch benefit", locality_benefit},
      {8, "k-hop strategy equivalence", khop_equivalence},
      {9, "incremental operator counts", incremental_operator},
      {10, "worker and shard invariance", parallel_soundness},
      {11, "snapshot tree invariants", tree_invariants},
      {12, "end-to-end CLI pipeline", [&](Tally& t) { cli_pipeline(t, argc, argv); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Tally t;
    const auto t0 = Clock::now();
    try {
      c.run(t);
    } catch (const std::exception& e) {
      t.check(false, std::string("exception: ") + e.what());
    }
    const bool ok = t.ok();
    failed += ok ? 0 : 1;
    std::printf("%s %2d %-34s %6.2fs  %s\n", ok ? "PASS" : "FAIL", c.number, c.name, seconds_since(t0),
                t.summary().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
