// tgs: build, update, query and analyze a temporal graph index from the shell.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tgs/error.hpp"
#include "tgs/event_log.hpp"
#include "tgs/graph.hpp"
#include "tgs/retrieval.hpp"
#include "tgs/store.hpp"
#include "tgs/synth.hpp"
#include "tgs/taf.hpp"
#include "tgs/tgi.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string store;
  std::string config;
  std::size_t workers = 1;
  std::uint32_t shards = 1;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
  bool force = false;
};

fs::path store_dir(const Common& c) {
  if (!c.store.empty()) return c.store;
  if (const char* env = std::getenv("STORE_DIR"); env && *env) return env;
  throw UsageError("no store: pass --store or set STORE_DIR");
}

std::unique_ptr<tgs::TgiStore> open_existing(const Common& c) {
  const fs::path dir = store_dir(c);
  if (!tgs::TgiStore::exists(dir)) {
    throw tgs::Error(tgs::ErrorCode::kNotFound, "no index at " + dir.string());
  }
  return tgs::TgiStore::open(dir);
}

std::vector<tgs::Event> read_log(const std::string& path) {
  return tgs::read_event_log(path);
}

tgs::IndexConfig load_config(const Common& c) {
  tgs::IndexConfig cfg;
  if (!c.config.empty()) {
    std::ifstream in(c.config, std::ios::binary);
    if (!in) throw tgs::Error(tgs::ErrorCode::kBackendIO, "cannot open " + c.config);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = tgs::IndexConfig::parse(buf.str());
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.build_workers = static_cast<std::uint32_t>(c.workers);
  return cfg;
}

// ---- Rendering --------------------------------------------------------------

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

json node_json(const tgs::StaticNode& n) {
  json j;
  j["id"] = n.id;
  j["attrs"] = json::object();
  for (const auto& [k, v] : n.attrs) j["attrs"][k] = v;
  j["edges"] = json::array();
  for (const auto& [key, attrs] : n.edges) {
    json e;
    e["neighbor"] = key.neighbor;
    e["direction"] = std::string(tgs::to_string(key.direction));
    e["attrs"] = json::object();
    for (const auto& [k, v] : attrs) e["attrs"][k] = v;
    j["edges"].push_back(std::move(e));
  }
  return j;
}

// CSV rows: record,id,peer,direction,key,value.
void write_node_rows(std::ostream& out, const tgs::StaticNode& n, const std::string& prefix) {
  out << prefix << "node," << n.id << ",,,,\n";
  for (const auto& [k, v] : n.attrs) {
    out << prefix << "attr," << n.id << ",,," << csv_field(k) << ',' << csv_field(v) << '\n';
  }
  for (const auto& [key, attrs] : n.edges) {
    out << prefix << "edge," << n.id << ',' << key.neighbor << ','
        << tgs::to_string(key.direction) << ",,\n";
    for (const auto& [k, v] : attrs) {
      out << prefix << "edge_attr," << n.id << ',' << key.neighbor << ','
          << tgs::to_string(key.direction) << ',' << csv_field(k) << ',' << csv_field(v) << '\n';
    }
  }
}

void write_graph(std::ostream& out, const tgs::GraphS& g, const std::string& format,
                 std::optional<tgs::Time> at = std::nullopt) {
  if (format == "jsonl") {
    for (const auto& [_, n] : g.nodes) {
      json j = node_json(n);
      if (at) j["time"] = *at;
      out << j.dump() << '\n';
    }
    return;
  }
  for (const auto& [_, n] : g.nodes) {
    write_node_rows(out, n, at ? std::to_string(*at) + "," : std::string{});
  }
}

void write_graph_header(std::ostream& out, const std::string& format, bool timed) {
  if (format == "csv") {
    out << (timed ? "time," : "") << "record,id,peer,direction,key,value\n";
  }
}

// State line, then the events in canonical log form.
void write_history(std::ostream& out, const tgs::NodeHistory& h, const std::string& format) {
  if (format == "jsonl") {
    json j;
    j["id"] = h.id;
    j["from"] = h.ts;
    j["to"] = h.te;
    j["state"] = h.initial ? node_json(*h.initial) : json(nullptr);
    out << j.dump() << '\n';
    for (const auto& e : h.events) {
      json ev;
      ev["event"] = tgs::format_event(e);
      out << ev.dump() << '\n';
    }
    return;
  }
  out << "STATE\t" << h.id << '\t' << h.ts << '\t'
      << (h.initial ? node_json(*h.initial).dump() : std::string("null")) << '\n';
  for (const auto& e : h.events) out << tgs::format_event(e) << '\n';
}

std::vector<tgs::Time> parse_times(const std::string& list) {
  std::vector<tgs::Time> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size()) throw UsageError("bad time '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void print_counters(const tgs::TafCounters& c) {
  std::cerr << "members_fetched=" << c.members_fetched << " f_calls=" << c.f_calls
            << " f_delta_calls=" << c.f_delta_calls << " micro_fetches=" << c.fetch.micro_fetches
            << " records=" << c.fetch.reads.records << '\n';
}

void print_fetch(const tgs::FetchCounters& c) {
  std::cerr << "micro_fetches=" << c.micro_fetches << " aux_fetches=" << c.aux_fetches
            << " records=" << c.reads.records << " bytes=" << c.reads.bytes << '\n';
}

// ---- Commands ---------------------------------------------------------------

int cmd_ingest(const std::string& path, const std::string& out_path) {
  const auto log = read_log(path);
  const auto norm = tgs::normalize_log(log);
  std::set<tgs::NodeId> nodes;
  for (const auto& e : log) {
    nodes.insert(e.subject);
    if (tgs::is_edge_event(e.kind)) nodes.insert(e.peer);
  }
  if (!out_path.empty()) tgs::write_event_log(out_path, log);
  std::cout << "events=" << log.size() << '\n'
            << "normalized_events=" << norm.events.size() << '\n'
            << "nodes=" << nodes.size() << '\n'
            << "final_nodes=" << norm.final_state.cardinality() << '\n';
  return 0;
}

int cmd_build(const Common& c, const std::string& log_path) {
  const fs::path dir = store_dir(c);
  const auto cfg = load_config(c);
  const auto log = read_log(log_path);
  if (tgs::TgiStore::exists(dir)) {
    if (!c.force) {
      throw tgs::Error(tgs::ErrorCode::kRefuseOverwrite,
                       dir.string() + " already holds an index; pass --force to replace it");
    }
    fs::remove_all(dir);
  }
  auto store = tgs::TgiStore::open(dir, c.shards);
  const auto tgi = tgs::Tgi::build(*store, log, cfg);
  std::cout << "events=" << tgi.meta().events << '\n' << "tscount=" << tgi.meta().tscount << '\n';
  return 0;
}

int cmd_update(const Common& c, const std::string& log_path) {
  auto store = open_existing(c);
  auto tgi = tgs::Tgi::open(*store);
  const auto batch = read_log(log_path);
  tgi.update(batch);
  std::cout << "events=" << tgi.meta().events << '\n' << "tscount=" << tgi.meta().tscount << '\n';
  return 0;
}

std::string join_times(const std::vector<tgs::Time>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(v[i]);
  }
  return out;
}

int cmd_describe(const Common& c) {
  auto store = open_existing(c);
  const auto tgi = tgs::Tgi::open(*store);
  const auto st = tgi.describe();
  if (c.format == "jsonl") {
    json j;
    j["start"] = st.meta.start;
    j["end"] = st.meta.end;
    j["events"] = st.meta.events;
    j["normalized_events"] = st.meta.normalized_events;
    j["tscount"] = st.meta.tscount;
    j["gtype"] = st.meta.gtype;
    j["delta_records"] = st.delta_records;
    j["delta_bytes"] = st.delta_bytes;
    j["meta_records"] = st.meta_records;
    j["meta_bytes"] = st.meta_bytes;
    std::cout << j.dump() << '\n';
    for (const auto& s : st.spans) {
      json js;
      js["tsid"] = s.tsid;
      js["start"] = s.start;
      js["end"] = s.end;
      js["checkpoints"] = s.checkpoints;
      js["tree_height"] = s.tree_height;
      js["tree_nodes"] = s.tree_nodes;
      js["events"] = s.events;
      js["partitions"] = s.partitions;
      std::cout << js.dump() << '\n';
    }
    return 0;
  }
  std::cout << "key,value\n"
            << "start," << st.meta.start << '\n'
            << "end," << st.meta.end << '\n'
            << "events," << st.meta.events << '\n'
            << "normalized_events," << st.meta.normalized_events << '\n'
            << "tscount," << st.meta.tscount << '\n'
            << "gtype," << st.meta.gtype << '\n'
            << "delta_records," << st.delta_records << '\n'
            << "delta_bytes," << st.delta_bytes << '\n';
  for (const auto& s : st.spans) {
    const std::string p = "span." + std::to_string(s.tsid) + ".";
    std::vector<tgs::Time> parts(s.partitions.begin(), s.partitions.end());
    std::cout << p << "start," << s.start << '\n'
              << p << "end," << s.end << '\n'
              << p << "events," << s.events << '\n'
              << p << "checkpoints," << join_times(s.checkpoints) << '\n'
              << p << "tree_height," << s.tree_height << '\n'
              << p << "tree_nodes," << s.tree_nodes << '\n'
              << p << "partitions," << join_times(parts) << '\n';
  }
  return 0;
}

struct QueryArgs {
  std::string kind;
  tgs::NodeId node = 0;
  tgs::Time time = 0;
  tgs::Time from = 0;
  tgs::Time to = 0;
  unsigned hops = 1;
  std::string times;
  std::string strategy = "auto";
};

tgs::KHopStrategy parse_strategy(const std::string& s) {
  if (s == "auto") return tgs::KHopStrategy::kAuto;
  if (s == "snapshot") return tgs::KHopStrategy::kSnapshotFirst;
  if (s == "expand") return tgs::KHopStrategy::kExpand;
  throw UsageError("strategy must be auto, snapshot or expand");
}

int cmd_query(const Common& c, const QueryArgs& q) {
  auto store = open_existing(c);
  const auto tgi = tgs::Tgi::open(*store);
  const tgs::Retriever r(tgi, c.workers);
  tgs::FetchCounters fc;
  std::ostream& out = std::cout;
  if (q.kind == "snapshot") {
    write_graph_header(out, c.format, false);
    write_graph(out, r.get_snapshot(q.time, &fc), c.format);
  } else if (q.kind == "node-at") {
    write_graph_header(out, c.format, false);
    tgs::GraphS g;
    if (auto n = r.get_node_at(q.node, q.time, &fc)) g.nodes.emplace(n->id, *n);
    write_graph(out, g, c.format);
  } else if (q.kind == "node-history") {
    write_history(out, r.get_node_history(q.node, q.from, q.to, &fc), c.format);
  } else if (q.kind == "khop") {
    write_graph_header(out, c.format, false);
    write_graph(out, r.get_k_hop(q.node, q.time, q.hops, parse_strategy(q.strategy), &fc),
                c.format);
  } else if (q.kind == "1hop-history") {
    const auto h = r.get_1hop_history(q.node, q.from, q.to, &fc);
    write_history(out, h.center, c.format);
    for (const auto& [nb, intervals] : h.neighbors) {
      for (const auto& iv : intervals) {
        if (c.format == "jsonl") {
          json j;
          j["neighbor"] = nb;
          j["from"] = iv.from;
          j["to"] = iv.to;
          j["adjacent_at_end"] = iv.adjacent_at_end;
          out << j.dump() << '\n';
        } else {
          out << "NEIGHBOR\t" << nb << '\t' << iv.from << '\t' << iv.to << '\t'
              << (iv.adjacent_at_end ? "open" : "closed") << '\n';
        }
        write_history(out, iv.history, c.format);
      }
    }
  } else if (q.kind == "neigh-versions") {
    const auto times = parse_times(q.times);
    write_graph_header(out, c.format, true);
    const auto graphs =
        r.get_neighborhood_versions(q.node, q.hops, times, parse_strategy(q.strategy), &fc);
    for (std::size_t i = 0; i < graphs.size(); ++i) write_graph(out, graphs[i], c.format, times[i]);
  } else {
    throw UsageError("unknown query kind '" + q.kind + "'");
  }
  print_fetch(fc);
  return 0;
}

struct AnalyzeArgs {
  std::string script;
  std::optional<tgs::Time> time;
  std::optional<tgs::Time> from;
  std::optional<tgs::Time> to;
  std::size_t samples = 10;
  std::string key = "label";
  std::string value = "x";
  unsigned hops = 1;
};

double degree_of(const tgs::StaticMember& m) {
  const auto* n = m.node();
  return n ? static_cast<double>(n->neighbor_count()) : 0.0;
}

double label_count_of(const tgs::StaticMember& m, const std::string& key, const std::string& value) {
  double count = 0;
  for (const auto& [_, s] : m.state.entries()) {
    if (!s) continue;
    auto it = s->attrs.find(key);
    if (it != s->attrs.end() && it->second == value) ++count;
  }
  return count;
}

int cmd_analyze(const Common& c, const AnalyzeArgs& a) {
  static const std::set<std::string> kScripts = {
      "max-clustering-coefficient", "community-compare", "network-density-evolution",
      "label-count-temporal", "label-count-delta"};
  if (!kScripts.contains(a.script)) {
    throw tgs::Error(tgs::ErrorCode::kUnknownScript, "unknown script '" + a.script + "'");
  }
  auto store = open_existing(c);
  const auto tgi = tgs::Tgi::open(*store);
  tgs::Taf taf(tgi, tgs::TafOptions{c.workers, 0});
  const tgs::Time ts = a.from.value_or(tgi.meta().start);
  const tgs::Time te = a.to ? *a.to + 1 : tgi.meta().end + 1;
  std::ostream& out = std::cout;

  if (a.script == "max-clustering-coefficient") {
    const tgs::Time t = a.time.value_or(tgi.meta().end);
    const auto son = taf.fetch(tgs::FetchSpec{}.between(t, t + 1));
    const tgs::GraphS g = taf.to_graph(son, t);
    const auto cc = taf.node_compute(taf.timeslice(son, t), [&](const tgs::StaticMember& m) {
      return tgs::clustering_coefficient(g, m.id);
    });
    std::map<tgs::NodeId, double> best;
    for (const auto& [id, v] : cc) {
      if (best.empty() || v > best.begin()->second) best = {{id, v}};
    }
    tgs::write_values_csv(out, best);
  } else if (a.script == "community-compare") {
    const tgs::Time t1 = a.from.value_or(tgi.meta().start);
    const tgs::Time t2 = a.to.value_or(tgi.meta().end);
    const auto son = taf.fetch(tgs::FetchSpec{}.between(std::min(t1, t2), std::max(t1, t2) + 1));
    tgs::write_values_csv(out, taf.compare(son, t2, t1, degree_of));
  } else if (a.script == "network-density-evolution") {
    const auto son = taf.fetch(tgs::FetchSpec{}.between(ts, te));
    const auto series = taf.evolution(
        son,
        [&](const tgs::StaticSet& s) {
          tgs::Delta all;
          std::set<tgs::NodeId> ids;
          for (const auto& m : s.members) {
            if (!m.node()) continue;
            ids.insert(m.id);
            tgs::delta_sum_into(all, m.state);
          }
          return tgs::density(tgs::induced_subgraph(all, ids));
        },
        tgs::UniformSample{a.samples});
    out << "id,time,value\n";
    for (const auto& [t, v] : series.points) out << "all," << t << ',' << tgs::format_value(v) << '\n';
  } else {
    const auto sots = taf.fetch(tgs::FetchSpec{}.between(ts, te).khop(a.hops));
    auto f = [&](const tgs::StaticMember& m) { return label_count_of(m, a.key, a.value); };
    std::map<tgs::NodeId, tgs::TimeSeries> series;
    if (a.script == "label-count-temporal") {
      series = taf.node_compute_temporal(sots, f);
    } else {
      auto f_delta = [&](const tgs::StaticMember& before, std::any&, double v,
                         const tgs::Event& e) {
        auto matches = [&](const tgs::NodeState* s) {
          if (!s || !*s) return false;
          auto it = (*s)->attrs.find(a.key);
          return it != (*s)->attrs.end() && it->second == a.value;
        };
        const tgs::NodeState* prior = before.state.find(e.subject);
        const bool was = matches(prior);
        bool now = was;
        switch (e.kind) {
          case tgs::EventKind::kDeleteNode:
            now = false;
            break;
          case tgs::EventKind::kSetNodeAttr:
            if (e.key == a.key) now = e.value == a.value;
            break;
          case tgs::EventKind::kDelNodeAttr:
            if (e.key == a.key) now = false;
            break;
          default:
            break;
        }
        return v + (now ? 1 : 0) - (was ? 1 : 0);
      };
      series = taf.node_compute_delta(sots, f, f_delta);
    }
    tgs::write_series_csv(out, series);
  }
  print_counters(taf.counters());
  return 0;
}

int cmd_generate(std::size_t events, std::size_t nodes, std::uint64_t seed) {
  tgs::RandomLogOptions opts;
  opts.events = events;
  opts.max_nodes = nodes;
  opts.seed = seed;
  tgs::write_event_log(std::cout, tgs::random_log(opts));
  return 0;
}

int exit_code_for(tgs::ErrorCode code) {
  switch (code) {
    case tgs::ErrorCode::kUnknownScript:
      return kExitUsage;
    case tgs::ErrorCode::kInvalidEvent:
    case tgs::ErrorCode::kUnsortedLog:
    case tgs::ErrorCode::kParseError:
    case tgs::ErrorCode::kBackendIO:
    case tgs::ErrorCode::kCorruptRecord:
    case tgs::ErrorCode::kNotFound:
    case tgs::ErrorCode::kOutOfOrderBatch:
    case tgs::ErrorCode::kInfeasibleBalance:
    case tgs::ErrorCode::kOutOfSpan:
    case tgs::ErrorCode::kEmptySeries:
    case tgs::ErrorCode::kUnalignedOperands:
    case tgs::ErrorCode::kRefuseOverwrite:
    case tgs::ErrorCode::kInvalidConfig:
      return kExitData;
    default:
      return kExitInternal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal graph index: build, query and analyze evolving graphs"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--store", common.store, "Index directory (default $STORE_DIR)");
    sub->add_option("-c,--workers", common.workers, "Worker count")->check(CLI::PositiveNumber);
    sub->add_option("--format", common.format, "Output format")
        ->check(CLI::IsMember({"csv", "jsonl"}));
  };

  std::string log_path;
  std::string out_path;
  auto* ingest = app.add_subcommand("ingest", "Validate an event log and report counts");
  ingest->add_option("log", log_path, "Event log")->required();
  ingest->add_option("-o,--out", out_path, "Write the canonical log here");

  auto* build = app.add_subcommand("build", "Build an index from an event log");
  build->add_option("log", log_path, "Event log")->required();
  add_common(build);
  build->add_option("--config", common.config, "Index config file (key=value)");
  build->add_option("-m,--shards", common.shards, "Storage shard count")
      ->check(CLI::PositiveNumber);
  build->add_option("--seed", common.seed, "Seed for hashing and partitioning");
  build->add_flag("--force", common.force, "Replace an existing index");

  auto* update = app.add_subcommand("update", "Append a batch of later events");
  update->add_option("log", log_path, "Event log batch")->required();
  add_common(update);

  auto* describe = app.add_subcommand("describe", "Print index statistics");
  add_common(describe);

  QueryArgs q;
  auto* query = app.add_subcommand("query", "Run a retrieval query");
  query->add_option("kind", q.kind, "snapshot|node-at|node-history|khop|1hop-history|neigh-versions")
      ->required()
      ->check(CLI::IsMember(
          {"snapshot", "node-at", "node-history", "khop", "1hop-history", "neigh-versions"}));
  add_common(query);
  query->add_option("--node", q.node, "Node id");
  query->add_option("--time", q.time, "Time point");
  query->add_option("--from", q.from, "Range start");
  query->add_option("--to", q.to, "Range end (inclusive)");
  query->add_option("--hops", q.hops, "Neighborhood radius");
  query->add_option("--times", q.times, "Comma-separated time points");
  query->add_option("--strategy", q.strategy, "auto|snapshot|expand");

  AnalyzeArgs a;
  auto* analyze = app.add_subcommand("analyze", "Run a built-in analysis script");
  analyze->add_option("script", a.script,
                      "max-clustering-coefficient|community-compare|network-density-evolution|"
                      "label-count-temporal|label-count-delta")
      ->required();
  add_common(analyze);
  analyze->add_option("--time", a.time, "Time point");
  analyze->add_option("--from", a.from, "Range start");
  analyze->add_option("--to", a.to, "Range end (inclusive)");
  analyze->add_option("--samples", a.samples, "Sample points")->check(CLI::PositiveNumber);
  analyze->add_option("--key", a.key, "Label attribute key");
  analyze->add_option("--value", a.value, "Label attribute value");
  analyze->add_option("--hops", a.hops, "Subgraph radius");

  std::size_t gen_events = 5000;
  std::size_t gen_nodes = 300;
  std::uint64_t gen_seed = 1;
  auto* generate = app.add_subcommand("generate", "Write a random valid event log to stdout");
  generate->add_option("--events", gen_events, "Event count");
  generate->add_option("--nodes", gen_nodes, "Maximum node ids");
  generate->add_option("--seed", gen_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(log_path, out_path);
    if (*build) return cmd_build(common, log_path);
    if (*update) return cmd_update(common, log_path);
    if (*describe) return cmd_describe(common);
    if (*query) return cmd_query(common, q);
    if (*analyze) return cmd_analyze(common, a);
    if (*generate) return cmd_generate(gen_events, gen_nodes, gen_seed);
  } catch (const UsageError& e) {
    std::cerr << "tgs: " << e.what() << '\n';
    return kExitUsage;
  } catch (const tgs::ParseError& e) {
    std::cerr << "tgs: parse error: " << e.what() << '\n';
    return kExitData;
  } catch (const tgs::Error& e) {
    std::cerr << "tgs: " << tgs::to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "tgs: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}
