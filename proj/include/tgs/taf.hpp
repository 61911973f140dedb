#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tgs/delta.hpp"
#include "tgs/event.hpp"
#include "tgs/graph.hpp"
#include "tgs/retrieval.hpp"

namespace tgs {

// Evolution of one node (hops == 0) or of the subgraph induced by every node
// that falls within `hops` of the center at some time in [ts, te).
//
// `initial` holds just before ts, and every event lies in [ts, te). Versions
// start at ts and at each event time, so they tile the span.
struct TemporalMember {
  NodeId id = 0;
  unsigned hops = 0;
  Time ts = 0;
  Time te = 0;
  std::set<NodeId> universe;
  // Live nodes of the universe only. Subgraph records keep only edges inside
  // the universe.
  Delta initial;
  std::vector<Event> events;

  bool operator==(const TemporalMember&) const = default;

  // Throws OutOfSpan unless ts <= t < te.
  Delta state_at(Time t) const;
  std::vector<Time> change_points() const;
};

// One member materialized at one time.
struct StaticMember {
  NodeId id = 0;
  Time time = 0;
  Delta state;

  const StaticNode* node() const;
  bool operator==(const StaticMember&) const = default;
};

struct StaticSet {
  Time time = 0;
  std::vector<StaticMember> members;  // ordered by id

  bool operator==(const StaticSet&) const = default;
};

struct TimeSeries {
  std::vector<std::pair<Time, double>> points;  // strictly increasing times

  bool operator==(const TimeSeries&) const = default;
  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

struct AllChangePoints {};
struct UniformSample {
  std::size_t n = 1;
};
using TimepointFn = std::function<std::vector<Time>(const TemporalMember&)>;
// Explicit times, or a rule resolved per member (or over the whole set for
// evolution).
using TimepointSpec = std::variant<AllChangePoints, UniformSample, std::vector<Time>, TimepointFn>;

// n points ts + floor(i (te - ts) / n), duplicates removed.
std::vector<Time> uniform_sample(Time ts, Time te, std::size_t n);

// Set of temporal nodes (SoN) or temporal subgraphs (SoTS) over one span.
class TemporalSet {
 public:
  TemporalSet() = default;
  TemporalSet(Time ts, Time te, unsigned hops, std::vector<TemporalMember> members);

  Time ts() const { return ts_; }
  Time te() const { return te_; }
  unsigned hops() const { return hops_; }
  bool subgraphs() const { return hops_ > 0; }
  const std::vector<TemporalMember>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  const TemporalMember* find(NodeId id) const;

  bool operator==(const TemporalSet&) const = default;

 private:
  Time ts_ = 0;
  Time te_ = 0;
  unsigned hops_ = 0;
  std::vector<TemporalMember> members_;  // ordered by id
};

using MemberPredicate = std::function<bool(const TemporalMember&)>;
using StaticFn = std::function<double(const StaticMember&)>;
// Value after `e`, given the state before it. `aux` is per-member scratch that
// starts empty.
using DeltaFn = std::function<double(const StaticMember& before, std::any& aux,
                                     double value, const Event& e)>;
using SetFn = std::function<double(const StaticSet&)>;

struct TafCounters {
  std::uint64_t f_calls = 0;
  std::uint64_t f_delta_calls = 0;
  std::uint64_t members_fetched = 0;
  FetchCounters fetch;

  TafCounters& operator+=(const TafCounters& o);
};

struct TafOptions {
  std::size_t workers = 1;
  // When nonzero, node_compute_delta checks f against the running value after
  // every check_every-th event and throws InconsistentDelta on mismatch.
  std::size_t check_every = 0;
};

// Pending fetch specification. Nothing is read until fetch().
class FetchSpec {
 public:
  // Whole graph, full span.
  FetchSpec() = default;

  FetchSpec& ids(std::set<NodeId> ids);
  FetchSpec& where_id(std::function<bool(NodeId)> pred);
  // [ts, te).
  FetchSpec& between(Time ts, Time te);
  // Subgraph members over `hops`; 0 means node members.
  FetchSpec& khop(unsigned hops);

  const std::optional<std::set<NodeId>>& id_scope() const { return ids_; }
  const std::vector<std::function<bool(NodeId)>>& id_filters() const { return filters_; }
  std::optional<std::pair<Time, Time>> time_scope() const { return range_; }
  unsigned hops() const { return hops_; }

 private:
  std::optional<std::set<NodeId>> ids_;
  std::vector<std::function<bool(NodeId)>> filters_;
  std::optional<std::pair<Time, Time>> range_;
  unsigned hops_ = 0;
};

class Taf {
 public:
  explicit Taf(const Tgi& tgi, TafOptions opts = {});

  const TafOptions& options() const { return opts_; }
  const TafCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }

  // Members are grouped by the storage shard of their home placement; each
  // worker reads its shards' members directly. Members with no state and no
  // event in the span are skipped.
  TemporalSet fetch(const FetchSpec& spec = {});

  TemporalSet select(const TemporalSet& s, const MemberPredicate& pred) const;
  StaticSet timeslice(const TemporalSet& s, Time t) const;
  std::vector<StaticSet> timeslice(const TemporalSet& s, std::span<const Time> times) const;
  // Members at t (default ts), keeping only edges between members.
  GraphS to_graph(const TemporalSet& s, std::optional<Time> t = std::nullopt) const;

  // Throws MemberFailure naming the member when f throws.
  std::map<NodeId, double> node_compute(const StaticSet& s, const StaticFn& f);
  std::map<NodeId, TimeSeries> node_compute_temporal(const TemporalSet& s, const StaticFn& f,
                                                     const TimepointSpec& tp = AllChangePoints{},
                                                     const DeltaFn& f_delta = {});
  std::map<NodeId, TimeSeries> node_compute_delta(const TemporalSet& s, const StaticFn& f,
                                                  const DeltaFn& f_delta,
                                                  const TimepointSpec& tp = AllChangePoints{});

  // f(a member) - f(b member). Throws UnalignedOperands when ids differ.
  std::map<NodeId, double> compare(const StaticSet& a, const StaticSet& b, const StaticFn& f);
  std::map<NodeId, double> compare(const TemporalSet& s, Time t1, Time t2, const StaticFn& f);

  // Change points and uniform samples are taken over the whole set.
  TimeSeries evolution(const TemporalSet& s, const SetFn& f,
                       const TimepointSpec& tp = AllChangePoints{});

 private:
  std::vector<Time> resolve(const TimepointSpec& tp, const TemporalMember& m) const;
  std::vector<Time> resolve(const TimepointSpec& tp, const TemporalSet& s) const;

  const Tgi* tgi_;
  TafOptions opts_;
  TafCounters counters_;
};

enum class Aggregate : std::uint8_t { kPeak, kSaturate, kMax, kMin, kMean };

struct AggregateResult {
  std::optional<Time> time;
  double value = 0;

  bool operator==(const AggregateResult&) const = default;
};

// Peak is the earliest point holding the global maximum. Saturate is the
// earliest point after which every value stays within epsilon * |final| of
// the final value. Throws EmptySeries.
AggregateResult temp_aggregate(const TimeSeries& ts, Aggregate agg, double epsilon = 0.01);

// Shortest round-trip decimal form.
std::string format_value(double v);
// CSV with header id,time,value.
void write_series_csv(std::ostream& out, const std::map<NodeId, TimeSeries>& series);
// CSV with header id,value.
void write_values_csv(std::ostream& out, const std::map<NodeId, double>& values);

}  // namespace tgs
