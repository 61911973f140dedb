#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgs/delta.hpp"
#include "tgs/event.hpp"
#include "tgs/partitioner.hpp"
#include "tgs/serialize.hpp"
#include "tgs/store.hpp"

namespace tgs {

struct IndexConfig {
  // Events per timespan. A span is extended so that events sharing a
  // timestamp never straddle a boundary.
  std::uint64_t ts_events = 1000;
  std::uint32_t ns = 1;
  // Events per leaf gap.
  std::uint32_t l = 100;
  std::uint32_t psize = 100;
  // Tree arity. 1 means a single level: the root intersects all leaves.
  std::uint32_t k = 2;
  PartitioningMode partitioning = PartitioningMode::kRandom;
  // Auxiliary micro-deltas; locality mode only.
  bool replicate_1hop = false;
  std::uint64_t seed = 0;
  CollapseFn collapse = CollapseFn::kUnionMax;
  NodeWeightFn node_weights = NodeWeightFn::kUnit;
  bool compress = false;
  std::uint32_t build_workers = 1;

  bool operator==(const IndexConfig&) const = default;

  // Throws Error(kInvalidConfig).
  void validate() const;
  // key=value lines; '#' starts a comment. Unknown keys are rejected.
  static IndexConfig parse(std::string_view text);
  std::string to_text() const;
};

// Shape of one snapshot tree. Levels are listed root first; node (level, i)
// has children [i*k, (i+1)*k) on the next level.
class TreeShape {
 public:
  static TreeShape for_leaves(std::size_t leaves, std::uint32_t k);

  std::size_t height() const { return levels_.size() - 1; }
  std::size_t levels() const { return levels_.size(); }
  std::size_t level_size(std::size_t level) const { return levels_[level]; }
  std::size_t leaf_count() const { return levels_.back(); }
  std::size_t node_count() const;
  std::uint32_t arity() const { return arity_; }

  // Tree nodes take even dids in BFS order, root first.
  std::uint64_t did(std::size_t level, std::size_t index) const;
  std::size_t first_leaf(std::size_t level, std::size_t index) const;
  // (level, index) from root to the given leaf.
  std::vector<std::pair<std::size_t, std::size_t>> path_to_leaf(std::size_t leaf) const;

 private:
  std::vector<std::size_t> levels_;
  std::vector<std::size_t> offsets_;
  std::uint32_t arity_ = 2;
};

// Eventlist gaps take odd dids: gap j follows leaf j.
inline std::uint64_t eventlist_did(std::size_t gap) { return 2 * gap + 1; }
inline bool is_eventlist_did(std::uint64_t did) { return did % 2 == 1; }

// Leaf whose state anchors a read at t: the last checkpoint c_j <= t with
// j >= 1, else the exclusive leaf 0.
std::size_t anchor_leaf(const TimeSpanRecord& span, Time t);
// Whether a read at t needs events from the anchor's gap.
bool needs_events(const TimeSpanRecord& span, Time t);

struct ReadCounters {
  std::uint64_t records = 0;
  std::uint64_t aux_records = 0;
  std::uint64_t bytes = 0;

  ReadCounters& operator+=(const ReadCounters& o) {
    records += o.records;
    aux_records += o.aux_records;
    bytes += o.bytes;
    return *this;
  }
};

struct SpanStats {
  std::uint32_t tsid = 0;
  Time start = 0;
  Time end = 0;
  std::vector<Time> checkpoints;
  std::size_t tree_height = 0;
  std::size_t tree_nodes = 0;
  std::uint64_t events = 0;
  std::vector<std::uint32_t> partitions;
};

struct IndexStats {
  GraphMetaRecord meta;
  std::vector<SpanStats> spans;
  std::uint64_t delta_records = 0;
  std::uint64_t delta_bytes = 0;
  std::uint64_t meta_records = 0;
  std::uint64_t meta_bytes = 0;
};

// Handle over a store holding one index.
class Tgi {
 public:
  // The store must be empty. Throws UnsortedLog, InvalidEvent.
  static Tgi build(TgiStore& store, std::span<const Event> log,
                   const IndexConfig& cfg);
  // Reads configuration and span metadata back from the store.
  static Tgi open(TgiStore& store);

  // Appends a batch as new timespans. Every batch time must be later than the
  // current end. Throws OutOfOrderBatch.
  void update(std::span<const Event> batch);

  IndexStats describe() const;

  TgiStore& store() const { return *store_; }
  const IndexConfig& config() const { return cfg_; }
  const GraphMetaRecord& meta() const { return meta_; }
  const std::vector<TimeSpanRecord>& spans() const { return spans_; }
  bool empty() const { return spans_.empty(); }

  // Span whose range [start, next start) holds t; nullopt before the graph.
  std::optional<std::size_t> span_for(Time t) const;
  std::uint32_t sid_of(NodeId id) const;
  // Home pid of a node within a span; nullopt when the node has no record
  // there.
  std::optional<std::uint32_t> pid_of(NodeId id, const TimeSpanRecord& span) const;

  // State of micro-partitions [pid_lo, pid_hi) of one horizontal partition at
  // time t (t within the span's range). Tombstones kept.
  Delta materialize(const TimeSpanRecord& span, std::uint32_t sid,
                    std::uint32_t pid_lo, std::uint32_t pid_hi, Time t,
                    ReadCounters* counters = nullptr) const;

  // Full graph state at t, tombstones dropped. Single-threaded.
  Delta state_at(Time t) const;

 private:
  explicit Tgi(TgiStore& store) : store_(&store) {}

  void append_spans(std::span<const Event> normalized, std::uint64_t first_seq,
                    const Delta& prior);
  void reload();

  TgiStore* store_;
  IndexConfig cfg_;
  GraphMetaRecord meta_;
  std::vector<TimeSpanRecord> spans_;
};

// Reads the records of (tsid, sid, did) with pid in [pid_lo, pid_hi).
std::vector<DeltaRecord> read_micro_range(const TgiStore& store, std::uint32_t tsid,
                                          std::uint32_t sid, std::uint64_t did,
                                          std::uint32_t pid_lo, std::uint32_t pid_hi,
                                          ReadCounters* counters);

// Merges eventlist micro-deltas: copies of one event are joined by sequence
// number with their masks or-ed, and the result is ordered by sequence.
std::vector<MaskedEvent> merge_masked(std::vector<std::vector<MaskedEvent>> parts);

}  // namespace tgs
