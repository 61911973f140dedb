#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "tgs/keys.hpp"
#include "tgs/kv.hpp"
#include "tgs/types.hpp"

namespace tgs {

struct DeltaRecord {
  DeltaKey key;
  std::string dval;

  bool operator==(const DeltaRecord&) const = default;
};

struct ChainPointer {
  Time time = 0;
  DeltaKey key;

  auto operator<=>(const ChainPointer&) const = default;
};

struct VersionChainRecord {
  NodeId nid = 0;
  std::map<std::uint32_t, std::vector<ChainPointer>> vchain;

  bool operator==(const VersionChainRecord&) const = default;
};

enum class PartitioningMode : std::uint8_t { kRandom = 0, kLocality = 1 };

struct TimeSpanRecord {
  std::uint32_t tsid = 0;
  Time start = 0;
  Time end = 0;
  // checkpts[0] == start is the exclusive leaf: state before the span.
  std::vector<Time> checkpts;
  std::uint32_t k = 2;
  std::uint32_t df = 0;
  // Micro-partition count per horizontal partition.
  std::vector<std::uint32_t> partitions;
  std::uint64_t first_seq = 0;
  std::uint64_t event_count = 0;
  PartitioningMode mode = PartitioningMode::kRandom;
  bool aux = false;
  std::uint64_t seed = 0;

  bool operator==(const TimeSpanRecord&) const = default;
};

struct GraphMetaRecord {
  Time start = 0;
  Time end = 0;
  // Events as ingested; normalized_events also counts DeleteNode expansions.
  std::uint64_t events = 0;
  std::uint64_t normalized_events = 0;
  std::uint32_t tscount = 0;
  std::string gtype = "directed";

  bool operator==(const GraphMetaRecord&) const = default;
};

struct MicroPartitionRecord {
  NodeId nid = 0;
  std::uint32_t tsid = 0;
  std::uint32_t pid = 0;

  bool operator==(const MicroPartitionRecord&) const = default;
};

std::string serialize_chain(const std::vector<ChainPointer>& chain);
std::vector<ChainPointer> deserialize_chain(std::string_view bytes);
std::string serialize_timespan(const TimeSpanRecord& r);
TimeSpanRecord deserialize_timespan(std::string_view bytes);
std::string serialize_graph_meta(const GraphMetaRecord& r);
GraphMetaRecord deserialize_graph_meta(std::string_view bytes);

// The five tables over pluggable backends. Deltas live on `shard_count()`
// shard backends chosen by placement_of(); the other tables share a meta
// backend. Table prefixes on the meta backend:
//
//   'V' nid(8) tsid(4)   version chain of one node within one span
//   'T' tsid(4)          timespan
//   'G'                  graph meta
//   'M' tsid(4) nid(8)   micro-partition assignment
//   'C'                  index configuration text
//
// Writes are grouped into an Epoch and become visible together on commit().
class TgiStore {
 public:
  class Epoch {
   public:
    void put_delta(const DeltaRecord& rec);
    void put_versions(NodeId nid, std::uint32_t tsid,
                      const std::vector<ChainPointer>& chain);
    void put_timespan(const TimeSpanRecord& rec);
    void put_graph_meta(const GraphMetaRecord& rec);
    void put_micropartition(const MicroPartitionRecord& rec);
    void put_config(const std::string& text);

    std::size_t delta_count() const { return delta_count_; }

   private:
    friend class TgiStore;
    explicit Epoch(std::uint32_t shards) : shards_(shards) {}

    std::vector<WriteBatch> shards_;
    WriteBatch meta_;
    std::size_t delta_count_ = 0;
  };

  static std::unique_ptr<TgiStore> in_memory(std::uint32_t shards);
  // Opens an existing store, or creates an empty one with `shards` shards.
  static std::unique_ptr<TgiStore> open(const std::filesystem::path& dir,
                                        std::uint32_t shards = 1);
  static bool exists(const std::filesystem::path& dir);

  std::uint32_t shard_count() const {
    return static_cast<std::uint32_t>(shards_.size());
  }
  bool persistent() const { return dir_.has_value(); }

  Epoch begin_epoch() const { return Epoch(shard_count()); }
  void commit(Epoch&& epoch);

  std::optional<std::string> get_delta(const DeltaKey& key) const;
  // Records under the prefix, in key order. With sid given the scan touches
  // one shard; otherwise all shards are merged.
  std::vector<DeltaRecord> scan_delta(std::uint32_t tsid,
                                      std::optional<std::uint32_t> sid = {},
                                      std::optional<std::uint64_t> did = {}) const;
  // Records with lo <= key < hi; both keys must share one placement.
  std::vector<DeltaRecord> scan_delta_range(const DeltaKey& lo,
                                            const DeltaKey& hi) const;

  std::optional<VersionChainRecord> get_versions(NodeId nid) const;
  std::optional<std::vector<ChainPointer>> get_versions(NodeId nid,
                                                        std::uint32_t tsid) const;
  std::vector<NodeId> node_ids() const;

  std::optional<TimeSpanRecord> get_timespan(std::uint32_t tsid) const;
  std::vector<TimeSpanRecord> timespans() const;
  std::optional<GraphMetaRecord> get_graph_meta() const;
  std::optional<std::uint32_t> get_micropartition(NodeId nid,
                                                  std::uint32_t tsid) const;
  std::vector<MicroPartitionRecord> micropartitions(std::uint32_t tsid) const;
  std::optional<std::string> get_config() const;

  BackendStats delta_stats() const;
  BackendStats meta_stats() const;
  const KvBackend& shard(std::uint32_t i) const { return *shards_[i]; }

 private:
  TgiStore() = default;

  void write_manifest() const;

  std::optional<std::filesystem::path> dir_;
  std::unique_ptr<KvBackend> meta_;
  std::vector<std::unique_ptr<KvBackend>> shards_;
  std::mutex writer_mu_;
  mutable std::shared_mutex epoch_mu_;
};

}  // namespace tgs
