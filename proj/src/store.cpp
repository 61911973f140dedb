#include "tgs/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tgs/error.hpp"
#include "tgs/serialize.hpp"

namespace tgs {

namespace fs = std::filesystem;

namespace {

constexpr char kVersions = 'V';
constexpr char kTimespans = 'T';
constexpr char kGraph = 'G';
constexpr char kMicro = 'M';
constexpr char kConfig = 'C';

std::string versions_key(NodeId nid, std::optional<std::uint32_t> tsid) {
  std::string k(1, kVersions);
  append_be64(k, nid);
  if (tsid) append_be32(k, *tsid);
  return k;
}

std::string timespan_key(std::uint32_t tsid) {
  std::string k(1, kTimespans);
  append_be32(k, tsid);
  return k;
}

std::string micro_key(std::uint32_t tsid, std::optional<NodeId> nid) {
  std::string k(1, kMicro);
  append_be32(k, tsid);
  if (nid) append_be64(k, *nid);
  return k;
}

void write_key(ByteWriter& w, const DeltaKey& k) {
  w.varint(k.tsid);
  w.varint(k.sid);
  w.varint(k.did);
  w.varint(k.pid);
}

DeltaKey read_key(ByteReader& r) {
  DeltaKey k;
  k.tsid = r.varint32();
  k.sid = r.varint32();
  k.did = r.varint();
  k.pid = r.varint32();
  return k;
}

fs::path shard_dir(const fs::path& root, std::uint32_t i) {
  std::string name = std::to_string(i);
  name.insert(0, name.size() < 3 ? 3 - name.size() : 0, '0');
  return root / ("shard-" + name);
}

struct Manifest {
  std::uint32_t shards = 0;
  std::uint64_t meta_gen = 0;
  std::vector<std::uint64_t> shard_gens;
};

Manifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "MANIFEST");
  if (!in) throw Error(ErrorCode::kBackendIO, "cannot read MANIFEST in " + dir.string());
  auto bad = [&] {
    throw Error(ErrorCode::kCorruptRecord, "malformed MANIFEST in " + dir.string());
  };
  Manifest m;
  std::string tag, word;
  int version = 0;
  if (!(in >> tag >> version) || tag != "tgs-store" || version != 1) bad();
  if (!(in >> word >> m.shards) || word != "shards" || m.shards == 0) bad();
  if (!(in >> word >> m.meta_gen) || word != "meta") bad();
  if (!(in >> word) || word != "shard_gens") bad();
  m.shard_gens.resize(m.shards);
  for (auto& g : m.shard_gens) {
    if (!(in >> g)) bad();
  }
  return m;
}

}  // namespace

std::string serialize_chain(const std::vector<ChainPointer>& chain) {
  ByteWriter w;
  w.varint(chain.size());
  for (const auto& p : chain) {
    w.varint(p.time);
    write_key(w, p.key);
  }
  return seal_record(RecordKind::kVersionChain, w.bytes(), false);
}

std::vector<ChainPointer> deserialize_chain(std::string_view bytes) {
  std::string body = open_record(RecordKind::kVersionChain, bytes);
  ByteReader r(body);
  std::vector<ChainPointer> out(r.varint());
  for (auto& p : out) {
    p.time = r.varint();
    p.key = read_key(r);
  }
  r.expect_done();
  return out;
}

std::string serialize_timespan(const TimeSpanRecord& t) {
  ByteWriter w;
  w.varint(t.tsid);
  w.varint(t.start);
  w.varint(t.end);
  w.varint(t.checkpts.size());
  for (Time c : t.checkpts) w.varint(c);
  w.varint(t.k);
  w.varint(t.df);
  w.varint(t.partitions.size());
  for (auto p : t.partitions) w.varint(p);
  w.varint(t.first_seq);
  w.varint(t.event_count);
  w.u8(static_cast<std::uint8_t>(t.mode));
  w.u8(t.aux ? 1 : 0);
  w.varint(t.seed);
  return seal_record(RecordKind::kTimeSpan, w.bytes(), false);
}

TimeSpanRecord deserialize_timespan(std::string_view bytes) {
  std::string body = open_record(RecordKind::kTimeSpan, bytes);
  ByteReader r(body);
  TimeSpanRecord t;
  t.tsid = r.varint32();
  t.start = r.varint();
  t.end = r.varint();
  t.checkpts.resize(r.varint());
  for (auto& c : t.checkpts) c = r.varint();
  t.k = r.varint32();
  t.df = r.varint32();
  t.partitions.resize(r.varint());
  for (auto& p : t.partitions) p = r.varint32();
  t.first_seq = r.varint();
  t.event_count = r.varint();
  std::uint8_t mode = r.u8();
  if (mode > 1) throw Error(ErrorCode::kCorruptRecord, "bad partitioning mode");
  t.mode = static_cast<PartitioningMode>(mode);
  t.aux = r.u8() != 0;
  t.seed = r.varint();
  r.expect_done();
  return t;
}

std::string serialize_graph_meta(const GraphMetaRecord& g) {
  ByteWriter w;
  w.varint(g.start);
  w.varint(g.end);
  w.varint(g.events);
  w.varint(g.normalized_events);
  w.varint(g.tscount);
  w.str(g.gtype);
  return seal_record(RecordKind::kGraphMeta, w.bytes(), false);
}

GraphMetaRecord deserialize_graph_meta(std::string_view bytes) {
  std::string body = open_record(RecordKind::kGraphMeta, bytes);
  ByteReader r(body);
  GraphMetaRecord g;
  g.start = r.varint();
  g.end = r.varint();
  g.events = r.varint();
  g.normalized_events = r.varint();
  g.tscount = r.varint32();
  g.gtype = r.str();
  r.expect_done();
  return g;
}

// ---- Epoch ------------------------------------------------------------------

void TgiStore::Epoch::put_delta(const DeltaRecord& rec) {
  const auto shard = placement_of(rec.key, static_cast<std::uint32_t>(shards_.size()));
  shards_[shard].put(encode_delta_key(rec.key), rec.dval);
  ++delta_count_;
}

void TgiStore::Epoch::put_versions(NodeId nid, std::uint32_t tsid,
                                   const std::vector<ChainPointer>& chain) {
  meta_.put(versions_key(nid, tsid), serialize_chain(chain));
}

void TgiStore::Epoch::put_timespan(const TimeSpanRecord& rec) {
  meta_.put(timespan_key(rec.tsid), serialize_timespan(rec));
}

void TgiStore::Epoch::put_graph_meta(const GraphMetaRecord& rec) {
  meta_.put(std::string(1, kGraph), serialize_graph_meta(rec));
}

void TgiStore::Epoch::put_micropartition(const MicroPartitionRecord& rec) {
  std::string v;
  append_be32(v, rec.pid);
  meta_.put(micro_key(rec.tsid, rec.nid), std::move(v));
}

void TgiStore::Epoch::put_config(const std::string& text) {
  meta_.put(std::string(1, kConfig), text);
}

// ---- TgiStore ---------------------------------------------------------------

std::unique_ptr<TgiStore> TgiStore::in_memory(std::uint32_t shards) {
  if (shards == 0) throw Error(ErrorCode::kInvalidConfig, "shard count must be >= 1");
  std::unique_ptr<TgiStore> s(new TgiStore());
  s->meta_ = std::make_unique<MemoryBackend>();
  for (std::uint32_t i = 0; i < shards; ++i) {
    s->shards_.push_back(std::make_unique<MemoryBackend>());
  }
  return s;
}

bool TgiStore::exists(const fs::path& dir) {
  std::error_code ec;
  return fs::exists(dir / "MANIFEST", ec);
}

std::unique_ptr<TgiStore> TgiStore::open(const fs::path& dir,
                                         std::uint32_t shards) {
  std::unique_ptr<TgiStore> s(new TgiStore());
  s->dir_ = dir;
  Manifest m;
  if (exists(dir)) {
    m = read_manifest(dir);
  } else {
    if (shards == 0) throw Error(ErrorCode::kInvalidConfig, "shard count must be >= 1");
    m.shards = shards;
    m.shard_gens.assign(shards, 0);
  }
  s->meta_ = std::make_unique<FileBackend>(dir / "meta", m.meta_gen);
  for (std::uint32_t i = 0; i < m.shards; ++i) {
    s->shards_.push_back(
        std::make_unique<FileBackend>(shard_dir(dir, i), m.shard_gens[i]));
  }
  if (!exists(dir)) s->write_manifest();
  return s;
}

void TgiStore::write_manifest() const {
  std::ostringstream out;
  out << "tgs-store 1\nshards " << shards_.size() << "\nmeta "
      << meta_->generation() << "\nshard_gens";
  for (const auto& sh : shards_) out << ' ' << sh->generation();
  out << '\n';
  atomic_write_file(*dir_ / "MANIFEST", out.str());
}

void TgiStore::commit(Epoch&& epoch) {
  std::lock_guard writer(writer_mu_);
  std::vector<KvBackend*> touched;
  try {
    for (std::size_t i = 0; i < shards_.size(); ++i) {
      if (epoch.shards_[i].empty()) continue;
      shards_[i]->prepare(epoch.shards_[i]);
      touched.push_back(shards_[i].get());
    }
    if (!epoch.meta_.empty()) {
      meta_->prepare(epoch.meta_);
      touched.push_back(meta_.get());
    }
  } catch (...) {
    for (auto* b : touched) b->abort();
    throw;
  }
  if (touched.empty()) return;
  std::unique_lock swap(epoch_mu_);
  if (dir_) {
    // The manifest names the staged generations; renaming it into place is the
    // commit point for the whole epoch.
    std::ostringstream out;
    out << "tgs-store 1\nshards " << shards_.size() << "\nmeta "
        << (epoch.meta_.empty() ? meta_->generation() : meta_->staged_generation())
        << "\nshard_gens";
    for (std::size_t i = 0; i < shards_.size(); ++i) {
      out << ' '
          << (epoch.shards_[i].empty() ? shards_[i]->generation()
                                       : shards_[i]->staged_generation());
    }
    out << '\n';
    try {
      atomic_write_file(*dir_ / "MANIFEST", out.str());
    } catch (...) {
      for (auto* b : touched) b->abort();
      throw;
    }
  }
  for (auto* b : touched) b->publish();
  if (dir_) {
    for (auto* b : touched) static_cast<FileBackend*>(b)->prune_indexes();
  }
}

std::optional<std::string> TgiStore::get_delta(const DeltaKey& key) const {
  std::shared_lock lock(epoch_mu_);
  return shards_[placement_of(key, shard_count())]->get(encode_delta_key(key));
}

namespace {

std::vector<DeltaRecord> to_records(std::vector<KvPair>&& kvs) {
  std::vector<DeltaRecord> out;
  out.reserve(kvs.size());
  for (auto& [k, v] : kvs) out.push_back({decode_delta_key(k), std::move(v)});
  return out;
}

}  // namespace

std::vector<DeltaRecord> TgiStore::scan_delta(std::uint32_t tsid,
                                              std::optional<std::uint32_t> sid,
                                              std::optional<std::uint64_t> did) const {
  std::shared_lock lock(epoch_mu_);
  const std::string prefix = encode_delta_prefix(tsid, sid, did);
  if (sid) {
    const auto shard = placement_of(PlacementKey{tsid, *sid}, shard_count());
    return to_records(shards_[shard]->scan_prefix(prefix));
  }
  std::vector<DeltaRecord> out;
  for (const auto& sh : shards_) {
    auto part = to_records(sh->scan_prefix(prefix));
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  std::sort(out.begin(), out.end(),
            [](const DeltaRecord& a, const DeltaRecord& b) { return a.key < b.key; });
  return out;
}

std::vector<DeltaRecord> TgiStore::scan_delta_range(const DeltaKey& lo,
                                                    const DeltaKey& hi) const {
  if (lo.placement() != hi.placement()) {
    throw Error(ErrorCode::kInvalidConfig, "range scan must stay within one placement");
  }
  std::shared_lock lock(epoch_mu_);
  const auto shard = placement_of(lo, shard_count());
  return to_records(shards_[shard]->scan(encode_delta_key(lo), encode_delta_key(hi)));
}

std::optional<VersionChainRecord> TgiStore::get_versions(NodeId nid) const {
  std::shared_lock lock(epoch_mu_);
  auto kvs = meta_->scan_prefix(versions_key(nid, std::nullopt));
  if (kvs.empty()) return std::nullopt;
  VersionChainRecord rec;
  rec.nid = nid;
  for (const auto& [k, v] : kvs) {
    rec.vchain.emplace(read_be32(k, 9), deserialize_chain(v));
  }
  return rec;
}

std::optional<std::vector<ChainPointer>> TgiStore::get_versions(
    NodeId nid, std::uint32_t tsid) const {
  std::shared_lock lock(epoch_mu_);
  auto v = meta_->get(versions_key(nid, tsid));
  if (!v) return std::nullopt;
  return deserialize_chain(*v);
}

std::vector<NodeId> TgiStore::node_ids() const {
  std::shared_lock lock(epoch_mu_);
  std::vector<NodeId> out;
  for (const auto& [k, v] : meta_->scan_prefix(std::string(1, kVersions))) {
    NodeId id = read_be64(k, 1);
    if (out.empty() || out.back() != id) out.push_back(id);
  }
  return out;
}

std::optional<TimeSpanRecord> TgiStore::get_timespan(std::uint32_t tsid) const {
  std::shared_lock lock(epoch_mu_);
  auto v = meta_->get(timespan_key(tsid));
  if (!v) return std::nullopt;
  return deserialize_timespan(*v);
}

std::vector<TimeSpanRecord> TgiStore::timespans() const {
  std::shared_lock lock(epoch_mu_);
  std::vector<TimeSpanRecord> out;
  for (const auto& [k, v] : meta_->scan_prefix(std::string(1, kTimespans))) {
    out.push_back(deserialize_timespan(v));
  }
  return out;
}

std::optional<GraphMetaRecord> TgiStore::get_graph_meta() const {
  std::shared_lock lock(epoch_mu_);
  auto v = meta_->get(std::string(1, kGraph));
  if (!v) return std::nullopt;
  return deserialize_graph_meta(*v);
}

std::optional<std::uint32_t> TgiStore::get_micropartition(NodeId nid,
                                                          std::uint32_t tsid) const {
  std::shared_lock lock(epoch_mu_);
  auto v = meta_->get(micro_key(tsid, nid));
  if (!v) return std::nullopt;
  if (v->size() != 4) throw Error(ErrorCode::kCorruptRecord, "bad micropartition value");
  return read_be32(*v, 0);
}

std::vector<MicroPartitionRecord> TgiStore::micropartitions(std::uint32_t tsid) const {
  std::shared_lock lock(epoch_mu_);
  std::vector<MicroPartitionRecord> out;
  for (const auto& [k, v] : meta_->scan_prefix(micro_key(tsid, std::nullopt))) {
    if (v.size() != 4) throw Error(ErrorCode::kCorruptRecord, "bad micropartition value");
    out.push_back({read_be64(k, 5), tsid, read_be32(v, 0)});
  }
  return out;
}

std::optional<std::string> TgiStore::get_config() const {
  std::shared_lock lock(epoch_mu_);
  return meta_->get(std::string(1, kConfig));
}

BackendStats TgiStore::delta_stats() const {
  BackendStats total;
  for (const auto& sh : shards_) {
    BackendStats s = sh->stats();
    total.records += s.records;
    total.value_bytes += s.value_bytes;
  }
  return total;
}

BackendStats TgiStore::meta_stats() const { return meta_->stats(); }

}  // namespace tgs
