#include "tgs/serialize.hpp"

#include <zlib.h>

#include "tgs/error.hpp"

namespace tgs {

namespace {

[[noreturn]] void corrupt(const std::string& why) {
  throw Error(ErrorCode::kCorruptRecord, why);
}

std::string compress_body(std::string_view body) {
  uLongf cap = compressBound(static_cast<uLong>(body.size()));
  std::string out(cap, '\0');
  int rc = compress2(reinterpret_cast<Bytef*>(out.data()), &cap,
                     reinterpret_cast<const Bytef*>(body.data()),
                     static_cast<uLong>(body.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw Error(ErrorCode::kBackendIO, "zlib compress failed");
  out.resize(cap);
  // Raw length is kept in front so inflation needs no guessing.
  ByteWriter w;
  w.varint(body.size());
  return w.take() + out;
}

std::string decompress_body(std::string_view stored) {
  ByteReader r(stored);
  std::uint64_t raw_len = r.varint();
  std::size_t header = 0;
  for (std::uint64_t v = raw_len;; v >>= 7) {
    ++header;
    if (v < 0x80) break;
  }
  if (raw_len > (std::uint64_t{1} << 32)) corrupt("implausible inflated length");
  std::string out(raw_len, '\0');
  uLongf len = static_cast<uLongf>(raw_len);
  int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &len,
                      reinterpret_cast<const Bytef*>(stored.data() + header),
                      static_cast<uLong>(stored.size() - header));
  if (rc != Z_OK || len != raw_len) corrupt("zlib inflate failed");
  return out;
}

}  // namespace

void ByteWriter::varint(std::uint64_t v) {
  while (v >= 0x80) {
    buf_.push_back(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  buf_.push_back(static_cast<char>(v));
}

void ByteWriter::str(std::string_view s) {
  varint(s.size());
  buf_.append(s);
}

void ByteWriter::attrs(const AttrMap& a) {
  varint(a.size());
  for (const auto& [k, v] : a) {
    str(k);
    str(v);
  }
}

void ByteWriter::node(const StaticNode& n) {
  varint(n.id);
  attrs(n.attrs);
  varint(n.edges.size());
  for (const auto& [key, a] : n.edges) {
    varint(key.neighbor);
    u8(static_cast<std::uint8_t>(key.direction));
    attrs(a);
  }
}

void ByteWriter::event(const Event& e) {
  varint(e.time);
  u8(static_cast<std::uint8_t>(e.kind));
  varint(e.subject);
  if (is_edge_event(e.kind)) {
    varint(e.peer);
    u8(static_cast<std::uint8_t>(e.direction));
  }
  if (has_key(e.kind)) str(e.key);
  if (has_value(e.kind)) str(e.value);
}

std::uint8_t ByteReader::u8() {
  if (pos_ >= in_.size()) corrupt("truncated record");
  return static_cast<std::uint8_t>(in_[pos_++]);
}

std::uint64_t ByteReader::varint() {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    std::uint8_t b = u8();
    v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
    if ((b & 0x80) == 0) return v;
  }
  corrupt("varint too long");
}

std::uint32_t ByteReader::varint32() {
  std::uint64_t v = varint();
  if (v > 0xffffffffULL) corrupt("value exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

std::string ByteReader::str() {
  std::uint64_t n = varint();
  if (n > in_.size() - pos_) corrupt("truncated string");
  std::string s(in_.substr(pos_, n));
  pos_ += n;
  return s;
}

AttrMap ByteReader::attrs() {
  AttrMap a;
  std::uint64_t n = varint();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string k = str();
    a.insert_or_assign(std::move(k), str());
  }
  return a;
}

StaticNode ByteReader::node() {
  StaticNode n;
  n.id = varint();
  n.attrs = attrs();
  std::uint64_t edges = varint();
  for (std::uint64_t i = 0; i < edges; ++i) {
    EdgeKey key;
    key.neighbor = varint();
    std::uint8_t d = u8();
    if (d > 1) corrupt("bad direction");
    key.direction = static_cast<Direction>(d);
    n.edges.insert_or_assign(key, attrs());
  }
  return n;
}

Event ByteReader::event() {
  Event e;
  e.time = varint();
  std::uint8_t kind = u8();
  if (kind >= kEventKindCount) corrupt("bad event kind");
  e.kind = static_cast<EventKind>(kind);
  e.subject = varint();
  if (is_edge_event(e.kind)) {
    e.peer = varint();
    std::uint8_t d = u8();
    if (d > 1) corrupt("bad direction");
    e.direction = static_cast<Direction>(d);
  }
  if (has_key(e.kind)) e.key = str();
  if (has_value(e.kind)) e.value = str();
  return e;
}

void ByteReader::expect_done() const {
  if (!done()) corrupt("trailing bytes in record");
}

std::string seal_record(RecordKind kind, std::string_view body, bool compress) {
  std::string stored = compress ? compress_body(body) : std::string(body);
  if (stored.size() > 0xffffffffULL) {
    throw Error(ErrorCode::kBackendIO, "record body exceeds 4 GiB");
  }
  std::string out;
  out.reserve(kEnvelopeSize + stored.size());
  out.push_back(static_cast<char>(kind));
  out.push_back(static_cast<char>(kFormatVersion));
  out.push_back(static_cast<char>(compress ? kFlagCompressed : 0));
  const auto n = static_cast<std::uint32_t>(stored.size());
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((n >> shift) & 0xff));
  }
  out += stored;
  return out;
}

std::string open_record(RecordKind expected, std::string_view bytes) {
  if (bytes.size() < kEnvelopeSize) corrupt("record shorter than envelope");
  if (static_cast<std::uint8_t>(bytes[0]) != static_cast<std::uint8_t>(expected)) {
    corrupt("unexpected record kind " +
            std::to_string(static_cast<std::uint8_t>(bytes[0])));
  }
  if (static_cast<std::uint8_t>(bytes[1]) != kFormatVersion) {
    corrupt("unsupported format version " +
            std::to_string(static_cast<std::uint8_t>(bytes[1])));
  }
  const auto flags = static_cast<std::uint8_t>(bytes[2]);
  if (flags & ~kFlagCompressed) corrupt("unknown record flags");
  std::uint32_t n = 0;
  for (int i = 3; i < 7; ++i) n = (n << 8) | static_cast<std::uint8_t>(bytes[i]);
  if (n != bytes.size() - kEnvelopeSize) corrupt("record length mismatch");
  std::string_view body = bytes.substr(kEnvelopeSize);
  return (flags & kFlagCompressed) ? decompress_body(body) : std::string(body);
}

std::string serialize_delta(const Delta& d, bool compress) {
  ByteWriter w;
  w.u8(d.provenance() ? static_cast<std::uint8_t>(*d.provenance()) : 0);
  w.varint(d.size());
  w.varint(d.cardinality());
  for (const auto& [id, state] : d.entries()) {
    w.varint(id);
    if (state) {
      w.u8(1);
      w.node(*state);
    } else {
      w.u8(0);
    }
  }
  return seal_record(RecordKind::kDelta, w.bytes(), compress);
}

Delta deserialize_delta(std::string_view bytes) {
  std::string body = open_record(RecordKind::kDelta, bytes);
  ByteReader r(body);
  std::uint8_t prov = r.u8();
  if (prov > static_cast<std::uint8_t>(DeltaKind::kDerived)) corrupt("bad provenance");
  std::uint64_t size = r.varint();
  std::uint64_t count = r.varint();
  Delta::Entries entries;
  for (std::uint64_t i = 0; i < count; ++i) {
    NodeId id = r.varint();
    std::uint8_t live = r.u8();
    if (live > 1) corrupt("bad entry tag");
    NodeState state;
    if (live) {
      state = r.node();
      if (state->id != id) corrupt("entry id mismatch");
    }
    entries.insert_or_assign(id, std::move(state));
  }
  r.expect_done();
  if (entries.size() != count || size < count) corrupt("bad delta counts");
  Delta d(std::move(entries),
          prov ? std::optional<DeltaKind>(static_cast<DeltaKind>(prov))
               : std::nullopt);
  d.restore_size(size);
  return d;
}

std::string serialize_masked_events(const std::vector<MaskedEvent>& events,
                                    bool compress) {
  ByteWriter w;
  w.varint(events.size());
  for (const auto& me : events) {
    w.varint(me.seq);
    w.u8(me.mask);
    w.event(me.event);
  }
  return seal_record(RecordKind::kEventList, w.bytes(), compress);
}

std::vector<MaskedEvent> deserialize_masked_events(std::string_view bytes) {
  std::string body = open_record(RecordKind::kEventList, bytes);
  ByteReader r(body);
  std::vector<MaskedEvent> out(r.varint());
  for (auto& me : out) {
    me.seq = r.varint();
    me.mask = r.u8();
    me.event = r.event();
  }
  r.expect_done();
  return out;
}

std::string serialize_event_list(const EventList& el, bool compress) {
  ByteWriter w;
  w.u8(el.span.lo ? 1 : 0);
  if (el.span.lo) w.varint(*el.span.lo);
  w.varint(el.span.hi);
  w.varint(el.events.size());
  for (const auto& se : el.events) {
    w.varint(se.seq);
    w.event(se.event);
  }
  return seal_record(RecordKind::kEventList, w.bytes(), compress);
}

EventList deserialize_event_list(std::string_view bytes) {
  std::string body = open_record(RecordKind::kEventList, bytes);
  ByteReader r(body);
  EventList el;
  if (r.u8()) el.span.lo = r.varint();
  el.span.hi = r.varint();
  el.events.resize(r.varint());
  for (auto& se : el.events) {
    se.seq = r.varint();
    se.event = r.event();
  }
  r.expect_done();
  return el;
}

std::string serialize_graph(const GraphS& g, bool compress) {
  ByteWriter w;
  w.varint(g.nodes.size());
  for (const auto& [id, node] : g.nodes) w.node(node);
  return seal_record(RecordKind::kGraph, w.bytes(), compress);
}

GraphS deserialize_graph(std::string_view bytes) {
  std::string body = open_record(RecordKind::kGraph, bytes);
  ByteReader r(body);
  GraphS g;
  std::uint64_t n = r.varint();
  for (std::uint64_t i = 0; i < n; ++i) {
    StaticNode node = r.node();
    NodeId id = node.id;
    g.nodes.insert_or_assign(id, std::move(node));
  }
  r.expect_done();
  return g;
}

}  // namespace tgs
