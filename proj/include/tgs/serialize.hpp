#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tgs/delta.hpp"
#include "tgs/event.hpp"
#include "tgs/graph.hpp"

namespace tgs {

// Record envelope: [kind u8][format version u8][flags u8][body length u32 BE]
// followed by the body. Flag bit 0 marks a zlib-compressed body; the length
// is that of the stored (possibly compressed) bytes.
enum class RecordKind : std::uint8_t {
  kDelta = 1,
  kEventList = 2,
  kVersionChain = 3,
  kTimeSpan = 4,
  kGraphMeta = 5,
  kMicroPartition = 6,
  kConfig = 7,
  kGraph = 8,
};

inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::uint8_t kFlagCompressed = 0x01;
inline constexpr std::size_t kEnvelopeSize = 7;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void varint(std::uint64_t v);
  void str(std::string_view s);
  void attrs(const AttrMap& a);
  void node(const StaticNode& n);
  void event(const Event& e);

  std::string take() { return std::move(buf_); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

// Throws Error(kCorruptRecord) on truncated or malformed input.
class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::uint8_t u8();
  std::uint64_t varint();
  std::uint32_t varint32();
  std::string str();
  AttrMap attrs();
  StaticNode node();
  Event event();

  bool done() const { return pos_ == in_.size(); }
  void expect_done() const;

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string seal_record(RecordKind kind, std::string_view body, bool compress);
// Verifies kind and version, decompresses, and returns the body.
std::string open_record(RecordKind expected, std::string_view bytes);

// An eventlist entry as stored in a micro-delta: which endpoints of the event
// belong to the micro-delta's scope.
struct MaskedEvent {
  std::uint64_t seq = 0;
  Event event;
  std::uint8_t mask = 0;

  bool operator==(const MaskedEvent&) const = default;
};

std::string serialize_delta(const Delta& d, bool compress = false);
Delta deserialize_delta(std::string_view bytes);

std::string serialize_masked_events(const std::vector<MaskedEvent>& events,
                                    bool compress = false);
std::vector<MaskedEvent> deserialize_masked_events(std::string_view bytes);

std::string serialize_event_list(const EventList& el, bool compress = false);
EventList deserialize_event_list(std::string_view bytes);

std::string serialize_graph(const GraphS& g, bool compress = false);
GraphS deserialize_graph(std::string_view bytes);

}  // namespace tgs
