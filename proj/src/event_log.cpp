#include "tgs/event_log.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "tgs/error.hpp"

namespace tgs {

std::string format_event(const Event& e) {
  std::string out = std::to_string(e.time);
  out += '\t';
  out += to_string(e.kind);
  out += '\t';
  out += std::to_string(e.subject);
  if (is_edge_event(e.kind)) {
    out += '\t';
    out += std::to_string(e.peer);
    out += '\t';
    out += to_string(e.direction);
  }
  if (has_key(e.kind)) {
    out += '\t';
    out += e.key;
  }
  if (has_value(e.kind)) {
    out += '\t';
    out += e.value;
  }
  return out;
}

void write_event_log(std::ostream& out, std::span<const Event> events) {
  for (const auto& e : events) out << format_event(e) << '\n';
}

void write_event_log(const std::filesystem::path& path,
                     std::span<const Event> events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kBackendIO, "cannot write " + path.string());
  write_event_log(out, events);
  if (!out) throw Error(ErrorCode::kBackendIO, "write failed: " + path.string());
}

namespace {

std::uint64_t parse_u64(std::string_view field, std::size_t line_no,
                        const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line_no, std::string("bad ") + what + " '" +
                                  std::string(field) + "'");
  }
  return v;
}

std::size_t expected_fields(EventKind kind) {
  std::size_t n = 3;
  if (is_edge_event(kind)) n += 2;
  if (has_key(kind)) n += 1;
  if (has_value(kind)) n += 1;
  return n;
}

// Keeps normalized logs representable in the canonical text format.
void check_text_fields(const Event& e) {
  auto bad = [](const std::string& s) {
    return s.empty() || s.find_first_of("\t\r\n") != std::string::npos;
  };
  if ((has_key(e.kind) && bad(e.key)) || (has_value(e.kind) && bad(e.value))) {
    throw Error(ErrorCode::kInvalidEvent,
                "attribute key/value must be non-empty and free of tabs and "
                "line breaks (t=" + std::to_string(e.time) + ")");
  }
}

}  // namespace

Event parse_event_line(std::string_view line, std::size_t line_no) {
  if (line.find('\r') != std::string_view::npos) {
    throw ParseError(line_no, "carriage return in record");
  }
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    fields.push_back(line.substr(pos, tab == std::string_view::npos
                                          ? std::string_view::npos
                                          : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  if (fields.size() < 3) throw ParseError(line_no, "too few fields");

  Event e;
  e.time = parse_u64(fields[0], line_no, "time");
  auto kind = parse_event_kind(fields[1]);
  if (!kind) {
    throw ParseError(line_no, "unknown kind '" + std::string(fields[1]) + "'");
  }
  e.kind = *kind;
  if (fields.size() != expected_fields(e.kind)) {
    throw ParseError(line_no, "expected " +
                                  std::to_string(expected_fields(e.kind)) +
                                  " fields for " + std::string(fields[1]));
  }
  e.subject = parse_u64(fields[2], line_no, "subject");
  std::size_t next = 3;
  if (is_edge_event(e.kind)) {
    e.peer = parse_u64(fields[next++], line_no, "peer");
    auto dir = parse_direction(fields[next++]);
    if (!dir) throw ParseError(line_no, "direction must be 'out' or 'in'");
    e.direction = *dir;
  }
  if (has_key(e.kind)) {
    if (fields[next].empty()) throw ParseError(line_no, "empty key");
    e.key = std::string(fields[next++]);
  }
  if (has_value(e.kind)) {
    if (fields[next].empty()) throw ParseError(line_no, "empty value");
    e.value = std::string(fields[next++]);
  }
  return e;
}

std::vector<Event> parse_event_log(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    events.push_back(parse_event_line(line, line_no));
  }
  return events;
}

std::vector<Event> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kBackendIO, "cannot open " + path.string());
  return parse_event_log(in);
}

NormalizedLog normalize_log(std::span<const Event> log, const Delta& initial) {
  NormalizedLog out;
  out.events.reserve(log.size());
  Delta state = initial.materialized();
  for (std::size_t i = 0; i < log.size(); ++i) {
    const Event& e = log[i];
    if (i > 0 && e.time < log[i - 1].time) {
      throw Error(ErrorCode::kUnsortedLog,
                  "event " + std::to_string(i) + " at t=" +
                      std::to_string(e.time) + " precedes t=" +
                      std::to_string(log[i - 1].time));
    }
    check_text_fields(e);
    if (e.kind == EventKind::kDeleteNode) {
      const NodeState* s = state.find(e.subject);
      if (s != nullptr && s->has_value()) {
        // Copy the keys: applying the expansion rewrites the record.
        std::vector<EdgeKey> keys;
        for (const auto& [key, _] : (*s)->edges) keys.push_back(key);
        for (const EdgeKey& key : keys) {
          Event del{e.time, EventKind::kDeleteEdge, e.subject, key.neighbor,
                    key.direction, {}, {}};
          apply_event(state, del);
          out.events.push_back(std::move(del));
        }
      }
    }
    apply_event(state, e);
    out.events.push_back(e);
  }
  out.final_state = state.materialized();
  return out;
}

}  // namespace tgs
