#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tgs/delta.hpp"
#include "tgs/event.hpp"

namespace tgs {

// Canonical event-log text format: one record per line, '\n' terminated,
// fields separated by a single tab:
//
//   ADD_NODE, DELETE_NODE          time KIND subject
//   ADD_EDGE, DELETE_EDGE          time KIND subject peer direction
//   SET_NODE_ATTR                  time KIND subject key value
//   DEL_NODE_ATTR                  time KIND subject key
//   SET_EDGE_ATTR                  time KIND subject peer direction key value
//   DEL_EDGE_ATTR                  time KIND subject peer direction key
//
// Times and ids are unsigned decimal integers; direction is `out` or `in`.
// Keys and values are non-empty and contain no tab, CR or LF.

std::string format_event(const Event& e);
void write_event_log(std::ostream& out, std::span<const Event> events);
void write_event_log(const std::filesystem::path& path,
                     std::span<const Event> events);

// Throws ParseError carrying the 1-based line number.
Event parse_event_line(std::string_view line, std::size_t line_no);
std::vector<Event> parse_event_log(std::istream& in);
std::vector<Event> read_event_log(const std::filesystem::path& path);

struct NormalizedLog {
  std::vector<Event> events;
  Delta final_state;  // tombstones dropped
};

// Checks time order (UnsortedLog) and replays every event against `initial`
// (InvalidEvent). A DeleteNode whose node still has edges is expanded into
// explicit DeleteEdge events at the same time, so that afterwards every event
// changes only the records of the nodes it names.
NormalizedLog normalize_log(std::span<const Event> log,
                            const Delta& initial = Delta{});

}  // namespace tgs
