#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocuflow/core/json_io.hpp"

namespace ocuflow {

enum class EventKind {
  StageEnter,
  Invocation,
  ValidationFailure,
  ConflictDetected,
  Revision,
  Citation,
  FinalReport,
  Warning,
  StepSkipped,
  Failure,
};

std::string_view to_string(EventKind k) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view s) noexcept;
bool is_terminal(EventKind k) noexcept;

struct TraceEvent {
  std::uint64_t seq = 0;
  std::int64_t ts = 0;  // logical milliseconds since case start
  EventKind kind = EventKind::StageEnter;
  Json payload;
};

// Fixed key order: {"seq":..,"ts":..,"kind":..,"payload":..}
std::string serialize_event(const TraceEvent& e);
TraceEvent parse_event(std::string_view line);

struct TraceHeader {
  std::string case_id;
  std::uint64_t seed = 0;
  std::string catalog_hash;
  int tier = 0;
};

std::string serialize_header(const TraceHeader& h);
TraceHeader parse_header(std::string_view line);

// Append-only, single writer per case. Subscribers are called under the
// trace lock in seq order, so a late subscriber that replays first and then
// registers sees every event exactly once.
class ReasoningTrace {
 public:
  using Subscriber = std::function<void(const TraceEvent&)>;

  explicit ReasoningTrace(TraceHeader header) : header_(std::move(header)) {}

  const TraceHeader& header() const noexcept { return header_; }

  // ts must not go backwards; it is clamped to the previous event's ts.
  const TraceEvent& append(EventKind kind, Json payload, std::int64_t ts);
  std::int64_t now() const;

  std::vector<TraceEvent> events() const;
  std::size_t size() const;
  std::size_t count(EventKind kind) const;

  // Replays all existing events, then streams new ones.
  void subscribe(Subscriber s);

  // Header line followed by one line per event, each newline-terminated.
  std::string serialize() const;

 private:
  TraceHeader header_;
  mutable std::mutex mutex_;
  std::vector<TraceEvent> events_;
  std::vector<Subscriber> subscribers_;
};

}  // namespace ocuflow
