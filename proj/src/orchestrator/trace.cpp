#include "ocuflow/orchestrator/trace.hpp"

#include <algorithm>
#include <array>

#include "ocuflow/core/error.hpp"

namespace ocuflow {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 10> kKinds{{
    {EventKind::StageEnter, "stage_enter"},
    {EventKind::Invocation, "invocation"},
    {EventKind::ValidationFailure, "validation_failure"},
    {EventKind::ConflictDetected, "conflict_detected"},
    {EventKind::Revision, "revision"},
    {EventKind::Citation, "citation"},
    {EventKind::FinalReport, "final_report"},
    {EventKind::Warning, "warning"},
    {EventKind::StepSkipped, "step_skipped"},
    {EventKind::Failure, "failure"},
}};

}  // namespace

std::string_view to_string(EventKind k) noexcept {
  for (const auto& [kind, name] : kKinds) {
    if (kind == k) return name;
  }
  return "warning";
}

std::optional<EventKind> parse_event_kind(std::string_view s) noexcept {
  for (const auto& [kind, name] : kKinds) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

bool is_terminal(EventKind k) noexcept { return k == EventKind::FinalReport || k == EventKind::Failure; }

std::string serialize_event(const TraceEvent& e) {
  std::string out = "{\"seq\":" + std::to_string(e.seq) + ",\"ts\":" + std::to_string(e.ts) +
                    ",\"kind\":\"" + std::string(to_string(e.kind)) + "\",\"payload\":";
  out += e.payload.dump();
  out += "}";
  return out;
}

TraceEvent parse_event(std::string_view line) {
  auto doc = Json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::SchemaViolation, "event");
  TraceEvent e;
  try {
    e.seq = doc.at("seq").get<std::uint64_t>();
    e.ts = doc.at("ts").get<std::int64_t>();
    auto kind = parse_event_kind(doc.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::SchemaViolation, "kind");
    e.kind = *kind;
    e.payload = doc.at("payload");
  } catch (const Json::exception& ex) {
    throw Error(ErrorCode::SchemaViolation, std::string("event: ") + ex.what());
  }
  return e;
}

std::string serialize_header(const TraceHeader& h) {
  Json doc{{"case_id", h.case_id}, {"seed", h.seed}, {"catalog_hash", h.catalog_hash}, {"tier", h.tier}};
  return doc.dump();
}

TraceHeader parse_header(std::string_view line) {
  auto doc = Json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("case_id")) {
    throw Error(ErrorCode::SchemaViolation, "trace header");
  }
  return TraceHeader{doc["case_id"].get<std::string>(), doc.value("seed", std::uint64_t{0}),
                     doc.value("catalog_hash", std::string()), doc.value("tier", 0)};
}

const TraceEvent& ReasoningTrace::append(EventKind kind, Json payload, std::int64_t ts) {
  std::lock_guard lock(mutex_);
  TraceEvent e;
  e.seq = events_.size();
  e.ts = events_.empty() ? std::max<std::int64_t>(ts, 0) : std::max(ts, events_.back().ts);
  e.kind = kind;
  e.payload = std::move(payload);
  events_.push_back(std::move(e));
  for (const auto& s : subscribers_) s(events_.back());
  return events_.back();
}

std::int64_t ReasoningTrace::now() const {
  std::lock_guard lock(mutex_);
  return events_.empty() ? 0 : events_.back().ts;
}

std::vector<TraceEvent> ReasoningTrace::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

std::size_t ReasoningTrace::size() const {
  std::lock_guard lock(mutex_);
  return events_.size();
}

std::size_t ReasoningTrace::count(EventKind kind) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(events_.begin(), events_.end(), [&](const auto& e) { return e.kind == kind; }));
}

void ReasoningTrace::subscribe(Subscriber s) {
  std::lock_guard lock(mutex_);
  for (const auto& e : events_) s(e);
  subscribers_.push_back(std::move(s));
}

std::string ReasoningTrace::serialize() const {
  std::lock_guard lock(mutex_);
  std::string out = serialize_header(header_) + "\n";
  for (const auto& e : events_) out += serialize_event(e) + "\n";
  return out;
}

}  // namespace ocuflow
