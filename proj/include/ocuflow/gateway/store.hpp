#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ocuflow/core/json_io.hpp"
#include "ocuflow/gateway/feedback.hpp"

struct sqlite3;

namespace ocuflow::gateway {

// Single-file SQLite store for cases, trace events, reports, and feedback.
// Feedback is append-only. Thread-safe; one connection guarded by a mutex.
//
// Tables: cases(case_id, tier, status, submitted_at, document),
//         events(case_id, seq, line), reports(case_id, document),
//         feedback(id, case_id, received_at, document).
class Store {
 public:
  // ":memory:" opens a private in-memory database.
  explicit Store(const std::string& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  void put_case(const std::string& case_id, int tier, const Json& document);
  void set_status(const std::string& case_id, const std::string& status);
  std::optional<std::string> status(const std::string& case_id) const;
  std::optional<Json> case_document(const std::string& case_id) const;

  // Header line first (seq -1), then events by seq.
  void append_event_line(const std::string& case_id, std::int64_t seq, const std::string& line);
  std::vector<std::string> event_lines(const std::string& case_id) const;

  void put_report(const std::string& case_id, const Json& report);
  std::optional<Json> report(const std::string& case_id) const;

  std::int64_t add_feedback(const FeedbackRecord& record);
  std::vector<FeedbackRecord> feedback(const std::string& case_id = {}) const;

 private:
  void exec(const char* sql) const;

  sqlite3* db_ = nullptr;
  mutable std::mutex mutex_;
};

}  // namespace ocuflow::gateway
