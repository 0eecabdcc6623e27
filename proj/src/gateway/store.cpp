#include "ocuflow/gateway/store.hpp"

#include <sqlite3.h>

#include <chrono>

#include "ocuflow/core/error.hpp"

namespace ocuflow::gateway {

namespace {

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      throw Error(ErrorCode::Io, std::string("sqlite prepare: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, const std::string& v) {
    sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Statement& bind(int i, std::int64_t v) {
    sqlite3_bind_int64(stmt_, i, v);
    return *this;
  }
  // true while rows remain
  bool step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw Error(ErrorCode::Io, std::string("sqlite step: ") + sqlite3_errmsg(db_));
  }
  std::string text(int col) const {
    auto* p = sqlite3_column_text(stmt_, col);
    return p ? std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
             : std::string();
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Store::Store(const std::string& path) {
  if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw Error(ErrorCode::Io, "cannot open store " + path + ": " + msg);
  }
  exec("PRAGMA journal_mode=WAL");
  exec("CREATE TABLE IF NOT EXISTS cases(case_id TEXT PRIMARY KEY, tier INTEGER, status TEXT, "
       "submitted_at INTEGER, document TEXT)");
  exec("CREATE TABLE IF NOT EXISTS events(case_id TEXT, seq INTEGER, line TEXT, PRIMARY KEY(case_id, seq))");
  exec("CREATE TABLE IF NOT EXISTS reports(case_id TEXT PRIMARY KEY, document TEXT)");
  exec("CREATE TABLE IF NOT EXISTS feedback(id INTEGER PRIMARY KEY AUTOINCREMENT, case_id TEXT, "
       "received_at INTEGER, document TEXT)");
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const char* sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw Error(ErrorCode::Io, "sqlite: " + msg);
  }
}

void Store::put_case(const std::string& case_id, int tier, const Json& document) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "INSERT OR REPLACE INTO cases VALUES(?, ?, 'running', ?, ?)");
  s.bind(1, case_id).bind(2, std::int64_t{tier}).bind(3, now_ms()).bind(4, document.dump());
  s.step();
}

void Store::set_status(const std::string& case_id, const std::string& status) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "UPDATE cases SET status = ? WHERE case_id = ?");
  s.bind(1, status).bind(2, case_id);
  s.step();
}

std::optional<std::string> Store::status(const std::string& case_id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT status FROM cases WHERE case_id = ?");
  s.bind(1, case_id);
  if (!s.step()) return std::nullopt;
  return s.text(0);
}

std::optional<Json> Store::case_document(const std::string& case_id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT document FROM cases WHERE case_id = ?");
  s.bind(1, case_id);
  if (!s.step()) return std::nullopt;
  return Json::parse(s.text(0));
}

void Store::append_event_line(const std::string& case_id, std::int64_t seq, const std::string& line) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "INSERT INTO events VALUES(?, ?, ?)");
  s.bind(1, case_id).bind(2, seq).bind(3, line);
  s.step();
}

std::vector<std::string> Store::event_lines(const std::string& case_id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT line FROM events WHERE case_id = ? ORDER BY seq");
  s.bind(1, case_id);
  std::vector<std::string> out;
  while (s.step()) out.push_back(s.text(0));
  return out;
}

void Store::put_report(const std::string& case_id, const Json& report) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "INSERT OR REPLACE INTO reports VALUES(?, ?)");
  s.bind(1, case_id).bind(2, report.dump());
  s.step();
}

std::optional<Json> Store::report(const std::string& case_id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT document FROM reports WHERE case_id = ?");
  s.bind(1, case_id);
  if (!s.step()) return std::nullopt;
  return Json::parse(s.text(0));
}

std::int64_t Store::add_feedback(const FeedbackRecord& record) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "INSERT INTO feedback(case_id, received_at, document) VALUES(?, ?, ?)");
  s.bind(1, record.case_id).bind(2, now_ms()).bind(3, to_json(record).dump());
  s.step();
  return sqlite3_last_insert_rowid(db_);
}

std::vector<FeedbackRecord> Store::feedback(const std::string& case_id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, case_id.empty() ? "SELECT document FROM feedback ORDER BY id"
                                   : "SELECT document FROM feedback WHERE case_id = ? ORDER BY id");
  if (!case_id.empty()) s.bind(1, case_id);
  std::vector<FeedbackRecord> out;
  while (s.step()) {
    auto v = validate_feedback(Json::parse(s.text(0)));
    if (v.record) out.push_back(std::move(*v.record));
  }
  return out;
}

}  // namespace ocuflow::gateway
