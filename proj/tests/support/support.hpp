#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ocuflow/core/error.hpp"
#include "ocuflow/gateway/runtime.hpp"

namespace ocuflow::test {

inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("OCUFLOW_DATA_DIR"); env && *env) return env;
  return OCUFLOW_TEST_DATA_DIR;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline Json read_json(const std::filesystem::path& path) { return Json::parse(read_text(path)); }

inline gateway::RunConfig reference_config(std::uint64_t seed = 0) {
  auto c = gateway::RunConfig::defaults_for(data_dir());
  c.seed = seed;
  c.parallelism = 2;
  return c;
}

// Shared across test cases; building it parses the catalog, fixtures, and kb.
inline const gateway::Runtime& reference_runtime() {
  static const gateway::Runtime rt = gateway::Runtime::build(reference_config(7));
  return rt;
}

inline ClinicalCase reference_case(const std::string& name) {
  return gateway::load_case_file(data_dir() / "cases" / (name + ".json"), reference_runtime().registry->modalities());
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("ocuflow-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected an ocuflow::Error");
}

}  // namespace ocuflow::test
