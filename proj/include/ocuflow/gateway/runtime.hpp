#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ocuflow/adapters/fixture_store.hpp"
#include "ocuflow/kb/index.hpp"
#include "ocuflow/orchestrator/orchestrator.hpp"

namespace ocuflow::gateway {

// Raised for invalid configuration; `flag` names the offending option.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string flag, const std::string& message)
      : std::runtime_error("--" + flag + ": " + message), flag_(std::move(flag)) {}
  const std::string& flag() const noexcept { return flag_; }

 private:
  std::string flag_;
};

struct RunConfig {
  std::filesystem::path catalog_path;
  std::filesystem::path fixture_root;
  std::filesystem::path kb_dir;               // optional; enables the knowledge backend
  std::filesystem::path recommendations_path;  // optional
  std::filesystem::path planner_recording;    // required for the llm-stub planner
  int tier = 5;
  std::string planner = "rules";  // rules | llm-stub
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;
  std::optional<double> conflict_margin;
  std::optional<int> revision_rounds;
  std::optional<double> classification_threshold;

  // Paths under a reference data directory laid out like data/.
  static RunConfig defaults_for(const std::filesystem::path& data_dir);

  // Throws ConfigError naming the flag.
  void validate() const;
  OrchestratorConfig orchestrator_config() const;
};

// Fully wired orchestration stack for one configuration.
struct Runtime {
  RunConfig config;
  std::shared_ptr<const Registry> registry;
  std::shared_ptr<const FixtureStore> fixtures;
  std::shared_ptr<const kb::Index> index;  // null without kb_dir
  std::shared_ptr<const ToolInvoker> invoker;
  std::shared_ptr<const Orchestrator> orchestrator;

  // Validates the config first (ConfigError); load failures propagate as Error.
  static Runtime build(const RunConfig& config);
};

// Line-delimited case documents; blank lines are skipped. Throws
// SchemaViolation with the 1-based line number on malformed lines.
std::vector<ClinicalCase> load_corpus(const std::filesystem::path& path, const ModalityCatalog& catalog);
ClinicalCase load_case_file(const std::filesystem::path& path, const ModalityCatalog& catalog);

}  // namespace ocuflow::gateway
