#include "ocuflow/gateway/runtime.hpp"

#include <fstream>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow::gateway {

namespace fs = std::filesystem;

RunConfig RunConfig::defaults_for(const fs::path& data_dir) {
  RunConfig c;
  c.catalog_path = data_dir / "catalog.json";
  c.fixture_root = data_dir / "fixtures";
  c.kb_dir = data_dir / "kb";
  c.recommendations_path = data_dir / "recommendations.json";
  return c;
}

void RunConfig::validate() const {
  if (catalog_path.empty() || !fs::is_regular_file(catalog_path)) {
    throw ConfigError("catalog", "catalog file not found: " + catalog_path.string());
  }
  if (fixture_root.empty() || !fs::is_directory(fixture_root)) {
    throw ConfigError("fixtures", "fixture directory not found: " + fixture_root.string());
  }
  if (!kb_dir.empty() && !fs::is_directory(kb_dir)) {
    throw ConfigError("kb", "knowledge directory not found: " + kb_dir.string());
  }
  if (!recommendations_path.empty() && !fs::is_regular_file(recommendations_path)) {
    throw ConfigError("recommendations", "file not found: " + recommendations_path.string());
  }
  if (tier < kMinTier || tier > kMaxTier) {
    throw ConfigError("tier", "must be between 1 and 5, got " + std::to_string(tier));
  }
  if (planner != "rules" && planner != "llm-stub") {
    throw ConfigError("planner", "must be 'rules' or 'llm-stub', got '" + planner + "'");
  }
  if (planner == "llm-stub" && !fs::is_regular_file(planner_recording)) {
    throw ConfigError("planner-recording", "the llm-stub planner needs a recording file");
  }
  if (parallelism < 1) throw ConfigError("parallelism", "must be at least 1");
  if (conflict_margin && !(*conflict_margin >= 0.0 && *conflict_margin <= 1.0)) {
    throw ConfigError("conflict-margin", "must be within [0, 1]");
  }
  if (revision_rounds && *revision_rounds < 0) throw ConfigError("revision-rounds", "must be non-negative");
  if (classification_threshold && !(*classification_threshold >= 0.0 && *classification_threshold <= 1.0)) {
    throw ConfigError("classification-threshold", "must be within [0, 1]");
  }
}

OrchestratorConfig RunConfig::orchestrator_config() const {
  OrchestratorConfig c;
  c.seed = seed;
  c.parallelism = parallelism;
  if (conflict_margin) c.conflict_margin = *conflict_margin;
  if (revision_rounds) c.revision_rounds = *revision_rounds;
  if (classification_threshold) c.classification_threshold = *classification_threshold;
  if (!recommendations_path.empty()) c.recommendations = RecommendationTable::load(recommendations_path);
  return c;
}

Runtime Runtime::build(const RunConfig& config) {
  config.validate();
  Runtime rt;
  rt.config = config;
  rt.registry = std::make_shared<const Registry>(Registry::load_file(config.catalog_path));
  rt.fixtures = std::make_shared<const FixtureStore>(FixtureStore::load_dir(config.fixture_root));
  auto backends = make_standard_backends(rt.fixtures);
  if (!config.kb_dir.empty()) {
    rt.index = std::make_shared<const kb::Index>(kb::Index::ingest_directory(config.kb_dir));
    kb::register_knowledge_backend(*backends, rt.index);
  }
  rt.invoker = std::make_shared<const ToolInvoker>(backends);
  std::shared_ptr<PlannerProvider> planner;
  if (config.planner == "llm-stub") {
    planner = std::make_shared<RecordedPlanner>(RecordedPlanner::load(config.planner_recording));
  }
  rt.orchestrator =
      std::make_shared<const Orchestrator>(rt.registry, rt.invoker, config.orchestrator_config(), planner);
  return rt;
}

std::vector<ClinicalCase> load_corpus(const fs::path& path, const ModalityCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open corpus " + path.string());
  std::vector<ClinicalCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Json doc;
    try {
      doc = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      cases.push_back(parse_case(doc, catalog));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return cases;
}

ClinicalCase load_case_file(const fs::path& path, const ModalityCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open case " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, path.filename().string() + ": " + e.what());
  }
  return parse_case(doc, catalog);
}

}  // namespace ocuflow::gateway
