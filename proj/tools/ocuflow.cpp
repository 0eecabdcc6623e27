// ocuflow command-line front end.
#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ocuflow/core/error.hpp"
#include "ocuflow/eval/ablation.hpp"
#include "ocuflow/gateway/runtime.hpp"
#include "ocuflow/gateway/service.hpp"

namespace fs = std::filesystem;
using namespace ocuflow;
using gateway::ConfigError;
using gateway::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCase = 3;

#ifndef OCUFLOW_DEFAULT_DATA_DIR
#define OCUFLOW_DEFAULT_DATA_DIR "data"
#endif

struct CommonFlags {
  std::string data_dir = OCUFLOW_DEFAULT_DATA_DIR;
  std::string catalog, fixtures, kb, recommendations, planner_recording;
  std::string planner = "rules";
  int tier = 5;
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;
  std::optional<double> conflict_margin;
  std::optional<int> revision_rounds;
  std::optional<double> classification_threshold;
  bool no_kb = false;

  RunConfig config() const {
    auto c = RunConfig::defaults_for(data_dir);
    if (!catalog.empty()) c.catalog_path = catalog;
    if (!fixtures.empty()) c.fixture_root = fixtures;
    if (!kb.empty()) c.kb_dir = kb;
    if (no_kb) c.kb_dir.clear();
    if (!recommendations.empty()) c.recommendations_path = recommendations;
    if (!fs::exists(c.recommendations_path) && recommendations.empty()) c.recommendations_path.clear();
    c.planner_recording = planner_recording;
    c.planner = planner;
    c.tier = tier;
    c.seed = seed;
    c.parallelism = parallelism;
    c.conflict_margin = conflict_margin;
    c.revision_rounds = revision_rounds;
    c.classification_threshold = classification_threshold;
    return c;
  }
};

void add_common(CLI::App* app, CommonFlags& f, bool with_tier = true) {
  app->add_option("--data-dir", f.data_dir, "reference data directory")->envname("AGENT_DATA_DIR");
  app->add_option("--catalog", f.catalog, "tool catalog (default <data-dir>/catalog.json)")
      ->envname("AGENT_CATALOG");
  app->add_option("--fixtures", f.fixtures, "fixture directory (default <data-dir>/fixtures)")
      ->envname("AGENT_FIXTURES");
  app->add_option("--kb", f.kb, "knowledge directory (default <data-dir>/kb)")->envname("AGENT_KB");
  app->add_flag("--no-kb", f.no_kb, "run without the knowledge backend");
  app->add_option("--recommendations", f.recommendations, "recommendation table")
      ->envname("AGENT_RECOMMENDATIONS");
  app->add_option("--planner", f.planner, "rules | llm-stub")->envname("AGENT_PLANNER");
  app->add_option("--planner-recording", f.planner_recording, "recorded planner responses for llm-stub")
      ->envname("AGENT_PLANNER_RECORDING");
  if (with_tier) app->add_option("--tier", f.tier, "active tool tier 1..5")->envname("AGENT_TIER");
  app->add_option("--seed", f.seed, "run seed")->envname("AGENT_SEED");
  app->add_option("--parallelism", f.parallelism, "worker threads")->envname("AGENT_PARALLELISM");
  app->add_option("--conflict-margin", f.conflict_margin)->envname("AGENT_CONFLICT_MARGIN");
  app->add_option("--revision-rounds", f.revision_rounds)->envname("AGENT_REVISION_ROUNDS");
  app->add_option("--classification-threshold", f.classification_threshold)
      ->envname("AGENT_CLASSIFICATION_THRESHOLD");
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << content;
}

std::vector<int> parse_tiers(const std::string& list) {
  std::vector<int> tiers;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int t = 0;
    try {
      t = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("tiers", "not an integer: '" + item + "'");
    }
    if (used != item.size()) throw ConfigError("tiers", "not an integer: '" + item + "'");
    if (t < kMinTier || t > kMaxTier) throw ConfigError("tiers", "tier out of range 1..5: " + item);
    tiers.push_back(t);
  }
  if (tiers.empty()) throw ConfigError("tiers", "empty tier list");
  return tiers;
}

// ---------------------------------------------------------------- run

struct RunFlags {
  std::string case_path;
  std::string trace_out;
  std::string report_out;
};

int cmd_run(const CommonFlags& common, const RunFlags& flags) {
  auto config = common.config();
  auto rt = gateway::Runtime::build(config);
  ClinicalCase c;
  try {
    c = gateway::load_case_file(flags.case_path, rt.registry->modalities());
  } catch (const Error& e) {
    std::cerr << "case error: " << e.what() << "\n";
    return kExitCase;
  }
  auto outcome = rt.orchestrator->run(c, config.tier);
  const auto stem = fs::path(flags.case_path).stem().string();
  fs::path trace_path = flags.trace_out.empty() ? fs::path(stem + ".trace.jsonl") : fs::path(flags.trace_out);
  write_file(trace_path, outcome.trace->serialize());
  if (!outcome.report) {
    std::cerr << "orchestration failed: " << outcome.error << "\n";
    return kExitFailure;
  }
  fs::path report_path = flags.report_out.empty() ? fs::path(stem + ".report.json") : fs::path(flags.report_out);
  write_file(report_path, to_json(*outcome.report).dump(2) + "\n");
  std::cout << "diagnosis: " << outcome.report->diagnosis << "\n"
            << "trace: " << trace_path.string() << " (" << outcome.trace->size() << " events)\n"
            << "report: " << report_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateFlags {
  std::string corpus;
  std::string tiers = "1,2,3,4,5";
  std::string out = "ablation";
};

int cmd_ablate(const CommonFlags& common, const AblateFlags& flags) {
  auto tiers = parse_tiers(flags.tiers);
  auto config = common.config();
  auto rt = gateway::Runtime::build(config);
  fs::path corpus_path = flags.corpus.empty() ? fs::path(common.data_dir) / "corpus.jsonl" : fs::path(flags.corpus);
  std::vector<ClinicalCase> corpus;
  try {
    corpus = gateway::load_corpus(corpus_path, rt.registry->modalities());
  } catch (const Error& e) {
    std::cerr << "corpus error: " << e.what() << "\n";
    return kExitCase;
  }
  if (corpus.empty()) {
    std::cerr << "corpus error: no cases in " << corpus_path.string() << "\n";
    return kExitCase;
  }
  for (const auto& c : corpus) {
    if (!c.ground_truth) {
      std::cerr << "corpus error: case " << c.case_id << " has no ground truth\n";
      return kExitCase;
    }
  }
  eval::AblationOptions options;
  options.parallelism = config.parallelism;
  auto result = eval::run_ablation(corpus, tiers, *rt.orchestrator, options);
  fs::path out(flags.out);
  write_file(out / "ablation.json", to_json(result).dump(2) + "\n");
  auto table = eval::format_table(result);
  write_file(out / "ablation.txt", table);
  std::cout << table;
  for (const auto& e : result.errors) std::cerr << "error: " << e.case_id << " tier " << e.tier << ": " << e.error << "\n";
  for (const auto& v : result.containment_violations) std::cerr << "out-of-tier tool: " << v << "\n";
  return result.errors.empty() && result.containment_violations.empty() ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- eval-tools

struct EvalToolsFlags {
  std::string corpus;
  std::string traces;
  std::string out;
};

int cmd_eval_tools(const CommonFlags& common, const EvalToolsFlags& flags) {
  auto config = common.config();
  auto rt = gateway::Runtime::build(config);
  fs::path corpus_path = flags.corpus.empty() ? fs::path(common.data_dir) / "corpus.jsonl" : fs::path(flags.corpus);
  std::vector<ClinicalCase> corpus;
  try {
    corpus = gateway::load_corpus(corpus_path, rt.registry->modalities());
  } catch (const Error& e) {
    std::cerr << "corpus error: " << e.what() << "\n";
    return kExitCase;
  }
  std::vector<eval::ToolGroundTruth> gts;
  for (const auto& c : corpus) {
    if (!c.ground_truth || c.ground_truth->expected_tools.empty()) continue;
    gts.push_back({c.case_id, {c.ground_truth->expected_tools.begin(), c.ground_truth->expected_tools.end()}});
  }
  std::vector<eval::CaseToolUsage> usage;
  if (!flags.traces.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(flags.traces)) {
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f);
      std::string line;
      if (!std::getline(in, line)) continue;
      auto header = parse_header(line);
      std::vector<TraceEvent> events;
      while (std::getline(in, line)) {
        if (!line.empty()) events.push_back(parse_event(line));
      }
      usage.push_back(eval::usage_from_trace(header, events));
    }
  } else {
    for (const auto& c : corpus) {
      auto run = rt.orchestrator->run(c, config.tier);
      auto events = run.trace->events();
      usage.push_back(eval::usage_from_trace(run.trace->header(), events));
    }
  }
  auto score = eval::tool_usage_accuracy(usage, gts);
  auto iv = eval::wilson_interval(static_cast<long long>(score.correct),
                                  static_cast<long long>(std::max<std::size_t>(1, score.correct + score.incorrect)));
  auto doc = to_json(score);
  doc["wilson_95"] = {iv.lo, iv.hi};
  if (!flags.out.empty()) write_file(flags.out, doc.dump(2) + "\n");
  std::printf("tool usage: %zu correct, %zu missed, %zu extra; accuracy %.2f%% (95%% CI %.2f-%.2f%%)\n",
              score.correct, score.incorrect, score.extra, 100.0 * score.accuracy, 100.0 * iv.lo, 100.0 * iv.hi);
  for (const auto& c : score.cases) {
    for (const auto& m : c.missed) std::printf("  missed %s in %s\n", m.c_str(), c.case_id.c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval-report

struct EvalReportFlags {
  std::string ratings;
  std::string checklist;
  std::string rubric;
  std::string data_dir = OCUFLOW_DEFAULT_DATA_DIR;
  std::string out;
};

std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<Json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, path.filename().string() + " line " + std::to_string(n));
    }
  }
  return out;
}

int cmd_eval_report(const EvalReportFlags& flags) {
  if (flags.ratings.empty() && flags.checklist.empty()) throw ConfigError("ratings", "give --ratings and/or --checklist");
  Json doc = Json::object();
  if (!flags.ratings.empty()) {
    std::vector<eval::RatingRecord> records;
    try {
      for (const auto& j : read_jsonl(flags.ratings)) records.push_back(eval::rating_from_json(j));
    } catch (const Error& e) {
      std::cerr << "ratings error: " << e.what() << "\n";
      return kExitCase;
    }
    auto summary = eval::aggregate_ratings(records);
    doc["ratings"] = to_json(summary);
    std::printf("%-18s %8s %8s %6s\n", "dimension", ">=2 (%)", ">=3 (%)", "mean");
    for (const auto& [d, s] : summary.dimensions) {
      std::printf("%-18s %8.1f %8.1f %6.2f\n", std::string(eval::to_string(d)).c_str(), s.pct_at_least_2,
                  s.pct_at_least_3, s.mean);
    }
    std::printf("mean total %.2f / %d\n", summary.mean_total, eval::kMaxTotalScore);
  }
  if (!flags.checklist.empty()) {
    auto rubric = eval::ChecklistRubric::load(flags.rubric.empty() ? fs::path(flags.data_dir) / "rubric.json"
                                                                    : fs::path(flags.rubric));
    Json scores = Json::array();
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& j : read_jsonl(flags.checklist)) {
      // {case_id, condition?, applicable?: [ids], hits: [ids]}
      std::set<std::string> hits = j.value("hits", std::set<std::string>{});
      std::set<std::string> applicable;
      if (j.contains("applicable")) {
        applicable = j["applicable"].get<std::set<std::string>>();
      } else if (j.contains("condition")) {
        applicable = rubric.applicable_for(j["condition"].get<std::string>());
      } else {
        applicable = rubric.all_ids();
      }
      double s = eval::score_checklist(hits, rubric, applicable);
      sum += s;
      ++n;
      scores.push_back(Json{{"case_id", j.value("case_id", std::string())},
                            {"hits", hits.size()},
                            {"applicable", applicable.size()},
                            {"score", s}});
    }
    doc["checklist"] = Json{{"scores", scores}, {"mean", n ? sum / static_cast<double>(n) : 0.0}};
    std::printf("checklist: %zu reports, mean completeness %.4f\n", n, n ? sum / static_cast<double>(n) : 0.0);
  }
  if (!flags.out.empty()) write_file(flags.out, doc.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- serve

struct ServeFlags {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store = "ocuflow.db";
  bool enable_upload = false;
};

gateway::Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) std::thread([] { g_service->stop(); }).detach();
}

int cmd_serve(const CommonFlags& common, const ServeFlags& flags) {
  auto rt = gateway::Runtime::build(common.config());
  gateway::Store store(flags.store);
  gateway::Service service(rt, store, {flags.enable_upload});
  int port = service.start(flags.host, flags.port);
  std::cout << "listening on http://" << flags.host << ":" << port << std::endl;
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.wait();
  service.stop();
  g_service = nullptr;
  return kExitOk;
}

// ---------------------------------------------------------------- catalog-lint

int cmd_catalog_lint(const CommonFlags& common) {
  auto config = common.config();
  if (!fs::is_regular_file(config.catalog_path)) throw ConfigError("catalog", "not found: " + config.catalog_path.string());
  Registry registry;
  try {
    registry = Registry::load_file(config.catalog_path);
  } catch (const Error& e) {
    std::cerr << "catalog invalid: " << e.what() << "\n";
    return kExitConfig;
  }
  std::size_t problems = 0;
  auto sizes = registry.tier_sizes();
  std::cout << "schema " << registry.schema_version() << ", " << registry.size() << " tools, hash "
            << registry.catalog_hash() << "\ncumulative tier sizes:";
  for (auto s : sizes) std::cout << " " << s;
  std::cout << "\n";
  if (fs::is_directory(config.fixture_root)) {
    for (const auto& t : registry.tools()) {
      if (t->backend.kind != "fixture") continue;
      fs::path file = config.fixture_root / (t->tool_id + ".json");
      if (!fs::exists(file)) {
        std::cout << "missing fixture file for " << t->tool_id << "\n";
        ++problems;
        continue;
      }
      std::ifstream in(file);
      auto doc = Json::parse(in);
      std::vector<Json> outputs;
      if (doc.contains("default_output")) outputs.push_back(doc["default_output"]);
      for (const auto& e : doc.value("entries", Json::array())) {
        if (e.contains("output")) outputs.push_back(e["output"]);
      }
      for (const auto& o : outputs) {
        auto v = validate_io(*t, o, Direction::Output);
        if (!v.ok) {
          ++problems;
          std::cout << t->tool_id << ": fixture output fails validation";
          if (!v.violations.empty()) std::cout << " at " << v.violations.front().path << ": " << v.violations.front().message;
          std::cout << "\n";
        }
      }
    }
  }
  std::cout << (problems ? std::to_string(problems) + " problem(s)" : std::string("ok")) << "\n";
  return problems ? kExitConfig : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ocuflow: tool-orchestrating ophthalmic assistant"};
  app.require_subcommand(1);

  CommonFlags run_common;
  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "orchestrate one case and write its trace and report");
  add_common(run, run_common);
  run->add_option("--case", run_flags.case_path, "case document (JSON)")->required()->envname("AGENT_CASE");
  run->add_option("--trace-out", run_flags.trace_out, "trace file (default <case>.trace.jsonl)");
  run->add_option("--report-out", run_flags.report_out, "report file (default <case>.report.json)");

  CommonFlags ablate_common;
  AblateFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "run the corpus at several tiers and score diagnoses");
  add_common(ablate, ablate_common, false);
  ablate->add_option("--corpus", ablate_flags.corpus, "corpus file (JSONL)")->envname("AGENT_CORPUS");
  ablate->add_option("--tiers", ablate_flags.tiers, "comma-separated tiers")->envname("AGENT_TIERS");
  ablate->add_option("--out", ablate_flags.out, "output directory")->envname("AGENT_OUT");

  CommonFlags tools_common;
  EvalToolsFlags tools_flags;
  auto* eval_tools = app.add_subcommand("eval-tools", "score tool usage against expected tools");
  add_common(eval_tools, tools_common);
  eval_tools->add_option("--corpus", tools_flags.corpus, "corpus with ground truth")->envname("AGENT_CORPUS");
  eval_tools->add_option("--traces", tools_flags.traces, "directory of trace files; runs the corpus when omitted");
  eval_tools->add_option("--out", tools_flags.out, "results document");

  EvalReportFlags report_flags;
  auto* eval_report = app.add_subcommand("eval-report", "aggregate expert ratings and checklist scores");
  eval_report->add_option("--ratings", report_flags.ratings, "rating records (JSONL)");
  eval_report->add_option("--checklist", report_flags.checklist, "checklist hits (JSONL)");
  eval_report->add_option("--rubric", report_flags.rubric, "rubric (default <data-dir>/rubric.json)");
  eval_report->add_option("--data-dir", report_flags.data_dir)->envname("AGENT_DATA_DIR");
  eval_report->add_option("--out", report_flags.out, "results document");

  CommonFlags serve_common;
  ServeFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  add_common(serve, serve_common);
  serve->add_option("--host", serve_flags.host)->envname("AGENT_HOST");
  serve->add_option("--port", serve_flags.port)->envname("AGENT_PORT");
  serve->add_option("--store", serve_flags.store, "SQLite store file")->envname("AGENT_STORE");
  serve->add_flag("--enable-upload", serve_flags.enable_upload, "expose the (stub) upload endpoint");

  CommonFlags lint_common;
  auto* lint = app.add_subcommand("catalog-lint", "validate the catalog and its fixtures");
  add_common(lint, lint_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(run_common, run_flags);
    if (ablate->parsed()) return cmd_ablate(ablate_common, ablate_flags);
    if (eval_tools->parsed()) return cmd_eval_tools(tools_common, tools_flags);
    if (eval_report->parsed()) return cmd_eval_report(report_flags);
    if (serve->parsed()) return cmd_serve(serve_common, serve_flags);
    if (lint->parsed()) return cmd_catalog_lint(lint_common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::Io || e.code() == ErrorCode::MalformedDescriptor ||
                   e.code() == ErrorCode::DuplicateToolId || e.code() == ErrorCode::TierGap ||
                   e.code() == ErrorCode::UnsupportedSchemaVersion
               ? kExitConfig
               : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
