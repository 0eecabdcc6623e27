#include "ocuflow/eval/ablation.hpp"

#include <atomic>
#include <cstdio>
#include <thread>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow::eval {

const TierResult* AblationResult::tier(int t) const {
  for (const auto& r : tiers) {
    if (r.tier == t) return &r;
  }
  return nullptr;
}

namespace {

AblationCase run_one(const ClinicalCase& c, const Toolset& toolset, const Orchestrator& orchestrator,
                     const DiagnosisMatcher& matcher) {
  AblationCase out;
  out.case_id = c.case_id;
  out.tier = toolset.tier();
  out.modality = c.ground_truth->modality.value_or("unknown");
  out.truth = c.ground_truth->diagnosis;
  try {
    auto run = orchestrator.run(c, toolset);
    out.error = run.error;
    if (!run.findings.diagnosis.empty()) out.predicted = run.findings.diagnosis.front().label;
    out.invoked_tools = run.invoked_tools();
    for (const auto& e : run.trace->events()) {
      if (e.kind != EventKind::Invocation) continue;
      auto id = e.payload.at("tool_id").get<std::string>();
      if (!toolset.contains(id)) out.out_of_tier_tools.push_back(id);
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.correct = out.error.empty() && matcher.matches(out.predicted, out.truth);
  return out;
}

}  // namespace

AblationResult run_ablation(std::span<const ClinicalCase> corpus, std::span<const int> tiers,
                            const Orchestrator& orchestrator, const AblationOptions& options) {
  for (const auto& c : corpus) {
    if (!c.ground_truth) throw Error(ErrorCode::MissingGroundTruth, c.case_id);
  }
  std::vector<Toolset> toolsets;
  for (int t : tiers) toolsets.push_back(orchestrator.registry().tier_subset(t));

  const std::size_t per_tier = corpus.size();
  std::vector<AblationCase> cases(per_tier * toolsets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      cases[i] = run_one(corpus[i % per_tier], toolsets[i / per_tier], orchestrator, options.matcher);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(options.parallelism, cases.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  AblationResult result;
  for (std::size_t ti = 0; ti < toolsets.size(); ++ti) {
    TierResult row;
    row.tier = toolsets[ti].tier();
    row.tool_count = toolsets[ti].size();
    for (std::size_t ci = 0; ci < per_tier; ++ci) {
      const auto& c = cases[ti * per_tier + ci];
      ++row.n_cases;
      auto& m = row.per_modality[c.modality];
      ++m.n_cases;
      if (c.correct) {
        ++row.n_correct;
        ++m.n_correct;
      }
      if (!c.error.empty()) result.errors.push_back({c.case_id, c.tier, c.error});
      for (const auto& t : c.out_of_tier_tools) {
        result.containment_violations.push_back(c.case_id + "@tier" + std::to_string(c.tier) + ": " + t);
      }
    }
    row.accuracy = row.n_cases ? static_cast<double>(row.n_correct) / static_cast<double>(row.n_cases) : 0.0;
    for (auto& [_, m] : row.per_modality) {
      m.accuracy = static_cast<double>(m.n_correct) / static_cast<double>(m.n_cases);
    }
    result.tiers.push_back(std::move(row));
  }
  result.cases = std::move(cases);
  return result;
}

Json to_json(const AblationResult& r) {
  Json tiers = Json::array();
  for (const auto& t : r.tiers) {
    Json mods = Json::object();
    for (const auto& [m, b] : t.per_modality) {
      mods[m] = Json{{"n_cases", b.n_cases}, {"n_correct", b.n_correct}, {"accuracy", b.accuracy}};
    }
    tiers.push_back(Json{{"tier", t.tier},
                         {"tool_count", t.tool_count},
                         {"n_cases", t.n_cases},
                         {"n_correct", t.n_correct},
                         {"accuracy", t.accuracy},
                         {"per_modality", std::move(mods)}});
  }
  Json cases = Json::array();
  for (const auto& c : r.cases) {
    cases.push_back(Json{{"case_id", c.case_id},
                         {"tier", c.tier},
                         {"modality", c.modality},
                         {"predicted", c.predicted},
                         {"truth", c.truth},
                         {"correct", c.correct},
                         {"invoked_tools", c.invoked_tools},
                         {"error", c.error}});
  }
  Json errors = Json::array();
  for (const auto& e : r.errors) errors.push_back(Json{{"case_id", e.case_id}, {"tier", e.tier}, {"error", e.error}});
  return Json{{"tiers", std::move(tiers)},
              {"cases", std::move(cases)},
              {"errors", std::move(errors)},
              {"containment_violations", r.containment_violations}};
}

std::string format_table(const AblationResult& r) {
  std::set<std::string> modalities;
  for (const auto& t : r.tiers) {
    for (const auto& [m, _] : t.per_modality) modalities.insert(m);
  }
  std::string out = "tier  tools  cases  correct  accuracy";
  for (const auto& m : modalities) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "  %9s", m.c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& t : r.tiers) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%4d  %5zu  %5zu  %7zu  %7.2f%%", t.tier, t.tool_count, t.n_cases, t.n_correct,
                  100.0 * t.accuracy);
    out += buf;
    for (const auto& m : modalities) {
      auto it = t.per_modality.find(m);
      if (it == t.per_modality.end()) {
        std::snprintf(buf, sizeof buf, "  %9s", "-");
      } else {
        std::snprintf(buf, sizeof buf, "  %8.2f%%", 100.0 * it->second.accuracy);
      }
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace ocuflow::eval
