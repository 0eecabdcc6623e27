#include "ocuflow/orchestrator/intent.hpp"

#include <array>
#include <regex>
#include <utility>

#include "ocuflow/core/text.hpp"

namespace ocuflow {

namespace {

bool any_of(const std::string& q, std::initializer_list<std::string_view> words) {
  for (auto w : words) {
    if (q.find(w) != std::string::npos) return true;
  }
  return false;
}

// Query phrase -> lesion type as declared by segmentation tools.
constexpr std::array<std::pair<std::string_view, std::string_view>, 17> kLesionLexicon{{
    {"drusen", "drusen"},
    {"microaneurysm", "microaneurysm"},
    {"hemorrhage", "hemorrhage"},
    {"haemorrhage", "hemorrhage"},
    {"exudate", "hard exudate"},
    {"cotton wool", "cotton wool spot"},
    {"cotton-wool", "cotton wool spot"},
    {"fluid", "retinal fluid"},
    {"macular hole", "macular hole"},
    {"laser", "laser spot"},
    {"neovasc", "neovascularization"},
    {"artifact", "artifact"},
    {"atrophy", "atrophy"},
    {"leakage", "leakage"},
    {"non-perfusion", "non-perfusion"},
    {"polyp", "polyp"},
    {"vessel", "vessel"},
}};

std::optional<std::string> find_lesion(const std::string& q) {
  for (const auto& [phrase, lesion] : kLesionLexicon) {
    if (q.find(phrase) != std::string::npos) return std::string(lesion);
  }
  return std::nullopt;
}

std::optional<std::string> generation_target(const std::string& q) {
  if (any_of(q, {"3d", "eye shape", "globe", "eyeball"})) return "3d";
  if (any_of(q, {"video"})) return "video";
  if (any_of(q, {"ffa", "fluorescein", "angiogra"})) return "FFA";
  if (any_of(q, {"icga", "indocyanine"})) return "ICGA";
  if (any_of(q, {" oct", "oct "})) return "OCT";
  if (any_of(q, {"report"})) return "report";
  return "image";
}

}  // namespace

std::string_view to_string(Workflow w) noexcept {
  switch (w) {
    case Workflow::HierarchicalDecision: return "hierarchical_decision";
    case Workflow::QuantitativeAnalysis: return "quantitative_analysis";
    case Workflow::MedicalEducation: return "medical_education";
    case Workflow::ConflictResolution: return "conflict_resolution";
    case Workflow::CrossSpecialtyLongitudinal: return "cross_specialty_longitudinal";
  }
  return "hierarchical_decision";
}

std::optional<std::string> Intent::param(std::string_view key) const {
  auto it = task_params.find(std::string(key));
  if (it == task_params.end()) return std::nullopt;
  return it->second;
}

Intent interpret_query(const ClinicalCase& c) {
  Intent intent;
  intent.raw_query = c.query;
  const std::string q = " " + text::normalize(c.query) + " ";
  auto& params = intent.task_params;

  if (q.find("label") != std::string::npos && any_of(q, {"lesion", "label the"})) {
    params["label_lesions"] = "true";
  }
  static const std::regex claim(R"(\bi (?:have|got|suffer from|was diagnosed with) ([a-z' -]+?)(?:[.,;!?]| and | but |$))");
  std::smatch m;
  if (std::regex_search(q, m, claim)) params["claimed_condition"] = text::trim(m[1].str());

  const bool systemic = any_of(q, {"cardiovascular", " cvd", "systemic", "stroke", "hypertension",
                                   "retinal age", "biological age", "risk of developing"});
  if (systemic) {
    intent.workflow = Workflow::CrossSpecialtyLongitudinal;
    static const std::regex horizon(R"((\d+)\s*-?\s*(year|yr|month))");
    if (std::regex_search(q, m, horizon)) {
      params["horizon"] = m[1].str() + (m[2].str() == "month" ? "m" : "y");
    }
    if (any_of(q, {"retinal age", "biological age"})) {
      params["systemic_target"] = "age";
    } else if (any_of(q, {" sex ", "gender"})) {
      params["systemic_target"] = "sex";
    } else {
      params["systemic_target"] = "cardiovascular";
    }
    if (any_of(q, {"vessel", "vascular", "caliber", "avr"})) params["vessels"] = "true";
    return intent;
  }
  if (any_of(q, {"conflict", "disagree", "discordant", "contradict", "second opinion", " verify"})) {
    intent.workflow = Workflow::ConflictResolution;
    return intent;
  }
  if (any_of(q, {"generate", "3d", "explain", "teach", "synthesi", "synthesiz", "visualiz",
                 "visualis", "illustrate", "report"})) {
    intent.workflow = Workflow::MedicalEducation;
    if (any_of(q, {"generate", "3d", "synthesi", "visualiz", "visualis", "report", "video"})) {
      params["generate"] = *generation_target(q);
    }
    return intent;
  }
  if (any_of(q, {"count", "measure", "quantif", "how many", "diameter", " area", "size of"})) {
    intent.workflow = Workflow::QuantitativeAnalysis;
    if (auto lesion = find_lesion(q)) params["lesion"] = *lesion;
    return intent;
  }
  return intent;
}

Json to_json(const Intent& intent) {
  Json params = Json::object();
  for (const auto& [k, v] : intent.task_params) params[k] = v;
  return Json{{"workflow", to_string(intent.workflow)},
              {"task_params", std::move(params)},
              {"raw_query", intent.raw_query}};
}

}  // namespace ocuflow
