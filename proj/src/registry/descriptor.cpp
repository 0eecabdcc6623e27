#include "ocuflow/registry/descriptor.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "ocuflow/core/error.hpp"
#include "ocuflow/core/text.hpp"

namespace ocuflow {

namespace {

constexpr std::array<std::pair<ToolRole, std::string_view>, 4> kRoles{{
    {ToolRole::GeneralPractitioner, "general_practitioner"},
    {ToolRole::RetinaSpecialist, "retina_specialist"},
    {ToolRole::MedicalEducator, "medical_educator"},
    {ToolRole::CrossSpecialtyAnalyzer, "cross_specialty_analyzer"},
}};

constexpr std::array<std::pair<TaskType, std::string_view>, 6> kTasks{{
    {TaskType::Classification, "classification"},
    {TaskType::Segmentation, "segmentation"},
    {TaskType::Detection, "detection"},
    {TaskType::Regression, "regression"},
    {TaskType::Generation, "generation"},
    {TaskType::Retrieval, "retrieval"},
}};

constexpr std::array<std::pair<ToolFunction, std::string_view>, 14> kFunctions{{
    {ToolFunction::Modality, "modality"},
    {ToolFunction::Quality, "quality"},
    {ToolFunction::Laterality, "laterality"},
    {ToolFunction::Screening, "screening"},
    {ToolFunction::Triage, "triage"},
    {ToolFunction::Specialist, "specialist"},
    {ToolFunction::Segmentation, "segmentation"},
    {ToolFunction::VesselAnalysis, "vessel_analysis"},
    {ToolFunction::Detection, "detection"},
    {ToolFunction::RiskRegression, "risk_regression"},
    {ToolFunction::Demographic, "demographic"},
    {ToolFunction::Generation, "generation"},
    {ToolFunction::Report, "report"},
    {ToolFunction::Retrieval, "retrieval"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
  for (const auto& [e, name] : table) {
    if (e == value) return name;
  }
  return "unknown";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const std::array<std::pair<E, std::string_view>, N>& table,
                          std::string_view s) {
  for (const auto& [e, name] : table) {
    if (name == s) return e;
  }
  return std::nullopt;
}

std::vector<std::string> string_list(const Json& doc, const char* key, bool lower) {
  std::vector<std::string> out;
  if (!doc.contains(key)) return out;
  if (!doc[key].is_array()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " not an array");
  for (const auto& v : doc[key]) {
    if (!v.is_string()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " entry not a string");
    out.push_back(lower ? text::normalize(v.get<std::string>()) : v.get<std::string>());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string string_field(const Json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_string() || doc[key].get<std::string>().empty()) {
    throw Error(ErrorCode::InvalidArgument, std::string("missing or empty ") + key);
  }
  return doc[key].get<std::string>();
}

UsageCondition parse_condition(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "usage condition not an object");
  UsageCondition c;
  c.fact = string_field(doc, "fact");
  auto op = doc.value("op", std::string("known"));
  if (op == "known") c.op = UsageCondition::Op::Known;
  else if (op == "eq") c.op = UsageCondition::Op::Equals;
  else if (op == "in") c.op = UsageCondition::Op::In;
  else if (op == "not_in") c.op = UsageCondition::Op::NotIn;
  else throw Error(ErrorCode::InvalidArgument, "unknown usage condition op " + op);
  c.values = string_list(doc, "values", false);
  if (c.op != UsageCondition::Op::Known && c.values.empty()) {
    throw Error(ErrorCode::InvalidArgument, "usage condition on " + c.fact + " needs values");
  }
  return c;
}

}  // namespace

std::string_view to_string(ToolRole r) noexcept { return name_of(kRoles, r); }
std::string_view to_string(TaskType t) noexcept { return name_of(kTasks, t); }
std::string_view to_string(ToolFunction f) noexcept { return name_of(kFunctions, f); }
std::optional<ToolRole> parse_role(std::string_view s) noexcept { return value_of(kRoles, s); }
std::optional<TaskType> parse_task(std::string_view s) noexcept { return value_of(kTasks, s); }
std::optional<ToolFunction> parse_function(std::string_view s) noexcept {
  return value_of(kFunctions, s);
}

std::string_view to_string(OutputKind k) noexcept {
  switch (k) {
    case OutputKind::Classification: return "classification";
    case OutputKind::Lesions: return "lesions";
    case OutputKind::Detections: return "detections";
    case OutputKind::Scalar: return "scalar";
    case OutputKind::VesselMetrics: return "vessel_metrics";
    case OutputKind::Artifact: return "artifact";
    case OutputKind::Passages: return "passages";
  }
  return "classification";
}

Truth UsageCondition::evaluate(const FactSet& facts) const {
  auto it = facts.find(fact);
  if (it == facts.end() || it->second.empty()) return Truth::Unknown;
  const auto& actual = it->second;
  auto member = [&] {
    return std::any_of(values.begin(), values.end(),
                       [&](const std::string& v) { return text::iequals(v, actual); });
  };
  switch (op) {
    case Op::Known: return Truth::True;
    case Op::Equals: return text::iequals(values.front(), actual) ? Truth::True : Truth::False;
    case Op::In: return member() ? Truth::True : Truth::False;
    case Op::NotIn: return member() ? Truth::False : Truth::True;
  }
  return Truth::Unknown;
}

Json UsageCondition::to_json() const {
  const char* name = "known";
  switch (op) {
    case Op::Known: name = "known"; break;
    case Op::Equals: name = "eq"; break;
    case Op::In: name = "in"; break;
    case Op::NotIn: name = "not_in"; break;
  }
  Json j{{"fact", fact}, {"op", name}};
  if (!values.empty()) j["values"] = values;
  return j;
}

Truth evaluate_all(const std::vector<UsageCondition>& conditions, const FactSet& facts) {
  Truth result = Truth::True;
  for (const auto& c : conditions) {
    auto t = c.evaluate(facts);
    if (t == Truth::False) return Truth::False;
    if (t == Truth::Unknown) result = Truth::Unknown;
  }
  return result;
}

OutputKind ToolDescriptor::output_kind() const noexcept {
  if (function == ToolFunction::VesselAnalysis) return OutputKind::VesselMetrics;
  switch (task) {
    case TaskType::Classification: return OutputKind::Classification;
    case TaskType::Segmentation: return OutputKind::Lesions;
    case TaskType::Detection: return OutputKind::Detections;
    case TaskType::Regression: return OutputKind::Scalar;
    case TaskType::Generation: return OutputKind::Artifact;
    case TaskType::Retrieval: return OutputKind::Passages;
  }
  return OutputKind::Classification;
}

bool ToolDescriptor::accepts_any_modality() const {
  return std::find(modalities.begin(), modalities.end(), kAnyModality) != modalities.end();
}

bool ToolDescriptor::accepts_modality(const Modality& m) const {
  if (!is_image_tool()) return false;
  if (accepts_any_modality()) return true;
  if (m.is_unknown()) return false;
  return std::any_of(modalities.begin(), modalities.end(),
                     [&](const std::string& code) { return text::iequals(code, m.code()); });
}

bool ToolDescriptor::addresses(std::string_view condition) const {
  auto wanted = text::normalize(condition);
  return std::find(conditions.begin(), conditions.end(), wanted) != conditions.end();
}

bool ToolDescriptor::segments(std::string_view lesion_type) const {
  auto wanted = text::normalize(lesion_type);
  return std::find(lesion_types.begin(), lesion_types.end(), wanted) != lesion_types.end();
}

std::string ToolDescriptor::parent_condition(std::string_view label) const {
  auto key = text::normalize(label);
  for (const auto& [l, parent] : label_parents) {
    if (text::normalize(l) == key) return text::normalize(parent);
  }
  return key;
}

ToolDescriptor parse_descriptor(const Json& doc) {
  std::string id = doc.is_object() && doc.contains("tool_id") && doc["tool_id"].is_string()
                       ? doc["tool_id"].get<std::string>()
                       : std::string("<missing>");
  try {
    if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "descriptor not an object");
    ToolDescriptor d;
    d.tool_id = string_field(doc, "tool_id");
    d.display_name = doc.value("display_name", d.tool_id);
    auto role = parse_role(string_field(doc, "role"));
    if (!role) throw Error(ErrorCode::InvalidArgument, "unknown role");
    d.role = *role;
    auto task = parse_task(string_field(doc, "task"));
    if (!task) throw Error(ErrorCode::InvalidArgument, "unknown task");
    d.task = *task;
    auto function = parse_function(string_field(doc, "function"));
    if (!function) throw Error(ErrorCode::InvalidArgument, "unknown function");
    d.function = *function;
    auto input = doc.value("input", std::string("image"));
    if (input == "image") d.input = InputKind::Image;
    else if (input == "text") d.input = InputKind::Text;
    else throw Error(ErrorCode::InvalidArgument, "input must be image or text");
    d.modalities = string_list(doc, "modalities", false);
    d.conditions = string_list(doc, "conditions", true);
    d.lesion_types = string_list(doc, "lesion_types", true);
    if (d.is_image_tool() && d.modalities.empty()) {
      throw Error(ErrorCode::InvalidArgument, "image tool without modalities");
    }
    if (!doc.contains("input_schema") || !doc.contains("output_schema")) {
      throw Error(ErrorCode::InvalidArgument, "missing input_schema or output_schema");
    }
    d.input_schema = Schema::parse(doc["input_schema"]);
    d.output_schema = Schema::parse(doc["output_schema"]);
    if (doc.contains("usage_conditions")) {
      if (!doc["usage_conditions"].is_array()) {
        throw Error(ErrorCode::InvalidArgument, "usage_conditions not an array");
      }
      for (const auto& c : doc["usage_conditions"]) d.usage_conditions.push_back(parse_condition(c));
    }
    d.usage_note = doc.value("usage_note", std::string());
    if (doc.contains("threshold") && !doc["threshold"].is_null()) {
      if (!doc["threshold"].is_number()) throw Error(ErrorCode::InvalidArgument, "threshold not a number");
      double t = doc["threshold"].get<double>();
      if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold out of [0,1]");
      d.threshold = t;
    }
    if (!doc.contains("tier") || !doc["tier"].is_number_integer()) {
      throw Error(ErrorCode::InvalidArgument, "tier missing or not an integer");
    }
    d.tier = doc["tier"].get<int>();
    if (d.tier < 1 || d.tier > 5) throw Error(ErrorCode::InvalidArgument, "tier out of 1..5");
    if (!doc.contains("backend") || !doc["backend"].is_object()) {
      throw Error(ErrorCode::InvalidArgument, "missing backend");
    }
    const auto& backend = doc["backend"];
    d.backend.kind = string_field(backend, "kind");
    d.backend.locator = string_field(backend, "locator");
    auto timeout_ms = backend.value("timeout_ms", 5000);
    if (timeout_ms <= 0) throw Error(ErrorCode::InvalidArgument, "backend timeout must be positive");
    d.backend.timeout = std::chrono::milliseconds(timeout_ms);
    if (doc.contains("generation_target")) d.generation_target = doc["generation_target"].get<std::string>();
    if (doc.contains("artifact_kind")) {
      d.artifact_kind = parse_artifact_kind(doc["artifact_kind"].get<std::string>());
      if (!d.artifact_kind) throw Error(ErrorCode::InvalidArgument, "unknown artifact_kind");
    }
    if (doc.contains("label_parents")) {
      if (!doc["label_parents"].is_object()) {
        throw Error(ErrorCode::InvalidArgument, "label_parents not an object");
      }
      for (const auto& [label, parent] : doc["label_parents"].items()) {
        d.label_parents[label] = parent.get<std::string>();
      }
    }
    if (d.function == ToolFunction::Specialist && d.conditions.empty()) {
      throw Error(ErrorCode::InvalidArgument, "specialist without conditions");
    }
    if ((d.function == ToolFunction::Generation || d.function == ToolFunction::Report) &&
        !d.artifact_kind) {
      throw Error(ErrorCode::InvalidArgument, "generation tool without artifact_kind");
    }
    return d;
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedDescriptor, id + ": " + e.detail());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedDescriptor, id + ": " + e.what());
  }
}

Json to_json(const ToolDescriptor& d) {
  Json j{{"tool_id", d.tool_id},
         {"display_name", d.display_name},
         {"role", std::string(to_string(d.role))},
         {"task", std::string(to_string(d.task))},
         {"function", std::string(to_string(d.function))},
         {"input", d.is_image_tool() ? "image" : "text"},
         {"modalities", d.modalities},
         {"conditions", d.conditions},
         {"lesion_types", d.lesion_types},
         {"input_schema", d.input_schema.to_json()},
         {"output_schema", d.output_schema.to_json()},
         {"tier", d.tier},
         {"backend",
          {{"kind", d.backend.kind},
           {"locator", d.backend.locator},
           {"timeout_ms", d.backend.timeout.count()}}}};
  Json conds = Json::array();
  for (const auto& c : d.usage_conditions) conds.push_back(c.to_json());
  j["usage_conditions"] = std::move(conds);
  if (!d.usage_note.empty()) j["usage_note"] = d.usage_note;
  if (d.threshold) j["threshold"] = *d.threshold;
  if (d.generation_target) j["generation_target"] = *d.generation_target;
  if (d.artifact_kind) j["artifact_kind"] = std::string(to_string(*d.artifact_kind));
  if (!d.label_parents.empty()) j["label_parents"] = d.label_parents;
  return j;
}

}  // namespace ocuflow
