#include "ocuflow/gateway/feedback.hpp"

#include <algorithm>

namespace ocuflow::gateway {

namespace {

Json adoption_values() { return Json(std::vector<int>(kAdoptionLevels.begin(), kAdoptionLevels.end())); }

Json component_values() {
  Json out = Json::array();
  for (auto c : kAdoptableComponents) out.push_back(std::string(c));
  return out;
}

Json confidence_range() { return Json{{"minimum", kConfidenceMin}, {"maximum", kConfidenceMax}}; }

void require_string(const Json& doc, const char* field, std::string& out, std::vector<FieldError>& errors) {
  if (!doc.contains(field) || !doc[field].is_string() || doc[field].get<std::string>().empty()) {
    errors.push_back({field, "required non-empty string", nullptr});
    return;
  }
  out = doc[field].get<std::string>();
}

void require_confidence(const Json& doc, const char* field, int& out, std::vector<FieldError>& errors) {
  if (!doc.contains(field) || !doc[field].is_number_integer()) {
    errors.push_back({field, "required integer", confidence_range()});
    return;
  }
  auto v = doc[field].get<long long>();
  if (v < kConfidenceMin || v > kConfidenceMax) {
    errors.push_back({field, "must be between 1 and 5", confidence_range()});
    return;
  }
  out = static_cast<int>(v);
}

}  // namespace

FeedbackValidation validate_feedback(const Json& doc) {
  FeedbackValidation v;
  if (!doc.is_object()) {
    v.errors.push_back({"", "body must be an object", nullptr});
    return v;
  }
  FeedbackRecord r;
  require_string(doc, "case_id", r.case_id, v.errors);
  require_string(doc, "reader_id", r.reader_id, v.errors);
  require_confidence(doc, "confidence_before", r.confidence_before, v.errors);
  require_confidence(doc, "confidence_after", r.confidence_after, v.errors);

  if (!doc.contains("adoption_percent") || !doc["adoption_percent"].is_number_integer()) {
    v.errors.push_back({"adoption_percent", "required integer", adoption_values()});
  } else {
    auto a = doc["adoption_percent"].get<long long>();
    if (std::find(kAdoptionLevels.begin(), kAdoptionLevels.end(), a) == kAdoptionLevels.end()) {
      v.errors.push_back({"adoption_percent", "must be one of 0, 25, 50, 75, 100", adoption_values()});
    } else {
      r.adoption_percent = static_cast<int>(a);
    }
  }

  if (doc.contains("adopted_components")) {
    const auto& comps = doc["adopted_components"];
    if (!comps.is_array()) {
      v.errors.push_back({"adopted_components", "must be an array", component_values()});
    } else {
      for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto field = "adopted_components/" + std::to_string(i);
        if (!comps[i].is_string()) {
          v.errors.push_back({field, "must be a string", component_values()});
          continue;
        }
        auto c = comps[i].get<std::string>();
        if (std::find(kAdoptableComponents.begin(), kAdoptableComponents.end(), c) == kAdoptableComponents.end()) {
          v.errors.push_back({field, "unknown component '" + c + "'", component_values()});
        } else if (!r.adopted_components.insert(c).second) {
          v.errors.push_back({field, "duplicate component '" + c + "'", component_values()});
        }
      }
    }
  }

  if (doc.contains("free_text") && !doc["free_text"].is_null()) {
    if (!doc["free_text"].is_string()) {
      v.errors.push_back({"free_text", "must be a string", nullptr});
    } else {
      r.free_text = doc["free_text"].get<std::string>();
    }
  }

  static const std::set<std::string> known{"case_id",          "reader_id",          "confidence_before",
                                           "confidence_after", "adoption_percent",   "adopted_components",
                                           "free_text"};
  for (const auto& [k, _] : doc.items()) {
    if (!known.contains(k)) v.errors.push_back({k, "unknown field", nullptr});
  }
  if (v.errors.empty()) v.record = std::move(r);
  return v;
}

Json to_json(const FeedbackRecord& r) {
  Json doc{{"case_id", r.case_id},
           {"reader_id", r.reader_id},
           {"confidence_before", r.confidence_before},
           {"confidence_after", r.confidence_after},
           {"adoption_percent", r.adoption_percent},
           {"adopted_components", r.adopted_components}};
  if (r.free_text) doc["free_text"] = *r.free_text;
  return doc;
}

Json feedback_schema() {
  Json conf{{"type", "integer"}, {"minimum", kConfidenceMin}, {"maximum", kConfidenceMax}};
  return Json{
      {"type", "object"},
      {"required", {"case_id", "reader_id", "confidence_before", "confidence_after", "adoption_percent"}},
      {"additional", false},
      {"properties",
       {{"case_id", {{"type", "string"}, {"min_length", 1}}},
        {"reader_id", {{"type", "string"}, {"min_length", 1}}},
        {"confidence_before", conf},
        {"confidence_after", conf},
        {"adoption_percent", {{"type", "integer"}, {"enum", adoption_values()}}},
        {"adopted_components", {{"type", "array"}, {"items", {{"type", "string"}, {"enum", component_values()}}}}},
        {"free_text", {{"type", "string"}}}}}};
}

}  // namespace ocuflow::gateway
