#include "ocuflow/registry/schema.hpp"

#include <cmath>

#include "ocuflow/core/error.hpp"

namespace ocuflow {

namespace {

std::optional<Schema::Type> parse_type(const std::string& s) {
  if (s == "object") return Schema::Type::Object;
  if (s == "array") return Schema::Type::Array;
  if (s == "string") return Schema::Type::String;
  if (s == "number") return Schema::Type::Number;
  if (s == "integer") return Schema::Type::Integer;
  if (s == "boolean") return Schema::Type::Boolean;
  if (s == "any") return Schema::Type::Any;
  return std::nullopt;
}

const char* type_name(Schema::Type t) {
  switch (t) {
    case Schema::Type::Object: return "object";
    case Schema::Type::Array: return "array";
    case Schema::Type::String: return "string";
    case Schema::Type::Number: return "number";
    case Schema::Type::Integer: return "integer";
    case Schema::Type::Boolean: return "boolean";
    case Schema::Type::Any: return "any";
  }
  return "any";
}

// 0 -> "0", 0.5 -> "0.5", 100 -> "100"
std::string bound(double v) {
  if (std::floor(v) == v && std::fabs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return Json(v).dump();
}

std::string leaf(const std::string& path) {
  auto dot = path.find_last_of('.');
  auto name = dot == std::string::npos ? path : path.substr(dot + 1);
  auto bracket = name.find('[');
  return bracket == std::string::npos ? name : name.substr(0, bracket);
}

bool type_matches(Schema::Type t, const Json& v) {
  switch (t) {
    case Schema::Type::Object: return v.is_object();
    case Schema::Type::Array: return v.is_array();
    case Schema::Type::String: return v.is_string();
    case Schema::Type::Number:
      return v.is_number() && std::isfinite(v.get<double>());
    case Schema::Type::Integer:
      if (v.is_number_integer()) return true;
      if (v.is_number_float()) {
        double d = v.get<double>();
        return std::isfinite(d) && std::floor(d) == d;
      }
      return false;
    case Schema::Type::Boolean: return v.is_boolean();
    case Schema::Type::Any: return true;
  }
  return false;
}

}  // namespace

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

std::string index_path(const std::string& base, std::size_t index) {
  return base + "[" + std::to_string(index) + "]";
}

Schema Schema::parse(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "schema must be an object");
  Schema s;
  if (doc.contains("type")) {
    if (!doc["type"].is_string()) throw Error(ErrorCode::InvalidArgument, "schema type not a string");
    auto t = parse_type(doc["type"].get<std::string>());
    if (!t) throw Error(ErrorCode::InvalidArgument, "unknown schema type " + doc["type"].dump());
    s.type_ = *t;
  }
  if (doc.contains("required")) {
    if (!doc["required"].is_array()) throw Error(ErrorCode::InvalidArgument, "required not an array");
    for (const auto& r : doc["required"]) {
      if (!r.is_string()) throw Error(ErrorCode::InvalidArgument, "required entry not a string");
      s.required_.push_back(r.get<std::string>());
    }
  }
  if (doc.contains("properties")) {
    if (!doc["properties"].is_object()) {
      throw Error(ErrorCode::InvalidArgument, "properties not an object");
    }
    for (const auto& [name, sub] : doc["properties"].items()) {
      s.properties_[name] = std::make_shared<const Schema>(parse(sub));
    }
  }
  if (doc.contains("additional")) {
    if (!doc["additional"].is_boolean()) throw Error(ErrorCode::InvalidArgument, "additional not a bool");
    s.additional_ = doc["additional"].get<bool>();
  }
  if (doc.contains("items")) s.items_ = std::make_shared<const Schema>(parse(doc["items"]));
  auto count = [&](const char* key) -> std::optional<std::size_t> {
    if (!doc.contains(key)) return std::nullopt;
    if (!doc[key].is_number_unsigned()) {
      throw Error(ErrorCode::InvalidArgument, std::string(key) + " not a non-negative integer");
    }
    return doc[key].get<std::size_t>();
  };
  auto number = [&](const char* key) -> std::optional<double> {
    if (!doc.contains(key)) return std::nullopt;
    if (!doc[key].is_number()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " not a number");
    return doc[key].get<double>();
  };
  s.min_items_ = count("min_items");
  s.max_items_ = count("max_items");
  s.min_length_ = count("min_length");
  s.minimum_ = number("minimum");
  s.maximum_ = number("maximum");
  if (s.minimum_ && s.maximum_ && *s.minimum_ > *s.maximum_) {
    throw Error(ErrorCode::InvalidArgument, "minimum exceeds maximum");
  }
  if (doc.contains("enum")) {
    if (!doc["enum"].is_array() || doc["enum"].empty()) {
      throw Error(ErrorCode::InvalidArgument, "enum must be a non-empty array");
    }
    for (const auto& v : doc["enum"]) s.enum_.push_back(v);
  }
  if (doc.contains("default")) s.default_ = doc["default"];
  if (!s.required_.empty() && s.type_ != Type::Object) {
    throw Error(ErrorCode::InvalidArgument, "required on non-object");
  }
  return s;
}

void Schema::validate(Json& value, const std::string& path, std::vector<Violation>& out) const {
  const auto where = path.empty() ? std::string("$") : path;
  if (!type_matches(type_, value)) {
    out.push_back({where, std::string("expected ") + type_name(type_)});
    return;
  }
  if (!enum_.empty()) {
    bool found = false;
    for (const auto& e : enum_) found = found || e == value;
    if (!found) {
      Json allowed = enum_;
      out.push_back({where, leaf(where) + " not one of " + allowed.dump()});
    }
  }
  switch (type_) {
    case Type::Object: {
      for (const auto& name : required_) {
        if (!value.contains(name)) out.push_back({join_path(path, name), "required field missing"});
      }
      for (const auto& [name, sub] : properties_) {
        if (!value.contains(name)) {
          if (sub->default_) value[name] = *sub->default_;
          continue;
        }
        sub->validate(value[name], join_path(path, name), out);
      }
      if (!additional_) {
        for (const auto& [name, _] : value.items()) {
          if (!properties_.contains(name)) {
            out.push_back({join_path(path, name), "unexpected field"});
          }
        }
      }
      break;
    }
    case Type::Array: {
      if (min_items_ && value.size() < *min_items_) {
        out.push_back({where, "expected at least " + std::to_string(*min_items_) + " items"});
      }
      if (max_items_ && value.size() > *max_items_) {
        out.push_back({where, "expected at most " + std::to_string(*max_items_) + " items"});
      }
      if (items_) {
        for (std::size_t i = 0; i < value.size(); ++i) {
          items_->validate(value[i], index_path(path, i), out);
        }
      }
      break;
    }
    case Type::Number:
    case Type::Integer: {
      double d = value.get<double>();
      bool low = minimum_ && d < *minimum_;
      bool high = maximum_ && d > *maximum_;
      if (low || high) {
        std::string range = "[" + (minimum_ ? bound(*minimum_) : std::string("-inf")) + "," +
                            (maximum_ ? bound(*maximum_) : std::string("inf")) + "]";
        out.push_back({where, leaf(where) + " out of " + range});
      }
      break;
    }
    case Type::String: {
      if (min_length_ && value.get_ref<const std::string&>().size() < *min_length_) {
        out.push_back({where, leaf(where) + " shorter than " + std::to_string(*min_length_)});
      }
      break;
    }
    case Type::Boolean:
    case Type::Any:
      break;
  }
}

Json Schema::to_json() const {
  Json j{{"type", type_name(type_)}};
  if (!required_.empty()) j["required"] = required_;
  if (!properties_.empty()) {
    Json props = Json::object();
    for (const auto& [name, sub] : properties_) props[name] = sub->to_json();
    j["properties"] = std::move(props);
  }
  if (!additional_) j["additional"] = false;
  if (items_) j["items"] = items_->to_json();
  if (min_items_) j["min_items"] = *min_items_;
  if (max_items_) j["max_items"] = *max_items_;
  if (minimum_) j["minimum"] = *minimum_;
  if (maximum_) j["maximum"] = *maximum_;
  if (min_length_) j["min_length"] = *min_length_;
  if (!enum_.empty()) j["enum"] = enum_;
  if (default_) j["default"] = *default_;
  return j;
}

}  // namespace ocuflow
