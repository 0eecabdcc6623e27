#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ocuflow/core/json_io.hpp"

namespace ocuflow {

struct Violation {
  std::string path;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

// Structural schema dialect stored inside catalog documents.
//
//   type        object | array | string | number | integer | boolean | any
//   required    [names]            (object)
//   properties  {name: schema}     (object)
//   additional  bool, default true (object)
//   items       schema             (array)
//   min_items / max_items          (array)
//   minimum / maximum              (number, integer; inclusive)
//   min_length                     (string)
//   enum        [values]
//   default     value applied during normalization when the field is absent
class Schema {
 public:
  enum class Type { Object, Array, String, Number, Integer, Boolean, Any };

  Schema() = default;

  // Throws MalformedDescriptor-style Error(InvalidArgument) with a reason.
  static Schema parse(const Json& doc);

  // Never throws. Appends violations; `value` is normalized in place.
  void validate(Json& value, const std::string& path, std::vector<Violation>& out) const;

  Json to_json() const;
  Type type() const noexcept { return type_; }

 private:
  Type type_ = Type::Any;
  std::vector<std::string> required_;
  std::map<std::string, std::shared_ptr<const Schema>> properties_;
  bool additional_ = true;
  std::shared_ptr<const Schema> items_;
  std::optional<std::size_t> min_items_;
  std::optional<std::size_t> max_items_;
  std::optional<double> minimum_;
  std::optional<double> maximum_;
  std::optional<std::size_t> min_length_;
  std::vector<Json> enum_;
  std::optional<Json> default_;
};

std::string join_path(const std::string& base, const std::string& key);
std::string index_path(const std::string& base, std::size_t index);

}  // namespace ocuflow
