#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace sprp::test {

/// Validator for the JSON Schema keywords used by the shipped schemas:
/// type, enum, properties, required, additionalProperties, minProperties,
/// items, minItems, minimum, maximum, exclusiveMinimum. Returns the list of
/// violations (empty when the document conforms).
class SchemaCheck {
 public:
  using json = nlohmann::json;

  std::vector<std::string> operator()(const json& schema, const json& doc) {
    errors_.clear();
    check(schema, doc, "$");
    return errors_;
  }

 private:
  static bool has_type(const json& doc, const std::string& t) {
    if (t == "object") return doc.is_object();
    if (t == "array") return doc.is_array();
    if (t == "string") return doc.is_string();
    if (t == "boolean") return doc.is_boolean();
    if (t == "null") return doc.is_null();
    if (t == "integer") return doc.is_number_integer();
    if (t == "number") return doc.is_number();
    return false;
  }

  void fail(const std::string& where, const std::string& what) { errors_.push_back(where + ": " + what); }

  void check(const json& schema, const json& doc, const std::string& where) {
    if (schema.contains("type")) {
      const json& t = schema["type"];
      bool ok = false;
      if (t.is_string()) ok = has_type(doc, t.get<std::string>());
      for (const auto& alt : t.is_array() ? t : json::array()) ok = ok || has_type(doc, alt.get<std::string>());
      if (!ok) {
        fail(where, "expected type " + t.dump() + ", got " + doc.dump().substr(0, 60));
        return;
      }
    }
    if (schema.contains("enum")) {
      bool found = false;
      for (const auto& v : schema["enum"]) found = found || v == doc;
      if (!found) fail(where, "value " + doc.dump() + " not in enum");
    }
    if (doc.is_number()) {
      const double v = doc.get<double>();
      if (schema.contains("minimum") && v < schema["minimum"].get<double>()) fail(where, "below minimum");
      if (schema.contains("maximum") && v > schema["maximum"].get<double>()) fail(where, "above maximum");
      if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>()) {
        fail(where, "not above exclusiveMinimum");
      }
    }
    if (doc.is_object()) {
      for (const auto& key : schema.value("required", json::array())) {
        if (!doc.contains(key.get<std::string>())) fail(where, "missing required key " + key.dump());
      }
      if (schema.contains("minProperties") && doc.size() < schema["minProperties"].get<std::size_t>()) {
        fail(where, "too few properties");
      }
      const json props = schema.value("properties", json::object());
      for (const auto& [key, value] : doc.items()) {
        const std::string at = where + "." + key;
        if (props.contains(key)) {
          check(props[key], value, at);
        } else if (schema.contains("additionalProperties")) {
          const json& extra = schema["additionalProperties"];
          if (extra.is_boolean()) {
            if (!extra.get<bool>()) fail(at, "unexpected key");
          } else {
            check(extra, value, at);
          }
        }
      }
    }
    if (doc.is_array()) {
      if (schema.contains("minItems") && doc.size() < schema["minItems"].get<std::size_t>()) {
        fail(where, "too few items");
      }
      if (schema.contains("items")) {
        for (std::size_t i = 0; i < doc.size(); ++i) check(schema["items"], doc[i], where + "[" + std::to_string(i) + "]");
      }
    }
  }

  std::vector<std::string> errors_;
};

}  // namespace sprp::test
