#include "bstack/schema.hpp"

#include "bstack/error.hpp"

namespace bstack {

namespace {

bool has_type(const nlohmann::json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>())));
  if (type == "number") return v.is_number();
  return false;
}

void validate(const nlohmann::json& v, const nlohmann::json& schema, const std::string& where,
              std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) ok = has_type(v, t.get<std::string>());
    else for (const auto& alt : t) ok = ok || has_type(v, alt.get<std::string>());
    if (!ok) {
      errors.push_back(where + ": expected type " + t.dump());
      return;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == v;
    if (!found) errors.push_back(where + ": value " + v.dump() + " not in " + schema["enum"].dump());
  }
  if (v.is_number()) {
    if (schema.contains("minimum") && v.get<double>() < schema["minimum"].get<double>())
      errors.push_back(where + ": below minimum " + schema["minimum"].dump());
    if (schema.contains("maximum") && v.get<double>() > schema["maximum"].get<double>())
      errors.push_back(where + ": above maximum " + schema["maximum"].dump());
  }
  if (v.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        if (!v.contains(key.get<std::string>())) errors.push_back(where + ": missing required field " + key.dump());
    const bool closed = schema.contains("additionalProperties") && schema["additionalProperties"].is_boolean() &&
                        !schema["additionalProperties"].get<bool>();
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (schema.contains("properties") && schema["properties"].contains(it.key()))
        validate(it.value(), schema["properties"][it.key()], where + "/" + it.key(), errors);
      else if (closed)
        errors.push_back(where + ": unexpected field \"" + it.key() + "\"");
      else if (schema.contains("additionalProperties") && schema["additionalProperties"].is_object())
        validate(it.value(), schema["additionalProperties"], where + "/" + it.key(), errors);
    }
  }
  if (v.is_array()) {
    if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>())
      errors.push_back(where + ": fewer than " + schema["minItems"].dump() + " items");
    if (schema.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) validate(v[i], schema["items"], where + "/" + std::to_string(i), errors);
  }
}

}  // namespace

std::vector<std::string> validate_json(const nlohmann::json& doc, const nlohmann::json& schema) {
  std::vector<std::string> errors;
  validate(doc, schema, "", errors);
  return errors;
}

void check_against_schema(const nlohmann::json& doc, const std::string& name) {
  const auto& schemas = embedded_schemas();
  const auto it = schemas.find(name);
  if (it == schemas.end()) throw Error("no shipped schema named '" + name + "'");
  const auto errors = validate_json(doc, nlohmann::json::parse(it->second));
  if (!errors.empty()) {
    std::string msg = "output does not match schema '" + name + "':";
    for (const auto& e : errors) msg += "\n  " + (e.empty() ? "/" : e);
    throw Error(msg);
  }
}

}  // namespace bstack
