#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace bstack {

/// Output schemas shipped in schemas/*.json, keyed by file stem.
const std::map<std::string, std::string>& embedded_schemas();

/// Validates `doc` against the subset of JSON Schema used by the shipped
/// schemas: type, enum, required, properties, additionalProperties,
/// items, minItems, minimum, maximum. Returns the violations found (empty
/// when valid), each prefixed with its JSON pointer.
std::vector<std::string> validate_json(const nlohmann::json& doc, const nlohmann::json& schema);

/// Validates against embedded_schemas().at(name); throws Error on violation.
void check_against_schema(const nlohmann::json& doc, const std::string& name);

}  // namespace bstack
