#pragma once

// Minimal JSON-Schema checker covering the subset the shipped report schema
// uses: type, const, required, properties, $ref into #/definitions, oneOf.

#include <json.hpp>

#include <string>

namespace testsup {

using nlohmann::json;

inline bool schema_valid(const json& schema, const json& root_schema, const json& value);

inline bool schema_type_ok(const std::string& type, const json& value) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
    if (type == "number") return value.is_number();
    if (type == "boolean") return value.is_boolean();
    return false;
}

inline const json& schema_resolve(const json& schema, const json& root) {
    if (schema.contains("$ref")) {
        const std::string ref = schema["$ref"].get<std::string>();
        const std::string prefix = "#/definitions/";
        if (ref.rfind(prefix, 0) == 0) return root["definitions"][ref.substr(prefix.size())];
    }
    return schema;
}

inline bool schema_valid(const json& schema_in, const json& root, const json& value) {
    const json& schema = schema_resolve(schema_in, root);
    if (schema.contains("oneOf")) {
        int hits = 0;
        for (const auto& sub : schema["oneOf"])
            if (schema_valid(sub, root, value)) ++hits;
        if (hits != 1) return false;
    }
    if (schema.contains("const") && schema["const"] != value) return false;
    if (schema.contains("type") &&
        !schema_type_ok(schema["type"].get<std::string>(), value))
        return false;
    if (schema.contains("required")) {
        if (!value.is_object()) return false;
        for (const auto& key : schema["required"])
            if (!value.contains(key.get<std::string>())) return false;
    }
    if (schema.contains("properties") && value.is_object()) {
        for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
            if (value.contains(it.key()) && !schema_valid(it.value(), root, value[it.key()]))
                return false;
        }
    }
    return true;
}

inline bool report_matches_schema(const json& schema, const json& report) {
    return schema_valid(schema, schema, report);
}

}  // namespace testsup
