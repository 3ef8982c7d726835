// Internal helpers for schema-versioned JSON documents.
#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "mlrisk/error.hpp"

namespace mlrisk::detail {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": malformed JSON: " + e.what());
  }
}

// Checks the schema_version field when present.
inline void check_schema(const json& doc, const std::string& what) {
  if (!doc.is_object()) throw ValidationError(what + ": expected a JSON object");
  if (auto it = doc.find("schema_version"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() != kSchemaVersion)
      throw ValidationError(what + ": unsupported schema_version " + it->dump());
  }
}

template <typename T>
T field(const json& doc, const char* key, const std::string& what) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(what + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(what + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace mlrisk::detail
