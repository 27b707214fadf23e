#pragma once

// JSON field accessors shared by the line parsers. Errors are
// DataError("line N: ...").

#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntekit/common.hpp"

namespace ntekit::jsonl {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

inline std::string at_line(std::size_t line_number, std::string_view message) {
  return "line " + std::to_string(line_number) + ": " + std::string(message);
}

inline json parse_object(std::string_view line, std::size_t line_number) {
  json value = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) throw DataError(at_line(line_number, "malformed JSON"));
  if (!value.is_object()) throw DataError(at_line(line_number, "expected a JSON object"));
  return value;
}

inline const json& field(const json& obj, const char* name, std::size_t line_number) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    throw DataError(at_line(line_number, std::string("missing field ") + name));
  }
  return *it;
}

inline std::string string_field(const json& obj, const char* name, std::size_t line_number) {
  const json& value = field(obj, name, line_number);
  if (!value.is_string()) {
    throw DataError(at_line(line_number, std::string("field ") + name + " must be a string"));
  }
  return value.get<std::string>();
}

inline std::optional<std::string> optional_string(const json& obj, const char* name,
                                           std::size_t line_number) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw DataError(at_line(line_number, std::string("field ") + name + " must be a string"));
  }
  return it->get<std::string>();
}

inline const json& array_field(const json& obj, const char* name, std::size_t line_number) {
  const json& value = field(obj, name, line_number);
  if (!value.is_array()) {
    throw DataError(at_line(line_number, std::string("field ") + name + " must be an array"));
  }
  return value;
}

inline std::vector<std::string> string_array(const json& obj, const char* name,
                                      std::size_t line_number) {
  const json& arr = array_field(obj, name, line_number);
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const auto& item : arr) {
    if (!item.is_string()) {
      throw DataError(at_line(line_number, std::string("field ") + name + " must hold strings"));
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

inline std::size_t index_field(const json& obj, const char* name, std::size_t line_number) {
  const json& value = field(obj, name, line_number);
  if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0)) {
    throw DataError(at_line(line_number, std::string("field ") + name +
                                             " must be a non-negative integer"));
  }
  return value.get<std::size_t>();
}

inline std::string dump(const ordered& value) {
  return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

}  // namespace ntekit::jsonl
