#pragma once

// Shared JSON helpers for the config and report code; not installed.

#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphflow/io.hpp"

namespace graphflow::detail {

using json = nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& what);
void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed);
double number(const json& j, const std::string& path);
double number_or_infinity(const json& j, const std::string& path);
json finite_or_null(double v);
std::size_t count(const json& j, const std::string& path);
std::string text(const json& j, const std::string& path);
std::vector<double> numbers(const json& j, const std::string& path);
std::vector<Point> points(const json& j, const std::string& path);
json points_json(const std::vector<Point>& pts);
Params params(const json& j, const std::string& path);
json parse_json(const std::string& text, const std::string& what);

json config_to_json(const RunConfig& config);
RunConfig config_from_json(const json& j);

}  // namespace graphflow::detail
