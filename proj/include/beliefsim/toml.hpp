#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace beliefsim::toml {

// Subset: [table] and [a.b] headers, bare or quoted keys, basic and literal
// strings, integers, floats, booleans, and (possibly multi-line) arrays.
// No inline tables, arrays of tables, dates, or multi-line strings.
struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array, std::shared_ptr<Table>> data;

  bool is_table() const { return std::holds_alternative<std::shared_ptr<Table>>(data); }
  const Table& table() const { return *std::get<std::shared_ptr<Table>>(data); }
  std::string type_name() const;
};

// Resolves ${NAME} inside string values; returning nullopt is an error.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

// The default lookup reads the process environment.
EnvLookup process_env();

// Throws ConfigError naming the line on malformed input or an unset variable.
Table parse(const std::string& text, const EnvLookup& env = process_env());

// Replaces ${NAME} references; "$${" escapes a literal "${".
std::string interpolate(const std::string& text, const EnvLookup& env);

// Writer helpers for the config echo.
std::string quote(const std::string& text);

}  // namespace beliefsim::toml
