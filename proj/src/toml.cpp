#include "beliefsim/toml.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>

#include "beliefsim/error.hpp"

namespace beliefsim::toml {

namespace {

constexpr const char* kModule = "config";

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Parser {
 public:
  Parser(const std::string& text, const EnvLookup& env) : s_(text), env_(env) {}

  Table run() {
    Table root;
    Table* current = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        ++i_;
        if (peek() == '[') fail("arrays of tables are not supported");
        skip_spaces();
        const auto path = key_path();
        skip_spaces();
        expect(']');
        current = &open_table(root, path);
        end_of_line();
        continue;
      }
      const auto path = key_path();
      skip_spaces();
      expect('=');
      skip_spaces();
      Value value = parse_value();
      Table* target = current;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) target = &child_table(*target, path[k], true);
      if (!target->emplace(path.back(), std::move(value)).second) fail("duplicate key '" + path.back() + "'");
      end_of_line();
    }
    return root;
  }

 private:
  bool at_end() const { return i_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[i_]; }

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(kModule, "TOML line " + std::to_string(line_) + ": " + message);
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  void skip_spaces() {
    while (peek() == ' ' || peek() == '\t') ++i_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++i_;
    }
  }

  void newline() {
    if (peek() == '\r') ++i_;
    if (peek() != '\n') fail("expected end of line");
    ++i_;
    ++line_;
  }

  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (at_end()) return;
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        return;
      }
    }
  }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (!at_end()) newline();
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> path;
    while (true) {
      skip_spaces();
      if (peek() == '"') {
        path.push_back(basic_string());
      } else if (peek() == '\'') {
        path.push_back(literal_string());
      } else {
        std::string key;
        while (bare_key_char(peek())) key.push_back(s_[i_++]);
        if (key.empty()) fail("expected a key");
        path.push_back(key);
      }
      skip_spaces();
      if (peek() != '.') return path;
      ++i_;
    }
  }

  Table& child_table(Table& parent, const std::string& key, bool create) {
    auto it = parent.find(key);
    if (it == parent.end()) {
      if (!create) fail("unknown table '" + key + "'");
      it = parent.emplace(key, Value{std::make_shared<Table>()}).first;
    }
    if (!it->second.is_table()) fail("key '" + key + "' is not a table");
    return *std::get<std::shared_ptr<Table>>(it->second.data);
  }

  Table& open_table(Table& root, const std::vector<std::string>& path) {
    Table* t = &root;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) t = &child_table(*t, path[k], true);
    const auto& last = path.back();
    const auto key = join(path);
    if (!opened_.emplace(key).second) fail("table [" + key + "] defined twice");
    return child_table(*t, last, true);
  }

  static std::string join(const std::vector<std::string>& path) {
    std::string out;
    for (const auto& part : path) out += (out.empty() ? "" : ".") + part;
    return out;
  }

  Value parse_value() {
    const char c = peek();
    if (c == '"') return Value{interpolate_here(basic_string())};
    if (c == '\'') return Value{interpolate_here(literal_string())};
    if (c == '[') return Value{array()};
    if (c == '{') fail("inline tables are not supported");
    if (s_.compare(i_, 4, "true") == 0 && !bare_key_char(i_ + 4 < s_.size() ? s_[i_ + 4] : ' ')) {
      i_ += 4;
      return Value{true};
    }
    if (s_.compare(i_, 5, "false") == 0 && !bare_key_char(i_ + 5 < s_.size() ? s_[i_ + 5] : ' ')) {
      i_ += 5;
      return Value{false};
    }
    return number();
  }

  std::string interpolate_here(const std::string& raw) {
    try {
      return interpolate(raw, env_);
    } catch (const ConfigError& error) {
      fail(std::string(error.what()).substr(std::string(kModule).size() + 2));
    }
  }

  Array array() {
    expect('[');
    Array items;
    while (true) {
      skip_array_space();
      if (peek() == ']') {
        ++i_;
        return items;
      }
      items.push_back(parse_value());
      skip_array_space();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      if (peek() == ']') {
        ++i_;
        return items;
      }
      fail("expected ',' or ']' in array");
    }
  }

  void skip_array_space() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        return;
      }
    }
  }

  Value number() {
    std::string token;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                         peek() == '-' || peek() == '.' || peek() == '_')) {
      token.push_back(s_[i_++]);
    }
    if (token.empty()) fail("expected a value");
    std::string clean;
    for (std::size_t k = 0; k < token.size(); ++k) {
      if (token[k] == '_') {
        const bool ok = k > 0 && k + 1 < token.size() && std::isdigit(static_cast<unsigned char>(token[k - 1])) &&
                        std::isdigit(static_cast<unsigned char>(token[k + 1]));
        if (!ok) fail("misplaced '_' in number '" + token + "'");
        continue;
      }
      clean.push_back(token[k]);
    }
    const bool is_float = clean.find_first_of(".eE") != std::string::npos || clean == "inf" ||
                          clean == "+inf" || clean == "-inf" || clean.ends_with("nan");
    const char* begin = clean.data() + (clean.front() == '+' ? 1 : 0);
    const char* end = clean.data() + clean.size();
    if (is_float) {
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr != end) fail("invalid number '" + token + "'");
      return Value{value};
    }
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) fail("invalid value '" + token + "'");
    return Value{value};
  }

  std::string basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = s_[i_++];
      if (c == '"') return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      const char e = s_[i_++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'u':
        case 'U': {
          const std::size_t digits = e == 'u' ? 4 : 8;
          if (i_ + digits > s_.size()) fail("truncated unicode escape");
          std::uint32_t cp = 0;
          const auto [ptr, ec] = std::from_chars(s_.data() + i_, s_.data() + i_ + digits, cp, 16);
          if (ec != std::errc() || ptr != s_.data() + i_ + digits) fail("invalid unicode escape");
          i_ += digits;
          append_utf8(out, cp);
          break;
        }
        default: fail(std::string("unknown escape '\\") + e + "'");
      }
    }
  }

  std::string literal_string() {
    expect('\'');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = s_[i_++];
      if (c == '\'') return out;
      out.push_back(c);
    }
  }

  const std::string& s_;
  const EnvLookup& env_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> opened_;
};

}  // namespace

std::string Value::type_name() const {
  switch (data.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "string";
    case 4: return "array";
    default: return "table";
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* value = std::getenv(name.c_str());
    if (!value) return std::nullopt;
    return std::string(value);
  };
}

std::string interpolate(const std::string& text, const EnvLookup& env) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 3, "$${") == 0) {
      out += "${";
      i += 2;
      continue;
    }
    if (text.compare(i, 2, "${") != 0) {
      out.push_back(text[i]);
      continue;
    }
    const auto close = text.find('}', i + 2);
    if (close == std::string::npos) throw ConfigError(kModule, "unterminated ${...} in '" + text + "'");
    const auto name = text.substr(i + 2, close - i - 2);
    if (name.empty()) throw ConfigError(kModule, "empty ${} in '" + text + "'");
    const auto value = env(name);
    if (!value) throw ConfigError(kModule, "environment variable " + name + " is not set");
    out += *value;
    i = close;
  }
  return out;
}

std::string quote(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  // "${" would be re-expanded when the echo is read back.
  std::string escaped;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.compare(i, 2, "${") == 0) escaped += "$";
    escaped.push_back(out[i]);
  }
  return escaped + "\"";
}

Table parse(const std::string& text, const EnvLookup& env) {
  return Parser(text, env).run();
}

}  // namespace beliefsim::toml
