#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "trajan/core.hpp"

namespace trajan::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

// Strips a trailing comment that is not inside quotes.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::optional<Value> parse_scalar(std::string_view t) {
  t = trim(t);
  if (t.empty()) return std::nullopt;
  Value v;
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') return std::nullopt;
    std::string out;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      if (t[i] == '\\' && i + 2 < t.size()) {
        const char n = t[++i];
        out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
      } else if (t[i] == '"') {
        return std::nullopt;
      } else {
        out.push_back(t[i]);
      }
    }
    v.kind = Value::Kind::String;
    v.text = out;
    return v;
  }
  if (t == "true" || t == "false") {
    v.kind = Value::Kind::Bool;
    v.boolean = t == "true";
    v.text = std::string(t);
    return v;
  }
  double d = 0;
  const auto* end = t.data() + t.size();
  const auto r = std::from_chars(t.data() + (t.front() == '+' ? 1 : 0), end, d);
  if (r.ec == std::errc() && r.ptr == end && std::isfinite(d)) {
    v.kind = Value::Kind::Number;
    v.number = d;
    v.text = std::string(t);
    return v;
  }
  return std::nullopt;
}

const char* kind_name(Value::Kind k) {
  switch (k) {
    case Value::Kind::String: return "a string";
    case Value::Kind::Number: return "a number";
    case Value::Kind::Bool: return "a boolean";
    case Value::Kind::List: return "a list";
  }
  return "a value";
}

[[noreturn]] void type_error(const std::string& key, const char* want, const Value& v) {
  throw ConfigError("config key " + key + " must be " + want + ", got " + kind_name(v.kind));
}

std::int64_t as_integer(const std::string& key, const Value& v) {
  if (v.kind != Value::Kind::Number) type_error(key, "an integer", v);
  if (v.number != std::floor(v.number) || std::abs(v.number) > 9.0e15) {
    throw ConfigError("config key " + key + " must be an integer, got " + v.text);
  }
  return static_cast<std::int64_t>(v.number);
}

}  // namespace

std::string Value::canonical() const {
  switch (kind) {
    case Kind::String: {
      std::string out = "\"";
      for (char c : text) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      return out + "\"";
    }
    case Kind::Number: return format_number(number);
    case Kind::Bool: return boolean ? "true" : "false";
    case Kind::List: {
      std::string out = "[";
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i].canonical();
      }
      return out + "]";
    }
  }
  return {};
}

std::optional<Value> parse_value(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') return std::nullopt;
    Value list;
    list.kind = Value::Kind::List;
    list.text = std::string(text);
    auto body = trim(text.substr(1, text.size() - 2));
    if (body.empty()) return list;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i < body.size() && body[i] == '"') quoted = !quoted;
      if (i == body.size() || (body[i] == ',' && !quoted)) {
        auto item = parse_scalar(body.substr(start, i - start));
        if (!item) return std::nullopt;
        list.items.push_back(std::move(*item));
        start = i + 1;
      }
    }
    return list;
  }
  return parse_scalar(text);
}

Config Config::parse(std::string_view text, const std::string& origin) {
  Config cfg;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto where = origin + " line " + std::to_string(line_no);
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) throw ConfigError(where + ": bad section name");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigError(where + ": bad key '" + std::string(key) + "'");
    auto v = parse_value(line.substr(eq + 1));
    if (!v) throw ConfigError(where + ": cannot read value for " + std::string(key));
    cfg.set(section.empty() ? std::string(key) : section + "." + std::string(key), std::move(*v));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
  const auto key = std::string(trim(std::string_view(assignment).substr(0, eq)));
  const auto dot = key.find('.');
  if (dot == std::string::npos || !valid_key(key.substr(0, dot)) || !valid_key(key.substr(dot + 1))) {
    throw ConfigError("--set key must look like section.key, got '" + key + "'");
  }
  const auto raw = std::string_view(assignment).substr(eq + 1);
  if (auto v = parse_value(raw)) {
    set(key, std::move(*v));
  } else {
    set_string(key, std::string(trim(raw)));
  }
}

void Config::set(const std::string& key, Value v) { values_[key] = std::move(v); }

void Config::set_string(const std::string& key, const std::string& s) {
  Value v;
  v.kind = Value::Kind::String;
  v.text = s;
  values_[key] = std::move(v);
}

std::optional<std::string> Config::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind != Value::Kind::String) type_error(key, "a string", it->second);
  return it->second.text;
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  return str(key).value_or(fallback);
}

std::optional<double> Config::num(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind != Value::Kind::Number) type_error(key, "a number", it->second);
  return it->second.number;
}

double Config::num(const std::string& key, double fallback) const {
  return num(key).value_or(fallback);
}

std::optional<std::int64_t> Config::integer(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return as_integer(key, it->second);
}

std::int64_t Config::integer(const std::string& key, std::int64_t fallback) const {
  return integer(key).value_or(fallback);
}

bool Config::flag(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second.kind != Value::Kind::Bool) type_error(key, "a boolean", it->second);
  return it->second.boolean;
}

std::optional<std::vector<double>> Config::nums(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind != Value::Kind::List) type_error(key, "a list of numbers", it->second);
  std::vector<double> out;
  for (const auto& item : it->second.items) {
    if (item.kind != Value::Kind::Number) type_error(key, "a list of numbers", item);
    out.push_back(item.number);
  }
  return out;
}

std::optional<std::vector<std::int64_t>> Config::integers(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind != Value::Kind::List) type_error(key, "a list of integers", it->second);
  std::vector<std::int64_t> out;
  for (const auto& item : it->second.items) out.push_back(as_integer(key, item));
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v.canonical() + "\n";
  return out;
}

void Config::require_known(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : values_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ConfigError("unknown config key " + k);
    }
  }
}

}  // namespace trajan::cli
