#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trajan::cli {

/// One configuration value: a quoted string, a number, true/false, or a
/// bracketed list of scalars.
struct Value {
  enum class Kind { String, Number, Bool, List };
  Kind kind = Kind::String;
  std::string text;  // string contents, or the literal as written
  double number = 0.0;
  bool boolean = false;
  std::vector<Value> items;

  /// Normalised literal used for hashing and the manifest.
  std::string canonical() const;
};

/// TOML-like key/value configuration:
///
///   # comment
///   [section]
///   key = "text" | 12.5 | true | [1, 2, 3]
///
/// Keys are addressed as "section.key". Later assignments win.
class Config {
 public:
  /// Throws ConfigError with the line number on syntax errors.
  static Config parse(std::string_view text, const std::string& origin = "config");
  /// Throws IoError when the file cannot be read.
  static Config load(const std::string& path);

  /// Applies "section.key=value". Values that do not parse as a literal are
  /// taken as bare strings.
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, Value v);
  void set_string(const std::string& key, const std::string& s);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, Value>& values() const noexcept { return values_; }

  // Typed access; ConfigError on type mismatch.
  std::optional<std::string> str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  std::optional<double> num(const std::string& key) const;
  double num(const std::string& key, double fallback) const;
  std::optional<std::int64_t> integer(const std::string& key) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::optional<std::vector<double>> nums(const std::string& key) const;
  std::optional<std::vector<std::int64_t>> integers(const std::string& key) const;

  /// Sorted "key = value" lines.
  std::string canonical() const;

  /// Throws ConfigError naming the first key outside `known`.
  void require_known(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, Value> values_;
};

/// Parses a single literal; nullopt when the text is not one.
std::optional<Value> parse_value(std::string_view text);

}  // namespace trajan::cli
