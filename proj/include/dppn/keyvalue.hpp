#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dppn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered `key=value` map read from UTF-8 text. Blank lines and lines
/// starting with '#' are ignored; whitespace around keys and values is
/// trimmed. Duplicate keys are an error.
class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse(std::string_view text, const std::string& origin = "<text>");
  static KeyValueFile read(const std::filesystem::path& path);

  void write(const std::filesystem::path& path) const;
  std::string to_string() const;

  bool contains(const std::string& key) const { return entries_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string origin_;
};

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace dppn
