#include "dppn/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dppn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::string_view text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value, got '" + std::string(line) +
                        "'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (!kv.entries_.emplace(key, value).second) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValueFile KeyValueFile::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

void KeyValueFile::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << to_string();
}

std::string KeyValueFile::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

const std::string& KeyValueFile::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
  return it->second;
}

double KeyValueFile::get_double(const std::string& key) const {
  const std::string& text = get(key);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ConfigError(origin_ + ": key '" + key + "' is not a finite number: '" + text + "'");
  }
  return value;
}

std::int64_t KeyValueFile::get_int(const std::string& key) const {
  const std::string& text = get(key);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(origin_ + ": key '" + key + "' is not an integer: '" + text + "'");
  }
  return value;
}

std::size_t KeyValueFile::get_size(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) throw ConfigError(origin_ + ": key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

bool KeyValueFile::get_bool(const std::string& key) const {
  const std::string& text = get(key);
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError(origin_ + ": key '" + key + "' must be on/off, got '" + text + "'");
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace dppn
