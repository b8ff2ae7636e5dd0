#pragma once

// `key = value` header dialect shared by grid files and experiment configs.
// '#' at the start of a line (after whitespace) starts a comment.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "psconrl/error.hpp"

namespace psconrl {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

// Splits on '\n' and strips a trailing '\r' from each line.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(
        start, end == std::string_view::npos ? text.size() - start
                                             : end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

class KeyValues {
 public:
  void set(std::string key, std::string value, int line = 0) {
    entries_[key] = {std::move(value), line};
  }

  bool contains(const std::string& key) const {
    return entries_.count(key) != 0;
  }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.value;
  }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    return v ? to_double(key, *v) : fallback;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    const auto* begin = v->data();
    const auto* end = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
      throw ConfigError("key '" + key + "': expected an integer, got '" + *v +
                        "'");
    }
    return out;
  }

  // Values of `name[1]`, `name[2]`, ... up to the first missing index.
  std::vector<double> get_indexed(const std::string& name) const {
    std::vector<double> out;
    for (int i = 1;; ++i) {
      const std::string key = name + "[" + std::to_string(i) + "]";
      const auto v = get(key);
      if (!v) break;
      out.push_back(to_double(key, *v));
    }
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  int line_of(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

 private:
  static double to_double(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    in.imbue(std::locale::classic());
    double out = 0.0;
    in >> out;
    if (in.fail() || !in.eof()) {
      throw ConfigError("key '" + key + "': expected a number, got '" + v +
                        "'");
    }
    return out;
  }

  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> entries_;
};

// Parses `key = value` lines; `first_line` is the 1-based number of lines[0].
inline KeyValues parse_key_values(const std::vector<std::string>& lines,
                                  int first_line = 1) {
  KeyValues kv;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = first_line + static_cast<int>(i);
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected 'key = value'", line_no, 1);
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no, 1);
    kv.set(std::string(key), std::string(value), line_no);
  }
  return kv;
}

}  // namespace psconrl
