#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "arc/error.hpp"

namespace arc::text {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline double to_double(std::string_view s, std::size_t line, Errc code = Errc::malformed_row) {
  double v = 0.0;
  if (!parse_double(s, v)) fail(code, "not a number: '" + std::string(s) + "'", line);
  return v;
}

inline long long to_int(std::string_view s, std::size_t line, Errc code = Errc::malformed_row) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(code, "not an integer: '" + std::string(s) + "'", line);
  return v;
}

// Shortest round-trippable representation.
inline std::string fmt_exact(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Millisecond timestamps: integral values print without a fraction.
inline std::string fmt_ms(double ms) {
  const double r = std::round(ms);
  if (std::abs(ms - r) < 1e-9) return fmt_fixed(r, 0);
  return fmt_fixed(ms, 3);
}

// Lines of a key=value file; '#' starts a comment. Keys keep their line number.
struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line;
};

inline std::vector<KeyValue> parse_key_values(std::istream& in) {
  std::vector<KeyValue> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) fail(Errc::invalid_config, "expected key=value", line);
    const auto key = trim(s.substr(0, eq));
    if (key.empty()) fail(Errc::invalid_config, "empty key", line);
    out.push_back({std::string(key), std::string(trim(s.substr(eq + 1))), line});
  }
  return out;
}

}  // namespace arc::text
