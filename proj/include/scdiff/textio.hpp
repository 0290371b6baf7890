#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace scdiff {

/// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Parses a full token as a double (decimal or scientific notation).
/// Returns false on trailing garbage or empty input.
inline bool parse_double(std::string_view s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

}  // namespace scdiff
