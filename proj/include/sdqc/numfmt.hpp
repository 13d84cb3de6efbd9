#pragma once

#include <charconv>
#include <string>
#include <string_view>

#include "sdqc/error.hpp"

namespace sdqc {

// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorCode::MalformedDocument, "not a number: '" + std::string(s) + "'");
  return v;
}

inline long long parse_int(std::string_view s) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorCode::MalformedDocument, "not an integer: '" + std::string(s) + "'");
  return v;
}

}  // namespace sdqc
