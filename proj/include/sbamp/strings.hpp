#pragma once

// Text helpers for the file formats. Doubles are printed with the shortest
// representation that round-trips exactly, so save/load cycles are
// bit-stable and CSVs stay deterministic.

#include <charconv>
#include <string>
#include <system_error>

#include "sbamp/errors.hpp"

namespace sbamp {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, int line = -1, const std::string& key = "") {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{}) throw ParseError("expected a number, got '" + s + "'", line, key);
  return v;
}

inline long parse_long(const std::string& s, int line = -1, const std::string& key = "") {
  long v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{}) throw ParseError("expected an integer, got '" + s + "'", line, key);
  return v;
}

}  // namespace sbamp
