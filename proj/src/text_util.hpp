#pragma once

// Small text helpers shared by the file readers and writers.

#include <array>
#include <charconv>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <system_error>

namespace dmloc::detail {

/// Shortest decimal that round-trips exactly.
inline void append_double(std::string& s, double v) {
  std::array<char, 32> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  s.append(buf.data(), end);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Parses exactly out.size() finite decimals separated by sep (plus optional
/// surrounding blanks). Returns false on any deviation.
inline bool parse_doubles(std::string_view line, std::span<double> out, char sep) {
  const char* p = line.data();
  const char* end = p + line.size();
  auto skip_blank = [&] {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    skip_blank();
    if (i > 0 && sep != ' ') {
      if (p == end || *p != sep) return false;
      ++p;
      skip_blank();
    }
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || next == p || !std::isfinite(v)) return false;
    out[i] = v;
    p = next;
  }
  skip_blank();
  return p == end;
}

}  // namespace dmloc::detail
