#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpe/error.hpp"
#include "vpe/field.hpp"

namespace vpe::text {

// Canonical unsigned decimal: digits only, no sign, no leading zeros except "0".
inline std::optional<u64> parse_decimal(std::string_view s) {
  if (s.empty() || s.size() > 20) return std::nullopt;
  if (s.size() > 1 && s.front() == '0') return std::nullopt;
  for (char ch : s) {
    if (ch < '0' || ch > '9') return std::nullopt;
  }
  u64 v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline u64 require_decimal(std::string_view s, std::string_view what) {
  auto v = parse_decimal(s);
  if (!v) throw ParseError(std::string(what) + ": non-decimal value '" + std::string(s) + "'");
  return *v;
}

// Splits on single spaces; an empty token (double space, leading or trailing
// space) is reported as an empty string_view so callers can reject it.
inline std::vector<std::string_view> split(std::string_view s, char sep = ' ') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Splits a file body into lines. A single trailing newline is allowed.
inline std::vector<std::string_view> lines(std::string_view body) {
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  if (body.empty()) return {};
  return split(body, '\n');
}

// Parses `key=<decimal>`.
inline u64 keyed_decimal(std::string_view token, std::string_view key) {
  if (token.size() <= key.size() + 1 || token.substr(0, key.size()) != key ||
      token[key.size()] != '=') {
    throw ParseError("expected '" + std::string(key) + "=<decimal>', got '" + std::string(token) + "'");
  }
  return require_decimal(token.substr(key.size() + 1), key);
}

}  // namespace vpe::text
