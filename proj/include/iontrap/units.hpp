#pragma once

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "iontrap/error.hpp"

namespace iontrap {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg
inline constexpr double kBa138Mass = 137.905247 * kAtomicMassUnit;

inline constexpr double kPicosecond = 1e-12;

/// Seconds to integer picoseconds, rounding to nearest.
[[nodiscard]] inline std::int64_t to_ps(double seconds) {
  return static_cast<std::int64_t>(std::llround(seconds * 1e12));
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Returns the decimal exponent of an SI prefix, or nullopt-like sentinel 99.
inline int si_prefix_exponent(std::string_view prefix) {
  if (prefix.empty()) return 0;
  if (prefix == "p") return -12;
  if (prefix == "n") return -9;
  if (prefix == "u" || prefix == "\xC2\xB5" || prefix == "\xCE\xBC") return -6;
  if (prefix == "m") return -3;
  if (prefix == "k") return 3;
  if (prefix == "M") return 6;
  if (prefix == "G") return 9;
  return 99;
}

}  // namespace detail

/// Parses a number with an optional SI-prefixed unit, e.g. "16ns", "5 ms",
/// "1.6465MHz", "310Hz", "493.4nm". The prefix is folded into the decimal
/// exponent before conversion, so "16ns" yields exactly the double nearest to
/// 16e-9. `unit` is the expected base unit ("s", "Hz", "m", or "" for a bare
/// number); a bare number is always accepted and taken in base units.
[[nodiscard]] inline double parse_quantity(std::string_view text, std::string_view unit = "") {
  const std::string_view s = detail::trim(text);
  if (s.empty()) throw ConfigError(std::string(text), "empty quantity");

  // Split the numeric part: sign, digits, '.', exponent.
  std::size_t pos = 0;
  if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
  while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.')) ++pos;
  const std::size_t mantissa_end = pos;
  long exponent = 0;
  if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
    std::size_t epos = pos + 1;
    if (epos < s.size() && (s[epos] == '+' || s[epos] == '-')) ++epos;
    std::size_t digits = epos;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits > epos) {
      exponent = std::strtol(std::string(s.substr(pos + 1, digits - pos - 1)).c_str(), nullptr, 10);
      pos = digits;
    }
  }
  const std::string_view mantissa = s.substr(0, mantissa_end);
  if (mantissa.empty() || mantissa == "+" || mantissa == "-" || mantissa == ".")
    throw ConfigError(std::string(text), "not a number");

  std::string_view suffix = detail::trim(s.substr(pos));
  if (!suffix.empty()) {
    if (unit.empty() || suffix.size() < unit.size() ||
        suffix.substr(suffix.size() - unit.size()) != unit) {
      throw ConfigError(std::string(text), "expected unit '" + std::string(unit) + "'");
    }
    const int prefix_exp = detail::si_prefix_exponent(suffix.substr(0, suffix.size() - unit.size()));
    if (prefix_exp == 99) throw ConfigError(std::string(text), "unknown SI prefix");
    exponent += prefix_exp;
  }

  const std::string canonical = std::string(mantissa) + "e" + std::to_string(exponent);
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(canonical.c_str(), &end);
  if (errno == ERANGE || end != canonical.c_str() + canonical.size())
    throw ConfigError(std::string(text), "number out of range");
  return value;
}

/// Comma-separated list of quantities, e.g. "0.25ms,0.5ms,1ms".
[[nodiscard]] inline std::vector<double> parse_quantity_list(std::string_view text,
                                                             std::string_view unit = "") {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string_view item =
        text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!detail::trim(item).empty()) out.push_back(parse_quantity(item, unit));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace iontrap
