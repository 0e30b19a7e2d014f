#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "zolr/common.hpp"

namespace zolr {

// Signed two's-complement Q-format: `total_bits` wide word with `frac_bits`
// fractional bits. Rounding is to nearest with ties to even; out-of-range
// values saturate.
struct FixedPointFormat {
  int total_bits = 32;
  int frac_bits = 16;

  static FixedPointFormat q16_16() { return {32, 16}; }

  void validate() const {
    require(total_bits == 16 || total_bits == 32, "fixed point: total_bits must be 16 or 32");
    require(frac_bits > 0 && frac_bits < total_bits,
            "fixed point: frac_bits must satisfy 0 < frac_bits < total_bits");
  }

  std::int64_t raw_max() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
  std::int64_t raw_min() const { return -(std::int64_t{1} << (total_bits - 1)); }
  double resolution() const { return std::ldexp(1.0, -frac_bits); }
  double max_value() const { return std::ldexp(static_cast<double>(raw_max()), -frac_bits); }
  double min_value() const { return std::ldexp(static_cast<double>(raw_min()), -frac_bits); }

  // "Q16.16" style: integer bits (including sign) before the dot.
  std::string name() const {
    return "Q" + std::to_string(total_bits - frac_bits) + "." + std::to_string(frac_bits);
  }

  bool operator==(const FixedPointFormat&) const = default;
};

// Parses "Q16.16" / "Q8.8" (integer.fraction, summing to 16 or 32 bits).
inline FixedPointFormat parse_fixed_point(const std::string& text) {
  const auto dot = text.find('.');
  if (text.size() < 4 || (text[0] != 'Q' && text[0] != 'q') || dot == std::string::npos)
    throw InvalidArgument("fixed point: cannot parse format '" + text + "'");
  FixedPointFormat f;
  try {
    const int ibits = std::stoi(text.substr(1, dot - 1));
    f.frac_bits = std::stoi(text.substr(dot + 1));
    f.total_bits = ibits + f.frac_bits;
  } catch (const std::exception&) {
    throw InvalidArgument("fixed point: cannot parse format '" + text + "'");
  }
  f.validate();
  return f;
}

// NaN maps to 0; infinities saturate.
inline std::int64_t quantize(double x, const FixedPointFormat& fmt) {
  if (std::isnan(x)) return 0;
  const double scaled = std::ldexp(x, fmt.frac_bits);
  const double hi = static_cast<double>(fmt.raw_max());
  const double lo = static_cast<double>(fmt.raw_min());
  if (scaled >= hi) return fmt.raw_max();
  if (scaled <= lo) return fmt.raw_min();
  // Round half to even by hand: floor and the difference are exact here, and
  // nothing depends on the floating-point environment.
  double r = std::floor(scaled);
  const double frac = scaled - r;
  if (frac > 0.5 || (frac == 0.5 && std::fmod(r, 2.0) != 0.0)) r += 1.0;
  return std::clamp(static_cast<std::int64_t>(r), fmt.raw_min(), fmt.raw_max());
}

inline double dequantize(std::int64_t q, const FixedPointFormat& fmt) {
  return std::ldexp(static_cast<double>(q), -fmt.frac_bits);
}

// Round trip through the format.
inline double snap(double x, const FixedPointFormat& fmt) {
  return dequantize(quantize(x, fmt), fmt);
}

inline void snap_inplace(std::span<double> v, const FixedPointFormat& fmt) {
  for (auto& x : v) x = snap(x, fmt);
}

}  // namespace zolr
