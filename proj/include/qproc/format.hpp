#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace qproc {

/// Shortest decimal that round-trips to the same double. Integral values keep
/// a trailing ".0" so that probabilities always read as reals ("1.0", "0.75").
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string out(buf, res.ptr);
  if (out.find_first_of(".e") == std::string::npos) out += ".0";
  return out;
}

}  // namespace qproc
