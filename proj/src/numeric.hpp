#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace pibound::detail {

// Neumaier summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// Shortest representation that parses back to the same double.
inline std::string format_shortest(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

// Round to 12 significant digits; the result prints in at most 12 digits
// under a shortest round-trip formatter.
inline double round_significant(double x, int digits = 12) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  double out = 0.0;
  std::from_chars(buf, buf + std::char_traits<char>::length(buf), out);
  return out;
}

inline std::string format_significant(double x, int digits = 12) {
  if (std::isnan(x)) return "nan";
  return format_shortest(round_significant(x, digits));
}

}  // namespace pibound::detail
