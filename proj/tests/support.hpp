#pragma once

#include <cmath>
#include <vector>

#include <doctest.h>

namespace testing {

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return out;
}

// doctest::Approx adds a unit scale to the tolerance, which makes it
// absolute for small SI values. This one is relative (exact zeros still match).
inline doctest::Approx approx(double value) { return doctest::Approx(value).scale(1e-300); }

inline bool close(double a, double b, double rel, double abs = 0.0) {
  return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace testing
