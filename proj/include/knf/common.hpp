// ============================================================================
// common.hpp -- shared small utilities: constants, least-squares fits,
// stable float formatting, and a stopwatch.  Everything here is header-only.
// ============================================================================
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace knf {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Straight-line least squares y ~= intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;   // coefficient of determination
  int n = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_line: size mismatch");
  LineFit out;
  out.n = static_cast<int>(x.size());
  if (out.n < 2) return out;
  double sx = 0, sy = 0;
  for (int i = 0; i < out.n; ++i) { sx += x[i]; sy += y[i]; }
  const double mx = sx / out.n, my = sy / out.n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < out.n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return out;
}

// Round-trip-exact decimal formatting for doubles (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

class Stopwatch {
 public:
  Stopwatch() : start_(clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }
  void reset() { start_ = clock::now(); }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
};

}  // namespace knf
