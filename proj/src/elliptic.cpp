#include "knf/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "knf/common.hpp"

namespace knf {

double agm(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw std::invalid_argument("agm: needs nonnegative arguments");
  if (b > a) std::swap(a, b);
  if (b == 0.0) return 0.0;
  for (int it = 0; it < 64 && (a - b) > 1e-17 * a; ++it) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return 0.5 * (a + b);
}

double ellint_K(double m) {
  if (!(m >= 0.0) || m >= 1.0) throw std::invalid_argument("ellint_K: parameter must be in [0,1)");
  return kPi / (2.0 * agm(1.0, std::sqrt(1.0 - m)));
}

double ellint_E(double m) {
  if (!(m >= 0.0) || m > 1.0) throw std::invalid_argument("ellint_E: parameter must be in [0,1]");
  if (m == 1.0) return 1.0;
  double a = 1.0, b = std::sqrt(1.0 - m), c2sum = 0.5 * m;  // 2^{-1} c_0^2
  double pow2 = 0.5;
  for (int it = 0; it < 64 && (a - b) > 1e-17 * a; ++it) {
    const double c = 0.5 * (a - b);
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
    pow2 *= 2.0;
    c2sum += pow2 * c * c;
  }
  return kPi / (a + b) * (1.0 - c2sum);
}

JacobiSCD jacobi_sncndn(double z, double m) {
  if (!(m >= 0.0) || m > 1.0) throw std::invalid_argument("jacobi_sncndn: parameter must be in [0,1]");
  if (m <= 1e-34) return {std::sin(z), std::cos(z), 1.0};
  if (m == 1.0) {
    const double s = std::tanh(z);
    const double c = 1.0 / std::cosh(z);
    return {s, c, c};
  }
  // descending AGM ladder
  constexpr int kMax = 32;
  double a[kMax], c[kMax];
  a[0] = 1.0;
  double b = std::sqrt(1.0 - m);
  c[0] = std::sqrt(m);
  int n = 0;
  while (n + 1 < kMax && std::abs(c[n]) > 1e-17 * a[n]) {
    const double an = 0.5 * (a[n] + b);
    const double cn1 = 0.5 * (a[n] - b);
    b = std::sqrt(a[n] * b);
    ++n;
    a[n] = an;
    c[n] = cn1;
  }
  // backward Gauss transformation of the amplitude
  double phi = std::ldexp(1.0, n) * a[n] * z;
  double phi_prev = phi;
  for (int i = n; i >= 1; --i) {
    const double s = std::clamp(c[i] / a[i] * std::sin(phi), -1.0, 1.0);
    phi_prev = phi;
    phi = 0.5 * (phi + std::asin(s));
  }
  JacobiSCD out;
  out.sn = std::sin(phi);
  out.cn = std::cos(phi);
  // dn = cos(phi_0)/cos(phi_1 - phi_0); phi_prev is the amplitude one level up
  out.dn = out.cn / std::cos(phi_prev - phi);
  return out;
}

double jacobi_cn(double z, double m) { return jacobi_sncndn(z, m).cn; }

}  // namespace knf
