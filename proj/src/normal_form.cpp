// ============================================================================
// normal_form.cpp -- implementation of the differentiation-by-parts calculus.
//
// Layout of this file:
//   1. per-time phase tables and the coefficient table of both conventions
//   2. the individual operators (quadratic, cubic, quartic, quintic)
//   3. flow right-hand sides and the exact chain-rule derivatives
//   4. closure oracles and finite-difference verification
//   5. the weighted Fredholm report (Eigen SVD)
//   6. the measured-vs-proved bound report (Young/Cauchy-Schwarz constants,
//      Schur-test constants for the quartic kernels)
//
// Index-set guards: every division below is protected by an explicit skip of
// the vanishing denominator; the zero modes of v and S vanish identically
// (both are mean-zero), so skipping them never drops a nonzero term.
// ============================================================================
#include "knf/normal_form.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "knf/common.hpp"

namespace knf {

namespace {

const cplx kI(0.0, 1.0);

// ---- phase tables -----------------------------------------------------------
// E[j] = exp(i t j^3) for |j| <= band; every tuple phase below is a product of
// table entries, so algebraic phase identities hold exactly in floating point.
struct Tb {
  double t = 0.0;
  int EB = 0;
  std::vector<cplx> E;
  FourierField S;
};

Tb make_tb(const NormalForm& nf, double t) {
  Tb tb;
  tb.t = t;
  tb.EB = nf.band();
  tb.E.resize(2 * static_cast<size_t>(tb.EB) + 1);
  for (int j = -tb.EB; j <= tb.EB; ++j) {
    const double jd = static_cast<double>(j);
    tb.E[static_cast<size_t>(j + tb.EB)] = std::polar(1.0, t * jd * jd * jd);
  }
  tb.S = nf.S(t);
  return tb;
}

inline cplx Eph(const Tb& tb, int j) { return tb.E[static_cast<size_t>(j + tb.EB)]; }
// Signed variant for the quartic phases: sign = +1 uses exp(it sum k^3 - ...),
// sign = -1 the complex conjugate convention.
inline cplx Eps(const Tb& tb, int j, double sign) {
  const cplx e = Eph(tb, j);
  return sign > 0 ? e : std::conj(e);
}

// ---- coefficient table ------------------------------------------------------
// K and B1 are common to both conventions:
//   K(v)_k  = -(1/3) sum e2 S1 v2 / (k1 k2)
//   B1(v)_k = -(1/6) sum e2 v1 v2 / (k1 k2)
// Everything else differs by the factors pinned in the unit tests.
struct Coefs {
  cplx B2, L0, R11, R12, R13, R14, R2, R3, R4, R5, R6;  // dbp identity
  cplx D, E2, E3;                                       // de identity
  double quartic_sign;  // phase exponent sign in R5/R6
  bool r6_m0;           // include the k3+k4 = 0 slice of R6
  bool e3_m0;           // include the k3+k4+k5 = 0 slice of E3
};

Coefs coefs(Convention c) {
  Coefs o;
  if (c == Convention::closing) {
    o.B2 = 1.0 / 18.0;
    o.L0 = kI / 3.0;
    o.R11 = -kI / 6.0;
    o.R12 = -kI / 6.0;
    o.R13 = kI / 3.0;
    o.R14 = -kI / 3.0;
    o.R2 = kI / 3.0;
    o.R3 = kI / 3.0;
    o.R4 = -kI / 18.0;
    o.R5 = -kI / 18.0;
    o.R6 = -kI / 36.0;
    o.D = 2.0 / 9.0;
    o.E2 = -2.0 * kI / 9.0;
    o.E3 = 4.0 * kI / 27.0;
    o.quartic_sign = +1.0;
    o.r6_m0 = false;
    o.e3_m0 = false;
  } else {
    o.B2 = -1.0 / 9.0;
    o.L0 = 2.0 * kI / 3.0;
    o.R11 = kI / 3.0;
    o.R12 = -kI / 3.0;
    o.R13 = -2.0 * kI / 3.0;
    o.R14 = -2.0 * kI / 3.0;
    o.R2 = -kI / 3.0;
    o.R3 = 2.0 * kI / 3.0;
    o.R4 = kI / 9.0;
    o.R5 = kI / 9.0;
    o.R6 = kI / 18.0;
    o.D = -kI / 3.0;
    o.E2 = cplx(-1.0 / 3.0, 0.0);
    o.E3 = 2.0 / 9.0;
    o.quartic_sign = -1.0;
    o.r6_m0 = true;
    o.e3_m0 = true;
  }
  return o;
}

// ---- quadratic operators ----------------------------------------------------

// coef * sum_{k1+k2=k} e2 * X_{k1} v_{k2} * w(k1) / (k1 k2)
template <class W>
FourierField quad_sum(const Tb& tb, const FourierField& X, const FourierField& v,
                      cplx coef, W&& w) {
  const int N = v.N(), XB = X.N();
  FourierField out(N);
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -XB; k1 <= XB; ++k1) {
      if (k1 == 0) continue;
      const int k2 = k - k1;
      if (k2 == 0 || k2 < -N || k2 > N) continue;
      acc += Eph(tb, k1) * Eph(tb, k2) * X(k1) * v(k2) *
             (w(k1) / (static_cast<double>(k1) * k2));
    }
    out(k) = coef * acc * std::conj(Eph(tb, k));
  }
  return out;
}

// coef * sum_{k1+k2+k3=k} e3 * X_{k1} Y_{k2} Z_{k3} * w(k1,k2,k3)  over pred
template <class W, class P>
FourierField cubic_sum(const Tb& tb, const FourierField& X, const FourierField& Y,
                       const FourierField& Z, cplx coef, W&& w, P&& pred) {
  const int N = std::max(X.N(), std::max(Y.N(), Z.N()));
  const int XB = X.N(), YB = Y.N(), ZB = Z.N();
  FourierField out(N);
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -XB; k1 <= XB; ++k1) {
      if (k1 == 0) continue;
      const cplx x1 = X(k1) * Eph(tb, k1);
      if (x1 == cplx(0.0, 0.0)) continue;
      for (int k2 = -YB; k2 <= YB; ++k2) {
        if (k2 == 0) continue;
        const int k3 = k - k1 - k2;
        if (k3 == 0 || k3 < -ZB || k3 > ZB) continue;
        if (!pred(k1, k2, k3)) continue;
        acc += x1 * Eph(tb, k2) * Eph(tb, k3) * Y(k2) * Z(k3) * w(k1, k2, k3);
      }
    }
    out(k) = coef * acc * std::conj(Eph(tb, k));
  }
  return out;
}

inline bool star3(int k1, int k2, int k3) {  // all pair sums nonzero
  return (k1 + k2) != 0 && (k2 + k3) != 0 && (k3 + k1) != 0;
}
inline double dtilde(int k1, int k2, int k3) {
  return static_cast<double>(k1 + k2) * (k2 + k3) * (k3 + k1);
}
// Truncated-flow pair cap.  A cubic term created by substituting the band-N
// flow rhs into a quadratic slot inherits |k2 + k3| <= N: the substituted pair
// was itself a live mode of the band-limited rhs.  Every operator downstream
// of that substitution (B2, L0, R3, R4, the resonant quadratics, R5, R6)
// carries this indicator; it is vacuous in the untruncated limit N -> infinity,
// where the operators reduce to their classical forms.  The once-integrated
// cubic calculus (D, E1, E2r, E2, E3) substitutes only single-mode slots and
// needs no caps.
inline bool cap_pair(int k2, int k3, int N) { return std::abs(k2 + k3) <= N; }

FourierField impl_K(const Tb& tb, const FourierField& v) {
  return quad_sum(tb, tb.S, v, cplx(-1.0 / 3.0, 0.0), [](int) { return 1.0; });
}

FourierField impl_B1(const Tb& tb, const FourierField& v) {
  return quad_sum(tb, v, v, cplx(-1.0 / 6.0, 0.0), [](int) { return 1.0; });
}

FourierField impl_R2(const NormalForm& nf, const Tb& tb, const FourierField& v,
                     const Coefs& cf) {
  return quad_sum(tb, tb.S, v, cf.R2, [&nf](int k1) { return nf.psi(k1); });
}

FourierField impl_L0(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N();
  return cubic_sum(tb, tb.S, tb.S, v, cf.L0,
                   [](int k1, int, int) { return 1.0 / k1; },
                   [N](int, int k2, int k3) { return cap_pair(k2, k3, N); });
}

FourierField impl_R3(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N();
  return cubic_sum(tb, v, tb.S, v, cf.R3,
                   [](int k1, int, int) { return 1.0 / k1; },
                   [N](int, int k2, int k3) {
                     return (k2 + k3) != 0 && cap_pair(k2, k3, N);
                   });
}

FourierField impl_R4(const NormalForm& nf, const Tb& tb, const FourierField& v,
                     const Coefs& cf) {
  const int N = v.N();
  return cubic_sum(tb, tb.S, v, v, cf.R4,
                   [&nf](int k1, int k2, int k3) {
                     return nf.psi(k1) / (k1 * dtilde(k1, k2, k3));
                   },
                   [N](int k1, int k2, int k3) {
                     return star3(k1, k2, k3) && cap_pair(k2, k3, N);
                   });
}

FourierField impl_B2(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N();
  FourierField vpS = v;  // (v + S) in the first slot
  for (int j = -tb.S.N(); j <= tb.S.N(); ++j) vpS(j) += tb.S(j);
  return cubic_sum(tb, vpS, v, v, cf.B2,
                   [](int k1, int k2, int k3) { return 1.0 / (k1 * dtilde(k1, k2, k3)); },
                   [N](int k1, int k2, int k3) {
                     return star3(k1, k2, k3) && cap_pair(k2, k3, N);
                   });
}

FourierField impl_D(const Tb& tb, const FourierField& v, const Coefs& cf) {
  return cubic_sum(tb, tb.S, tb.S, v, cf.D,
                   [](int k1, int k2, int k3) { return 1.0 / (k1 * dtilde(k1, k2, k3)); },
                   star3);
}

FourierField impl_E2(const NormalForm& nf, const Tb& tb, const FourierField& v,
                     const Coefs& cf) {
  return cubic_sum(tb, tb.S, tb.S, v, cf.E2,
                   [&nf](int k1, int k2, int k3) {
                     return (nf.psi(k1) + nf.psi(k2)) / (k1 * dtilde(k1, k2, k3));
                   },
                   star3);
}

// ---- resonant quadratics ----------------------------------------------------
// These live on the degenerate planes of the cubic sums, where the tuple
// phases collapse to 1 (the k^3 factors cancel pairwise), so no e-factors.

FourierField impl_R11(const FourierField& v, Convention conv, const Coefs& cf) {
  const int N = v.N();
  FourierField out(N);
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    const cplx vk = v(k);
    const cplx third = (conv == Convention::reference) ? std::conj(vk) : v(-k);
    cplx val(0.0, 0.0);
    // Diagonal tuple (-k, k, k) has pair sum 2k, so it survives the cap only
    // for |k| <= N/2.
    if (cap_pair(k, k, N)) val += cf.R11 * vk * vk * third / static_cast<double>(k);
    // Band-edge leftover of the capped odd sum; its j <-> -j cancellation is
    // only partial when |k - j| <= N excludes one partner.  Same chain-rule
    // parent as R13, hence the same coefficient.
    cplx u(0.0, 0.0);
    for (int j = -N; j <= N; ++j) {
      if (j == 0 || j == k || j == -k) continue;
      if (!cap_pair(k, -j, N)) continue;
      u += v(j) * v(-j) / static_cast<double>(j);
    }
    val += cf.R13 * vk * u;
    out(k) = val;
  }
  return out;
}

FourierField impl_R12(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N();
  FourierField out(N);
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    if (!cap_pair(k, k, N)) continue;  // resonant tuple has pair sum 2k
    out(k) = cf.R12 * tb.S.get(-k) * v(k) * v(k) / static_cast<double>(k);
  }
  return out;
}

FourierField impl_R13(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N(), SB = tb.S.N();
  FourierField out(N);
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int j = -SB; j <= SB; ++j) {
      if (j == 0 || j == k || j == -k) continue;
      if (!cap_pair(k, -j, N)) continue;  // pair sum of the parent tuple is k - j
      acc += tb.S(j) * v.get(-j) / static_cast<double>(j);
    }
    out(k) = cf.R13 * v(k) * acc;
  }
  return out;
}

FourierField impl_R14(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N(), SB = tb.S.N();
  cplx full(0.0, 0.0);
  for (int j = -N; j <= N; ++j) {
    if (j == 0) continue;
    full += tb.S.get(-j) * v(j);
  }
  FourierField out(N);
  for (int k = -SB; k <= SB; ++k) {
    if (k == 0) continue;
    out(k) = cf.R14 * tb.S(k) / static_cast<double>(k) * full;
  }
  return out;
}

FourierField impl_E1(const Tb& tb, const FourierField& v) {
  const int N = v.N(), SB = tb.S.N();
  cplx full(0.0, 0.0);
  for (int j = -SB; j <= SB; ++j) {
    if (j == 0) continue;
    full += tb.S(j) * v.get(-j) / static_cast<double>(j);
  }
  const cplx coef = 2.0 * kI / 3.0;
  FourierField out(N);
  for (int k = -SB; k <= SB; ++k) {
    if (k == 0) continue;
    cplx acc = full;  // exclude j = k
    acc -= tb.S(k) * v.get(-k) / static_cast<double>(k);
    out(k) = coef * tb.S(k) * acc;
  }
  return out;
}

FourierField impl_E2r(const Tb& tb, const FourierField& v) {
  const int N = v.N(), SB = tb.S.N();
  cplx full(0.0, 0.0);
  for (int j = -N; j <= N; ++j) {
    if (j == 0) continue;
    full += tb.S.get(-j) * v(j);
  }
  const cplx coef = 2.0 * kI / 3.0;
  FourierField out(N);
  for (int k = -SB; k <= SB; ++k) {
    if (k == 0) continue;
    out(k) = coef * tb.S(k) / static_cast<double>(k) * full;
  }
  return out;
}

// ---- quartic operators ------------------------------------------------------
// Restructured through the phased inner convolution
//   C_m = conj(E_m) sum_{k3+k4=m} E_{k3} (v+2S)_{k3} E_{k4} v_{k4},  |m| <= N,
// which is exactly the chain-rule slot created by one substitution of the
// quadratic flow; the |m| <= N truncation is the truncated-flow semantics.

FourierField build_C(const Tb& tb, const FourierField& v, double sign) {
  const int N = v.N();
  FourierField wt(N), vt(N);
  for (int j = -N; j <= N; ++j) {
    if (j == 0) continue;
    const cplx ph = Eps(tb, j, sign);
    wt(j) = ph * (v(j) + 2.0 * tb.S.get(j));
    vt(j) = ph * v(j);
  }
  FourierField C = convolve(wt, vt, N);
  for (int m = -N; m <= N; ++m) C(m) *= std::conj(Eps(tb, m, sign));
  return C;
}

FourierField impl_R5(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N(), SB = tb.S.N();
  const double sg = cf.quartic_sign;
  const FourierField C = build_C(tb, v, sg);
  FourierField out(N);
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -SB; k1 <= SB; ++k1) {
      if (k1 == 0) continue;
      const cplx s1 = tb.S(k1) * Eps(tb, k1, sg);
      if (s1 == cplx(0.0, 0.0)) continue;
      for (int m = -N; m <= N; ++m) {
        if (m == 0) continue;  // the numerator m vanishes anyway
        const int k2 = k - k1 - m;
        if (k2 == 0 || k2 < -N || k2 > N) continue;
        if ((k1 + k2) == 0 || (k1 + m) == 0 || (k2 + m) == 0) continue;
        if (!cap_pair(k2, m, N)) continue;  // pair cap inherited from B2
        const double den = static_cast<double>(k1) * (k1 + k2) * (k1 + m) * (k2 + m);
        acc += s1 * Eps(tb, k2, sg) * Eps(tb, m, sg) * v(k2) *
               (static_cast<double>(m) / den) * C(m);
      }
    }
    out(k) = cf.R5 * acc * std::conj(Eps(tb, k, sg));
  }
  return out;
}

FourierField impl_R6(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N();
  const double sg = cf.quartic_sign;
  const FourierField C = build_C(tb, v, sg);
  FourierField out(N);
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -N; k1 <= N; ++k1) {
      if (k1 == 0) continue;
      const cplx v1 = v(k1) * Eps(tb, k1, sg);
      if (v1 == cplx(0.0, 0.0)) continue;
      for (int m = -N; m <= N; ++m) {
        if (m == 0 && !cf.r6_m0) continue;
        const int k2 = k - k1 - m;
        if (k2 == 0 || k2 < -N || k2 > N) continue;
        if ((k1 + k2) == 0 || (k1 + m) == 0 || (k2 + m) == 0) continue;
        // The two chain-rule parents of R6 carry different pair caps, so the
        // classical combined numerator (k1 + 2m) splits into two kernels; where
        // both caps hold they recombine exactly.
        double kern = 0.0;
        if (cap_pair(k1, k2, N))
          kern += 1.0 / (static_cast<double>(m + k1) * (k1 + k2) * (k2 + m));
        if (cap_pair(k2, m, N))
          kern += 2.0 * m /
                  (static_cast<double>(k1) * (k1 + k2) * (k1 + m) * (k2 + m));
        if (kern == 0.0) continue;
        acc += v1 * Eps(tb, k2, sg) * Eps(tb, m, sg) * v(k2) * kern * C(m);
      }
    }
    out(k) = cf.R6 * acc * std::conj(Eps(tb, k, sg));
  }
  return out;
}

// ---- quintic operator -------------------------------------------------------
// W_m = conj(E_m) sum_{k3+k4+k5=m} E (S_{k3}/k3) E S_{k4} E v_{k5}, |m| <= N.

FourierField impl_E3(const Tb& tb, const FourierField& v, const Coefs& cf) {
  const int N = v.N(), SB = tb.S.N();
  FourierField Sh(SB), St(SB), vt(N);
  for (int j = -SB; j <= SB; ++j) {
    if (j == 0) continue;
    const cplx ph = Eph(tb, j);
    Sh(j) = ph * tb.S(j) / static_cast<double>(j);
    St(j) = ph * tb.S(j);
  }
  for (int j = -N; j <= N; ++j) {
    if (j == 0) continue;
    vt(j) = Eph(tb, j) * v(j);
  }
  FourierField W = convolve(convolve(Sh, St, 2 * SB), vt, N);
  for (int m = -N; m <= N; ++m) W(m) *= std::conj(Eph(tb, m));

  FourierField out(N);
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -SB; k1 <= SB; ++k1) {
      if (k1 == 0) continue;
      const cplx s1 = tb.S(k1) / static_cast<double>(k1) * Eph(tb, k1);
      if (s1 == cplx(0.0, 0.0)) continue;
      for (int k2 = -SB; k2 <= SB; ++k2) {
        if (k2 == 0 || (k1 + k2) == 0) continue;
        const int m = k - k1 - k2;
        if (m < -N || m > N) continue;
        if (m == 0 && !cf.e3_m0) continue;
        if ((k1 + m) == 0 || (k2 + m) == 0) continue;
        const double den = static_cast<double>(k1 + k2) * (k2 + m) * (k1 + m);
        acc += s1 * tb.S(k2) * Eph(tb, k2) * Eph(tb, m) * W(m) / den;
      }
    }
    out(k) = cf.E3 * acc * std::conj(Eph(tb, k));
  }
  return out;
}

}  // namespace

// ---- class surface ----------------------------------------------------------

std::string to_string(Convention c) {
  return c == Convention::closing ? "closing" : "reference";
}

NormalForm::NormalForm(Convention conv, double a, const FourierField& Phi, int band)
    : conv_(conv), a_(a), Phi_(Phi), N_(band) {
  if (band < 2) throw std::invalid_argument("NormalForm: band must be >= 2");
  if (Phi.N() < 0 || Phi.N() > band)
    throw std::invalid_argument("NormalForm: Phi band exceeds flow band (truncate first)");
  if (std::abs(Phi.mean()) > 1e-12 * (1.0 + Phi.max_abs()))
    throw std::invalid_argument("NormalForm: Phi must be mean-zero");
  if (!std::isfinite(a)) throw std::invalid_argument("NormalForm: bad wave mean");
}

NormalForm NormalForm::from_wave(Convention conv, const CnoidalWave& w, int band) {
  FourierField Phi = w.Phi();
  if (Phi.N() > band) Phi = Phi.truncated(band);
  return NormalForm(conv, w.mean, Phi, band);
}

FourierField NormalForm::S(double t) const {
  FourierField out(Phi_.N());
  for (int k = -Phi_.N(); k <= Phi_.N(); ++k) {
    if (k == 0) continue;
    out(k) = Phi_(k) * std::polar(1.0, -psi(k) * t);
  }
  return out;
}

FourierField NormalForm::v_from_kdv_state(const FourierField& q, double t) const {
  if (q.N() != N_)
    throw std::invalid_argument("v_from_kdv_state: state band != flow band");
  FourierField v(N_);
  for (int k = -N_; k <= N_; ++k) {
    if (k == 0) continue;
    v(k) = (q(k) - Phi_.get(k)) * std::polar(1.0, -psi(k) * t);
  }
  return v;
}

FourierField NormalForm::v_from_perturbation(const FourierField& u, double t) const {
  if (u.N() != N_)
    throw std::invalid_argument("v_from_perturbation: band != flow band");
  if (std::abs(u.mean()) > 1e-12 * (1.0 + u.max_abs()))
    throw std::invalid_argument("v_from_perturbation: u must be mean-zero");
  FourierField v(N_);
  for (int k = -N_; k <= N_; ++k) {
    if (k == 0) continue;
    v(k) = u(k) * std::polar(1.0, -psi(k) * t);
  }
  return v;
}

FourierField NormalForm::veq_rhs(const FourierField& v, double t) const {
  if (v.N() != N_) throw std::invalid_argument("veq_rhs: band mismatch");
  const Tb tb = make_tb(*this, t);
  FourierField X = v;  // v + 2S
  for (int j = -Phi_.N(); j <= Phi_.N(); ++j) X(j) += 2.0 * tb.S(j);
  FourierField out(N_);
  for (int k = -N_; k <= N_; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -N_; k1 <= N_; ++k1) {
      if (k1 == 0) continue;
      const int k2 = k - k1;
      if (k2 == 0 || k2 < -N_ || k2 > N_) continue;
      acc += Eph(tb, k1) * Eph(tb, k2) * X(k1) * v(k2);
    }
    out(k) = -(kI * (0.5 * k)) * acc * std::conj(Eph(tb, k));
  }
  return out;
}

FourierField NormalForm::l1v_rhs(const FourierField& v, double t) const {
  if (v.N() != N_) throw std::invalid_argument("l1v_rhs: band mismatch");
  const Tb tb = make_tb(*this, t);
  return cubic_sum(tb, tb.S, tb.S, v, 2.0 * kI / 3.0,
                   [](int k1, int, int) { return 1.0 / k1; },
                   [](int, int, int) { return true; });
}

#define KNF_APPLY(NAME, CALL)                                               \
  FourierField NormalForm::NAME(const FourierField& v, double t) const {   \
    if (v.N() != N_) throw std::invalid_argument(#NAME ": band mismatch"); \
    const Tb tb = make_tb(*this, t);                                        \
    const Coefs cf = coefs(conv_);                                          \
    (void)cf;                                                               \
    return CALL;                                                            \
  }

KNF_APPLY(apply_K, impl_K(tb, v))
KNF_APPLY(apply_B1, impl_B1(tb, v))
KNF_APPLY(apply_B2, impl_B2(tb, v, cf))
KNF_APPLY(apply_L0, impl_L0(tb, v, cf))
KNF_APPLY(apply_R11, impl_R11(v, conv_, cf))
KNF_APPLY(apply_R12, impl_R12(tb, v, cf))
KNF_APPLY(apply_R13, impl_R13(tb, v, cf))
KNF_APPLY(apply_R14, impl_R14(tb, v, cf))
KNF_APPLY(apply_R2, impl_R2(*this, tb, v, cf))
KNF_APPLY(apply_R3, impl_R3(tb, v, cf))
KNF_APPLY(apply_R4, impl_R4(*this, tb, v, cf))
KNF_APPLY(apply_R5, impl_R5(tb, v, cf))
KNF_APPLY(apply_R6, impl_R6(tb, v, cf))
KNF_APPLY(apply_D, impl_D(tb, v, cf))
KNF_APPLY(apply_E1, impl_E1(tb, v))
KNF_APPLY(apply_E2r, impl_E2r(tb, v))
KNF_APPLY(apply_E2, impl_E2(*this, tb, v, cf))
KNF_APPLY(apply_E3, impl_E3(tb, v, cf))
#undef KNF_APPLY

DbpTerms NormalForm::evaluate_dbp(const FourierField& v, double t) const {
  if (v.N() != N_) throw std::invalid_argument("evaluate_dbp: band mismatch");
  const Tb tb = make_tb(*this, t);
  const Coefs cf = coefs(conv_);
  DbpTerms o;
  o.K = impl_K(tb, v);
  o.B1 = impl_B1(tb, v);
  o.B2 = impl_B2(tb, v, cf);
  o.L0 = impl_L0(tb, v, cf);
  o.R11 = impl_R11(v, conv_, cf);
  o.R12 = impl_R12(tb, v, cf);
  o.R13 = impl_R13(tb, v, cf);
  o.R14 = impl_R14(tb, v, cf);
  o.R2 = impl_R2(*this, tb, v, cf);
  o.R3 = impl_R3(tb, v, cf);
  o.R4 = impl_R4(*this, tb, v, cf);
  o.R5 = impl_R5(tb, v, cf);
  o.R6 = impl_R6(tb, v, cf);
  return o;
}

DeTerms NormalForm::evaluate_de(const FourierField& v, double t) const {
  if (v.N() != N_) throw std::invalid_argument("evaluate_de: band mismatch");
  const Tb tb = make_tb(*this, t);
  const Coefs cf = coefs(conv_);
  DeTerms o;
  o.D = impl_D(tb, v, cf);
  o.E1 = impl_E1(tb, v);
  o.E2r = impl_E2r(tb, v);
  o.E2 = impl_E2(*this, tb, v, cf);
  o.E3 = impl_E3(tb, v, cf);
  return o;
}

FourierField DbpTerms::R_total() const {
  FourierField out = R11;
  out += R12;
  out += R13;
  out += R14;
  out += R2;
  out += R3;
  out += R4;
  out += R5;
  out += R6;
  return out;
}

FourierField DbpTerms::rhs_total() const {
  FourierField out = L0;
  out += R_total();
  return out;
}

FourierField DeTerms::E_total() const {
  FourierField out = E1;
  out += E2r;
  out += E2;
  out += E3;
  return out;
}

// ---- exact chain-rule derivatives -------------------------------------------
// d/dt e2 = -3i k k1 k2 e2 (on k1+k2 = k), d/dt e3 = -3i Dtilde e3 (on
// k1+k2+k3 = k), dS/dt = -i psi S, and vdot is the flow's own rhs.

FourierField NormalForm::ddt_K(const FourierField& v, const FourierField& vdot,
                               double t) const {
  const Tb tb = make_tb(*this, t);
  const int SB = Phi_.N();
  FourierField out(N_);
  for (int k = -N_; k <= N_; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -SB; k1 <= SB; ++k1) {
      if (k1 == 0) continue;
      const int k2 = k - k1;
      if (k2 == 0 || k2 < -N_ || k2 > N_) continue;
      const cplx e2 = Eph(tb, k1) * Eph(tb, k2);
      const double kk = static_cast<double>(k) * k1 * k2;
      const cplx term = (-3.0 * kI * kk - kI * psi(k1)) * tb.S(k1) * v(k2) +
                        tb.S(k1) * vdot(k2);
      acc += e2 * term / (static_cast<double>(k1) * k2);
    }
    out(k) = (-1.0 / 3.0) * acc * std::conj(Eph(tb, k));
  }
  return out;
}

FourierField NormalForm::ddt_B1(const FourierField& v, const FourierField& vdot,
                                double t) const {
  const Tb tb = make_tb(*this, t);
  FourierField out(N_);
  for (int k = -N_; k <= N_; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -N_; k1 <= N_; ++k1) {
      if (k1 == 0) continue;
      const int k2 = k - k1;
      if (k2 == 0 || k2 < -N_ || k2 > N_) continue;
      const cplx e2 = Eph(tb, k1) * Eph(tb, k2);
      const double kk = static_cast<double>(k) * k1 * k2;
      const cplx term = -3.0 * kI * kk * v(k1) * v(k2) + vdot(k1) * v(k2) +
                        v(k1) * vdot(k2);
      acc += e2 * term / (static_cast<double>(k1) * k2);
    }
    out(k) = (-1.0 / 6.0) * acc * std::conj(Eph(tb, k));
  }
  return out;
}

FourierField NormalForm::ddt_B2(const FourierField& v, const FourierField& vdot,
                                double t) const {
  const Tb tb = make_tb(*this, t);
  const Coefs cf = coefs(conv_);
  FourierField out(N_);
  for (int k = -N_; k <= N_; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -N_; k1 <= N_; ++k1) {
      if (k1 == 0) continue;
      for (int k2 = -N_; k2 <= N_; ++k2) {
        if (k2 == 0) continue;
        const int k3 = k - k1 - k2;
        if (k3 == 0 || k3 < -N_ || k3 > N_) continue;
        if (!star3(k1, k2, k3) || !cap_pair(k2, k3, N_)) continue;
        const double dt3 = dtilde(k1, k2, k3);
        const cplx e3 = Eph(tb, k1) * Eph(tb, k2) * Eph(tb, k3);
        const cplx slot1 = v(k1) + tb.S.get(k1);
        const cplx slot1dot = vdot(k1) - kI * psi(k1) * tb.S.get(k1);
        const cplx term = -3.0 * kI * dt3 * slot1 * v(k2) * v(k3) +
                          slot1dot * v(k2) * v(k3) + slot1 * vdot(k2) * v(k3) +
                          slot1 * v(k2) * vdot(k3);
        acc += e3 * term / (k1 * dt3);
      }
    }
    out(k) = cf.B2 * acc * std::conj(Eph(tb, k));
  }
  return out;
}

FourierField NormalForm::ddt_D(const FourierField& v, const FourierField& vdot,
                               double t) const {
  const Tb tb = make_tb(*this, t);
  const Coefs cf = coefs(conv_);
  const int SB = Phi_.N();
  FourierField out(N_);
  for (int k = -N_; k <= N_; ++k) {
    if (k == 0) continue;
    cplx acc(0.0, 0.0);
    for (int k1 = -SB; k1 <= SB; ++k1) {
      if (k1 == 0) continue;
      for (int k2 = -SB; k2 <= SB; ++k2) {
        if (k2 == 0) continue;
        const int k3 = k - k1 - k2;
        if (k3 == 0 || k3 < -N_ || k3 > N_) continue;
        if (!star3(k1, k2, k3)) continue;
        const double dt3 = dtilde(k1, k2, k3);
        const cplx e3 = Eph(tb, k1) * Eph(tb, k2) * Eph(tb, k3);
        const cplx ss = tb.S(k1) * tb.S(k2);
        const cplx term = (-3.0 * kI * dt3 - kI * (psi(k1) + psi(k2))) * ss * v(k3) +
                          ss * vdot(k3);
        acc += e3 * term / (k1 * dt3);
      }
    }
    out(k) = cf.D * acc * std::conj(Eph(tb, k));
  }
  return out;
}

// ---- closure oracles ---------------------------------------------------------

OracleReport oracle_dbp(const NormalForm& nf, const FourierField& v, double t) {
  const FourierField vdot = nf.veq_rhs(v, t);
  FourierField lhs = vdot;
  lhs += nf.ddt_K(v, vdot, t);
  lhs += nf.ddt_B1(v, vdot, t);
  lhs += nf.ddt_B2(v, vdot, t);
  const FourierField rhs = nf.evaluate_dbp(v, t).rhs_total();
  OracleReport rep;
  rep.residual_abs = l2_norm(lhs - rhs);
  rep.scale = std::max(l2_norm(lhs), l2_norm(rhs));
  rep.residual_rel = rep.residual_abs / (rep.scale > 0.0 ? rep.scale : 1.0);
  return rep;
}

OracleReport oracle_de(const NormalForm& nf, const FourierField& v, double t) {
  const FourierField vdot = nf.l1v_rhs(v, t);
  FourierField lhs = vdot;
  lhs += nf.ddt_D(v, vdot, t);
  const FourierField rhs = nf.evaluate_de(v, t).E_total();
  OracleReport rep;
  rep.residual_abs = l2_norm(lhs - rhs);
  rep.scale = std::max(l2_norm(lhs), l2_norm(rhs));
  rep.residual_rel = rep.residual_abs / (rep.scale > 0.0 ? rep.scale : 1.0);
  return rep;
}

// ---- finite-difference verification ------------------------------------------

namespace {

int find_time(const std::vector<double>& times, double t) {
  for (size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
  return -1;
}

enum class Identity { dbp, de };

FourierField fd_X(const NormalForm& nf, const Trajectory& traj, Identity id,
                  int idx) {
  const double t = traj.times[static_cast<size_t>(idx)];
  const FourierField& st = traj.states[static_cast<size_t>(idx)];
  if (id == Identity::dbp) {
    const FourierField v = nf.v_from_kdv_state(st, t);
    FourierField X = v;
    X += nf.apply_K(v, t);
    X += nf.apply_B1(v, t);
    X += nf.apply_B2(v, t);
    return X;
  }
  const FourierField v = nf.v_from_perturbation(st, t);
  FourierField X = v;
  X += nf.apply_D(v, t);
  return X;
}

FourierField fd_rhs(const NormalForm& nf, const Trajectory& traj, Identity id,
                    int idx) {
  const double t = traj.times[static_cast<size_t>(idx)];
  const FourierField& st = traj.states[static_cast<size_t>(idx)];
  if (id == Identity::dbp) {
    const FourierField v = nf.v_from_kdv_state(st, t);
    return nf.evaluate_dbp(v, t).rhs_total();
  }
  const FourierField v = nf.v_from_perturbation(st, t);
  return nf.evaluate_de(v, t).E_total();
}

FdSweep fd_sweep(const Trajectory& traj, const NormalForm& nf, Identity id,
                 double t0, const std::vector<double>& h_list) {
  const int i0 = find_time(traj.times, t0);
  if (i0 < 0) throw std::invalid_argument("fd sweep: t0 is not a stored sample");
  const FourierField rhs = fd_rhs(nf, traj, id, i0);
  const double nr = l2_norm(rhs);
  FdSweep sweep;
  std::vector<double> lx, ly;
  for (double h : h_list) {
    const int ip = find_time(traj.times, t0 + h);
    const int im = find_time(traj.times, t0 - h);
    if (ip < 0 || im < 0)
      throw std::invalid_argument("fd sweep: t0 +- h is not a stored sample");
    FourierField diff = fd_X(nf, traj, id, ip);
    diff -= fd_X(nf, traj, id, im);
    diff *= 1.0 / (2.0 * h);
    diff -= rhs;
    FdPoint pt;
    pt.h = h;
    pt.residual_rel = l2_norm(diff) / (nr > 0.0 ? nr : 1.0);
    sweep.points.push_back(pt);
    if (pt.residual_rel > 0.0) {
      lx.push_back(std::log(h));
      ly.push_back(std::log(pt.residual_rel));
    }
  }
  if (lx.size() >= 2) sweep.loglog = fit_line(lx, ly);
  return sweep;
}

std::vector<std::pair<double, double>> fd_series(const Trajectory& traj,
                                                 const NormalForm& nf, Identity id,
                                                 double h) {
  std::vector<std::pair<double, double>> out;
  for (size_t i = 0; i < traj.times.size(); ++i) {
    const double t = traj.times[i];
    const int ip = find_time(traj.times, t + h);
    const int im = find_time(traj.times, t - h);
    if (ip < 0 || im < 0) continue;
    const FourierField rhs = fd_rhs(nf, traj, id, static_cast<int>(i));
    const double nr = l2_norm(rhs);
    FourierField diff = fd_X(nf, traj, id, ip);
    diff -= fd_X(nf, traj, id, im);
    diff *= 1.0 / (2.0 * h);
    diff -= rhs;
    out.emplace_back(t, l2_norm(diff) / (nr > 0.0 ? nr : 1.0));
  }
  return out;
}

}  // namespace

FdSweep verify_dbp_identity(const Trajectory& traj, const NormalForm& nf,
                            double t0, const std::vector<double>& h_list) {
  return fd_sweep(traj, nf, Identity::dbp, t0, h_list);
}

FdSweep verify_de_identity(const Trajectory& traj, const NormalForm& nf,
                           double t0, const std::vector<double>& h_list) {
  return fd_sweep(traj, nf, Identity::de, t0, h_list);
}

std::vector<std::pair<double, double>> fd_dbp_residuals(const Trajectory& traj,
                                                        const NormalForm& nf,
                                                        double h) {
  return fd_series(traj, nf, Identity::dbp, h);
}

std::vector<std::pair<double, double>> fd_de_residuals(const Trajectory& traj,
                                                       const NormalForm& nf,
                                                       double h) {
  return fd_series(traj, nf, Identity::de, h);
}

// ---- literal small-band implementations --------------------------------------

namespace literal {

FourierField apply_B2(const NormalForm& nf, const FourierField& v, double t) {
  const int N = nf.band();
  if (N > 24) throw std::invalid_argument("literal B2: band too large (<= 24)");
  const Tb tb = make_tb(nf, t);
  const Coefs cf = coefs(nf.convention());
  FourierField out(N);
  for (int k1 = -N; k1 <= N; ++k1) {
    if (k1 == 0) continue;
    for (int k2 = -N; k2 <= N; ++k2) {
      if (k2 == 0) continue;
      for (int k3 = -N; k3 <= N; ++k3) {
        if (k3 == 0 || !star3(k1, k2, k3) || !cap_pair(k2, k3, N)) continue;
        const int k = k1 + k2 + k3;
        if (k == 0 || k < -N || k > N) continue;
        const cplx e3 = Eph(tb, k1) * Eph(tb, k2) * Eph(tb, k3) * std::conj(Eph(tb, k));
        out(k) += cf.B2 * e3 * (v(k1) + tb.S.get(k1)) * v(k2) * v(k3) /
                  (k1 * dtilde(k1, k2, k3));
      }
    }
  }
  return out;
}

FourierField apply_R5(const NormalForm& nf, const FourierField& v, double t) {
  const int N = nf.band(), SB = nf.Phi().N();
  if (N > 12) throw std::invalid_argument("literal R5: band too large (<= 12)");
  const Tb tb = make_tb(nf, t);
  const Coefs cf = coefs(nf.convention());
  const double sg = cf.quartic_sign;
  FourierField out(N);
  for (int k1 = -SB; k1 <= SB; ++k1) {
    if (k1 == 0) continue;
    for (int k2 = -N; k2 <= N; ++k2) {
      if (k2 == 0) continue;
      for (int k3 = -N; k3 <= N; ++k3) {
        if (k3 == 0) continue;
        for (int k4 = -N; k4 <= N; ++k4) {
          if (k4 == 0) continue;
          const int m = k3 + k4;
          if (m == 0 || m < -N || m > N) continue;  // truncated-flow slot
          if ((k1 + k2) == 0 || (k1 + m) == 0 || (k2 + m) == 0) continue;
          if (!cap_pair(k2, m, N)) continue;  // pair cap inherited from B2
          const int k = k1 + k2 + k3 + k4;
          if (k == 0 || k < -N || k > N) continue;
          const cplx ph = Eps(tb, k1, sg) * Eps(tb, k2, sg) * Eps(tb, k3, sg) *
                          Eps(tb, k4, sg) * std::conj(Eps(tb, k, sg));
          const double den = static_cast<double>(k1) * (k1 + k2) * (k1 + m) * (k2 + m);
          out(k) += cf.R5 * ph * tb.S(k1) * v(k2) *
                    (v(k3) + 2.0 * tb.S.get(k3)) * v(k4) * (static_cast<double>(m) / den);
        }
      }
    }
  }
  return out;
}

FourierField apply_R6(const NormalForm& nf, const FourierField& v, double t) {
  const int N = nf.band();
  if (N > 12) throw std::invalid_argument("literal R6: band too large (<= 12)");
  const Tb tb = make_tb(nf, t);
  const Coefs cf = coefs(nf.convention());
  const double sg = cf.quartic_sign;
  FourierField out(N);
  for (int k1 = -N; k1 <= N; ++k1) {
    if (k1 == 0) continue;
    for (int k2 = -N; k2 <= N; ++k2) {
      if (k2 == 0) continue;
      for (int k3 = -N; k3 <= N; ++k3) {
        if (k3 == 0) continue;
        for (int k4 = -N; k4 <= N; ++k4) {
          if (k4 == 0) continue;
          const int m = k3 + k4;
          if (m < -N || m > N) continue;
          if (m == 0 && !cf.r6_m0) continue;
          if ((k1 + k2) == 0 || (k1 + m) == 0 || (k2 + m) == 0) continue;
          const int k = k1 + k2 + k3 + k4;
          if (k == 0 || k < -N || k > N) continue;
          double kern = 0.0;
          if (cap_pair(k1, k2, N))
            kern += 1.0 / (static_cast<double>(m + k1) * (k1 + k2) * (k2 + m));
          if (cap_pair(k2, m, N))
            kern += 2.0 * m /
                    (static_cast<double>(k1) * (k1 + k2) * (k1 + m) * (k2 + m));
          if (kern == 0.0) continue;
          const cplx ph = Eps(tb, k1, sg) * Eps(tb, k2, sg) * Eps(tb, k3, sg) *
                          Eps(tb, k4, sg) * std::conj(Eps(tb, k, sg));
          out(k) += cf.R6 * ph * v(k1) * v(k2) *
                    (v(k3) + 2.0 * tb.S.get(k3)) * v(k4) * kern;
        }
      }
    }
  }
  return out;
}

FourierField apply_E3(const NormalForm& nf, const FourierField& v, double t) {
  const int N = nf.band(), SB = nf.Phi().N();
  if (N > 8) throw std::invalid_argument("literal E3: band too large (<= 8)");
  const Tb tb = make_tb(nf, t);
  const Coefs cf = coefs(nf.convention());
  FourierField out(N);
  for (int k1 = -SB; k1 <= SB; ++k1) {
    if (k1 == 0) continue;
    for (int k2 = -SB; k2 <= SB; ++k2) {
      if (k2 == 0 || (k1 + k2) == 0) continue;
      for (int k3 = -SB; k3 <= SB; ++k3) {
        if (k3 == 0) continue;
        for (int k4 = -SB; k4 <= SB; ++k4) {
          if (k4 == 0) continue;
          for (int k5 = -N; k5 <= N; ++k5) {
            if (k5 == 0) continue;
            const int m = k3 + k4 + k5;
            if (m < -N || m > N) continue;  // truncated-flow slot
            if (m == 0 && !cf.e3_m0) continue;
            if ((k1 + m) == 0 || (k2 + m) == 0) continue;
            const int k = k1 + k2 + m;
            if (k == 0 || k < -N || k > N) continue;
            const cplx ph = Eph(tb, k1) * Eph(tb, k2) * Eph(tb, k3) * Eph(tb, k4) *
                            Eph(tb, k5) * std::conj(Eph(tb, k));
            const double den = static_cast<double>(k1) * k3 * (k1 + k2) * (k2 + m) * (k1 + m);
            out(k) += cf.E3 * ph * tb.S(k1) * tb.S(k2) * tb.S(k3) * tb.S(k4) *
                      v(k5) / den;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace literal

// ---- Fredholm report ----------------------------------------------------------

FredholmReport fredholm_report(const FourierField& Phi, double s, int N) {
  if (N < 2) throw std::invalid_argument("fredholm_report: N too small");
  if (s < 0.0 || s >= 1.0) throw std::invalid_argument("fredholm_report: s outside [0,1)");
  const int dim = 2 * N;
  auto mode = [N](int i) { return (i < N) ? (i - N) : (i - N + 1); };  // skip k = 0
  Eigen::MatrixXcd A(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const int k = mode(i);
    for (int j = 0; j < dim; ++j) {
      const int kp = mode(j);
      cplx val(0.0, 0.0);
      if (k != kp) {
        const cplx phikk = Phi.get(k - kp);
        if (phikk != cplx(0.0, 0.0)) {
          val = -phikk / (3.0 * static_cast<double>(k - kp) * kp);
          val *= std::pow(std::abs(static_cast<double>(k)), -s) *
                 std::pow(std::abs(static_cast<double>(kp)), s);
        }
      }
      A(i, j) = val;
    }
  }
  FredholmReport rep;
  rep.s = s;
  rep.N = N;
  rep.phi_l2 = l2_norm(Phi);
  rep.apriori_bound = 2.0 * rep.phi_l2;
  Eigen::MatrixXcd IA = Eigen::MatrixXcd::Identity(dim, dim) + A;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd_ia(IA);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd_a(A);
  rep.sigma_min = svd_ia.singularValues()(dim - 1);
  rep.sigma_max_A = svd_a.singularValues()(0);
  rep.resolvent_bound = rep.sigma_min > 0.0 ? 1.0 / rep.sigma_min : 0.0;
  return rep;
}

// ---- bound report -------------------------------------------------------------

FourierField random_test_field(int band, int law, std::uint64_t seed) {
  if (band < 2) throw std::invalid_argument("random_test_field: band too small");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  FourierField v(band);
  const int lo = (law % 3 == 1) ? std::max(1, band / 2) : 1;
  for (int k = lo; k <= band; ++k) {
    double mag = jitter(rng);
    if (law % 3 == 2) mag *= std::pow(static_cast<double>(k), -0.5);
    const cplx z = std::polar(mag, phase(rng));
    v(k) = z;
    v(-k) = std::conj(z);
  }
  const double n = l2_norm(v);
  v *= 1.0 / n;
  return v;
}

namespace {

// Schur-test constants for the quartic kernels: with the inner convolution
// bounded by |C_m| <= (1 + 2||S||_2) ||v||_2 (Cauchy-Schwarz) and one path
// slot carrying the |k|^s weight, (sum_p a g)^2 <= (sum_p a^2 g)(sum_p g)
// gives ||op||_2 <= coef (1+2||S||_2) sqrt(Gamma* Xi*) ||v||_{H^-s} where
// Gamma* = max_k sum_paths g and Xi* = max over the weighted slot of the dual
// sum.  Both are evaluated exactly on the truncated lattice.
struct SchurPair {
  double gamma = 0.0;
  double xi = 0.0;
};

SchurPair schur_R5(const FourierField& Phi, int N, double s) {
  const int SB = Phi.N();
  // g(k; k1, m) = |S_k1| |k2|^s |m| / |k1 (k1+k2)(k1+m)(k2+m)|, k2 = k-k1-m,
  // over the capped set |k2+m| <= N of the truncated operator.
  auto g = [&](int k1, int k2, int m) {
    return std::abs(Phi.get(k1)) * std::pow(std::abs(static_cast<double>(k2)), s) *
           std::abs(static_cast<double>(m)) /
           std::abs(static_cast<double>(k1) * (k1 + k2) * (k1 + m) * (k2 + m));
  };
  SchurPair out;
  for (int k = -N; k <= N; ++k) {  // Gamma*: sum over paths at fixed output k
    if (k == 0) continue;
    double acc = 0.0;
    for (int k1 = -SB; k1 <= SB; ++k1) {
      if (k1 == 0) continue;
      for (int m = -N; m <= N; ++m) {
        if (m == 0) continue;
        const int k2 = k - k1 - m;
        if (k2 == 0 || k2 < -N || k2 > N) continue;
        if ((k1 + k2) == 0 || (k1 + m) == 0 || (k2 + m) == 0) continue;
        if (!cap_pair(k2, m, N)) continue;
        acc += g(k1, k2, m);
      }
    }
    out.gamma = std::max(out.gamma, acc);
  }
  for (int k2 = -N; k2 <= N; ++k2) {  // Xi*: dual sum at fixed weighted slot k2
    if (k2 == 0) continue;
    double acc = 0.0;
    for (int k1 = -SB; k1 <= SB; ++k1) {
      if (k1 == 0) continue;
      for (int m = -N; m <= N; ++m) {
        if (m == 0) continue;
        const int k = k1 + k2 + m;
        if (k == 0 || k < -N || k > N) continue;
        if ((k1 + k2) == 0 || (k1 + m) == 0 || (k2 + m) == 0) continue;
        if (!cap_pair(k2, m, N)) continue;
        acc += g(k1, k2, m);
      }
    }
    out.xi = std::max(out.xi, acc);
  }
  return out;
}

SchurPair schur_R6(int N, double s) {
  // g majorizes the split kernel of the truncated R6 by the triangle
  // inequality: |k1|^s ([|k1+k2| <= N] / |(m+k1)(k1+k2)(k2+m)| +
  // [|k2+m| <= N] 2|m| / |k1 (k1+k2)(k1+m)(k2+m)|), k2 = k-k1-m; m = 0
  // included (the reference operator keeps that slice).
  auto g = [&](int k1, int k2, int m) {
    double kern = 0.0;
    if (cap_pair(k1, k2, N))
      kern += 1.0 / std::abs(static_cast<double>(m + k1) * (k1 + k2) * (k2 + m));
    if (cap_pair(k2, m, N))
      kern += 2.0 * std::abs(static_cast<double>(m)) /
              std::abs(static_cast<double>(k1) * (k1 + k2) * (k1 + m) * (k2 + m));
    return std::pow(std::abs(static_cast<double>(k1)), s) * kern;
  };
  SchurPair out;
  for (int k = -N; k <= N; ++k) {
    if (k == 0) continue;
    double acc = 0.0;
    for (int k1 = -N; k1 <= N; ++k1) {
      if (k1 == 0) continue;
      for (int m = -N; m <= N; ++m) {
        const int k2 = k - k1 - m;
        if (k2 == 0 || k2 < -N || k2 > N) continue;
        if ((k1 + k2) == 0 || (k1 + m) == 0 || (k2 + m) == 0) continue;
        acc += g(k1, k2, m);
      }
    }
    out.gamma = std::max(out.gamma, acc);
  }
  for (int k1 = -N; k1 <= N; ++k1) {
    if (k1 == 0) continue;
    double acc = 0.0;
    for (int k2 = -N; k2 <= N; ++k2) {
      if (k2 == 0) continue;
      for (int m = -N; m <= N; ++m) {
        const int k = k1 + k2 + m;
        if (k == 0 || k < -N || k > N) continue;
        if ((k1 + k2) == 0 || (k1 + m) == 0 || (k2 + m) == 0) continue;
        acc += g(k1, k2, m);
      }
    }
    out.xi = std::max(out.xi, acc);
  }
  return out;
}

}  // namespace

int BoundReport::total_violations() const {
  int n = 0;
  for (const auto& l : lines) n += l.violations;
  return n;
}

BoundReport bound_report(const NormalForm& nf, double s, int trials,
                         std::uint64_t seed) {
  if (nf.convention() != Convention::reference)
    throw std::invalid_argument("bound_report: constants are proved for the reference convention");
  if (!(s > 0.0 && s < 0.5))
    throw std::invalid_argument("bound_report: s must lie in (0, 1/2)");
  if (trials < 1) throw std::invalid_argument("bound_report: trials >= 1");

  const FourierField& Phi = nf.Phi();
  const int N = nf.band(), SB = Phi.N();

  // ||S||-norms (t-independent: |S_k(t)| = |Phi_k|).
  double nS1 = 0, nSk1 = 0, nS2sq = 0, nSk2sq = 0, nkS2sq = 0, nkS1 = 0;
  double npsiSk1 = 0, npsiS1 = 0, nS_s1m1 = 0, nS_s1 = 0;
  for (int k = -SB; k <= SB; ++k) {
    if (k == 0) continue;
    const double m = std::abs(Phi(k));
    const double ak = std::abs(static_cast<double>(k));
    nS1 += m;
    nSk1 += m / ak;
    nS2sq += m * m;
    nSk2sq += m * m / (ak * ak);
    nkS2sq += m * m * ak * ak;
    nkS1 += m * ak;
    npsiSk1 += std::abs(nf.psi(k)) * m / ak;
    npsiS1 += std::abs(nf.psi(k)) * m;
    nS_s1m1 += m * std::pow(ak, s - 1.0);
    nS_s1 += m * std::pow(ak, s);
  }
  const double nS2 = std::sqrt(nS2sq);
  const double cs = std::sqrt(2.0 * std::riemann_zeta(2.0 - 2.0 * s));
  const double sup_w = 1.0 + 2.0 * nS2;  // sup-bound for |v + 2S| slots, ||v||_2 = 1

  const SchurPair p5 = schur_R5(Phi, N, s);
  const SchurPair p6 = schur_R6(N, s);

  BoundReport rep;
  rep.s = s;
  rep.band = N;
  rep.trials = trials;
  auto add = [&rep](const std::string& name, double constant) {
    BoundLine l;
    l.name = name;
    l.constant = constant;
    rep.lines.push_back(l);
  };
  add("||K(v)||_2 <= (1/3)||S/k||_1 ||v/k||_2", nSk1 / 3.0);
  add("||L0(v)||_2 <= (2/3)||S/k||_1 ||S||_1 ||v||_2", (2.0 / 3.0) * nSk1 * nS1);
  add("||L0(v)||_-s <= (2/3) 3^s ||S|k|^{s-1}||_1 ||S|k|^s||_1 ||v||_-s",
      (2.0 / 3.0) * std::pow(3.0, s) * nS_s1m1 * nS_s1);
  add("||B1(v)||_2 <= (1/6) c(s) ||v||_-s^2", cs / 6.0);
  add("||B2(v)||_2 <= [(1/6)c(s)^2 + (2^{1+s}/9)||S|k|^s||_1 c(s)] ||v||_-s^2",
      cs * cs / 6.0 + std::pow(2.0, 1.0 + s) / 9.0 * nS_s1 * cs);
  add("||R11(v)||_2 <= (1/3) ||v||_2^3", 1.0 / 3.0);
  add("||R12(v)||_2 <= (1/3)||S||_2 ||v||_2^2", nS2 / 3.0);
  add("||R13(v)||_2 <= (2/3)||S||_2 ||v||_2 ||v/k||_2", (2.0 / 3.0) * nS2);
  add("||R14(v)||_2 <= (2/3)||S/k||_2 ||kS||_2 ||v/k||_2",
      (2.0 / 3.0) * std::sqrt(nSk2sq) * std::sqrt(nkS2sq));
  add("||R2(v)||_2 <= (1/3)||psi S/k||_1 ||v/k||_2", npsiSk1 / 3.0);
  add("||R3(v)||_2 <= (2/3) c(s) ||S||_1 ||v||_-s ||v||_2", (2.0 / 3.0) * cs * nS1);
  add("||R4(v)||_2 <= (1/6) c(s) ||psi S/k||_1 ||v||_-s ||v||_2",
      cs * npsiSk1 / 6.0);
  add("||R5(v)||_2 <= (1/9)(1+2||S||_2) sqrt(Gamma5 Xi5) ||v||_-s (Schur)",
      (1.0 / 9.0) * sup_w * std::sqrt(p5.gamma * p5.xi));
  add("||R6(v)||_2 <= (1/18)(1+2||S||_2) sqrt(Gamma6 Xi6) ||v||_-s (Schur)",
      (1.0 / 18.0) * sup_w * std::sqrt(p6.gamma * p6.xi));
  add("||D(v)||_2 <= (2/3)||S||_1^2 ||v/k||_2", (2.0 / 3.0) * nS1 * nS1);
  add("||E1(v)||_2 <= (2/3)||S||_2^2 ||v/k||_2", (2.0 / 3.0) * nS2sq);
  add("||E2r(v)||_2 <= (2/3)||S/k||_2 ||kS||_2 ||v/k||_2",
      (2.0 / 3.0) * std::sqrt(nSk2sq) * std::sqrt(nkS2sq));
  add("||E2(v)||_2 <= (4/3)||psi S||_1 ||S||_1 ||v/k||_2",
      (4.0 / 3.0) * npsiS1 * nS1);
  add("||E3(v)||_2 <= (16/9)||S||_1^3 ||kS||_1 ||v/k||_2",
      (16.0 / 9.0) * nS1 * nS1 * nS1 * nkS1);

  for (int trial = 0; trial < trials; ++trial) {
    const FourierField v = random_test_field(N, trial % 3, seed + static_cast<std::uint64_t>(trial));
    const double t = (trial % 2 == 0) ? 0.0 : 0.37;
    const double nv_k = sobolev_norm(v, 1.0, Sobolev::homogeneous);   // ||v/k||_2
    const double nv_s = sobolev_norm(v, s, Sobolev::homogeneous);     // ||v||_-s
    const DbpTerms db = nf.evaluate_dbp(v, t);
    const DeTerms de = nf.evaluate_de(v, t);
    const double measured[] = {
        l2_norm(db.K), l2_norm(db.L0), sobolev_norm(db.L0, s, Sobolev::homogeneous),
        l2_norm(db.B1), l2_norm(db.B2), l2_norm(db.R11), l2_norm(db.R12),
        l2_norm(db.R13), l2_norm(db.R14), l2_norm(db.R2), l2_norm(db.R3),
        l2_norm(db.R4), l2_norm(db.R5), l2_norm(db.R6), l2_norm(de.D),
        l2_norm(de.E1), l2_norm(de.E2r), l2_norm(de.E2), l2_norm(de.E3)};
    const double denom[] = {
        nv_k, 1.0, nv_s, nv_s * nv_s, nv_s * nv_s, 1.0, 1.0, nv_k, nv_k,
        nv_k, nv_s, nv_s, nv_s, nv_s, nv_k, nv_k, nv_k, nv_k, nv_k};
    for (size_t i = 0; i < rep.lines.size(); ++i) {
      BoundLine& l = rep.lines[i];
      const double ratio = measured[i] / denom[i];
      l.worst_ratio = std::max(l.worst_ratio, ratio);
      l.mean_ratio += ratio;
      l.trials += 1;
      if (ratio > l.constant * (1.0 + 1e-12)) l.violations += 1;
    }
  }
  for (auto& l : rep.lines)
    if (l.trials > 0) l.mean_ratio /= l.trials;
  return rep;
}

}  // namespace knf
