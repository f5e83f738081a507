#include "knf/cnoidal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "knf/common.hpp"
#include "knf/elliptic.hpp"
#include "knf/fft_grid.hpp"

namespace knf {

double potential_W(double a, double c, double f) {
  return f * f * f / 6.0 + 0.5 * c * f * f - a * f;
}

double potential_Wp(double a, double c, double f) { return 0.5 * f * f + c * f - a; }

PotentialData potential_data(double a, double c) {
  const double disc = c * c + 2.0 * a;
  if (disc <= 0.0)
    throw std::invalid_argument("potential_data: c^2 + 2a <= 0, no center");
  const double r = std::sqrt(disc);
  PotentialData pd;
  pd.f_minus = -c - r;
  pd.f_plus = -c + r;
  pd.T0 = kTwoPi / std::sqrt(r);  // W''(f_plus) = f_plus + c = r
  return pd;
}

// ---------------------------------------------------------------------------
// Fixed-step Gragg-Bulirsch-Stoer integration of f'' = a - c f - f^2/2.
// Modified midpoint with substep counts {2,4,6,8} extrapolated to zero step
// (even h^2 expansion), giving an 8th-order explicit one-step method.
// ---------------------------------------------------------------------------
namespace {

struct State2 {
  double f, fp;
};

inline State2 ode_rhs(double a, double c, const State2& s) {
  return {s.fp, a - c * s.f - 0.5 * s.f * s.f};
}

State2 mod_midpoint(double a, double c, State2 y, double H, int n) {
  const double h = H / n;
  State2 zm1 = y;
  State2 d = ode_rhs(a, c, zm1);
  State2 zm{zm1.f + h * d.f, zm1.fp + h * d.fp};
  for (int i = 1; i < n; ++i) {
    d = ode_rhs(a, c, zm);
    const State2 zn{zm1.f + 2.0 * h * d.f, zm1.fp + 2.0 * h * d.fp};
    zm1 = zm;
    zm = zn;
  }
  d = ode_rhs(a, c, zm);
  return {0.5 * (zm.f + zm1.f + h * d.f), 0.5 * (zm.fp + zm1.fp + h * d.fp)};
}

State2 gbs_step(double a, double c, const State2& y, double H) {
  constexpr int seq[4] = {2, 4, 6, 8};
  State2 T[4];
  double x[4];
  for (int i = 0; i < 4; ++i) {
    T[i] = mod_midpoint(a, c, y, H, seq[i]);
    x[i] = 1.0 / (double(seq[i]) * seq[i]);
  }
  // Neville extrapolation of the h^2 expansion to h^2 = 0
  for (int j = 1; j < 4; ++j)
    for (int i = 3; i >= j; --i) {
      const double w = x[i] / (x[i - j] - x[i]);
      T[i].f += (T[i].f - T[i - 1].f) * w;
      T[i].fp += (T[i].fp - T[i - 1].fp) * w;
    }
  return T[3];
}

constexpr int kOdeSteps = 4096;           // fixed macro-step count over [0, 2*pi]
constexpr double kOdeH = kTwoPi / kOdeSteps;

// Locate tau in [0, H] with fp(tau) = 0 along the step starting at y;
// bisection bracket followed by a Newton polish (fp' = a - c f - f^2/2).
double refine_fp_zero(double a, double c, const State2& y, double H) {
  double lo = 0.0, hi = H;
  auto fp_at = [&](double tau) { return tau == 0.0 ? y.fp : gbs_step(a, c, y, tau).fp; };
  double flo = y.fp;
  for (int it = 0; it < 24; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = fp_at(mid);
    if ((fm >= 0.0) == (flo >= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  double tau = 0.5 * (lo + hi);
  for (int it = 0; it < 6; ++it) {
    const State2 s = tau == 0.0 ? y : gbs_step(a, c, y, tau);
    const double g = s.fp;
    const double gp = a - c * s.f - 0.5 * s.f * s.f;
    if (gp == 0.0) break;
    const double step = g / gp;
    tau -= step;
    tau = std::clamp(tau, 0.0, H);
    if (std::abs(step) < 1e-17 * std::max(1.0, tau)) break;
  }
  return tau;
}

double ode_period(double a, double c, double f0) {
  const PotentialData pd = potential_data(a, c);
  State2 y{f0, 0.0};
  double t = 0.0;
  int crossings = 0;
  for (int i = 0; i < 4 * kOdeSteps; ++i) {
    const State2 yn = gbs_step(a, c, y, kOdeH);
    const bool crossed = (y.fp < 0.0 && yn.fp >= 0.0) || (y.fp > 0.0 && yn.fp <= 0.0);
    if (crossed) {
      ++crossings;
      if (crossings == 2) {
        // second return to the section f' = 0: full period (right turning point)
        if (yn.f <= pd.f_plus)
          throw std::runtime_error("ode_period: unexpected section geometry");
        return t + refine_fp_zero(a, c, y, kOdeH);
      }
    }
    y = yn;
    t += kOdeH;
  }
  throw std::runtime_error("ode_period: no return within 8*pi (orbit too slow?)");
}

}  // namespace

OrbitRoots orbit_roots(double a, double c, double f0) {
  const PotentialData pd = potential_data(a, c);
  if (!(f0 > pd.f_plus))
    throw std::invalid_argument("orbit_roots: f0 must lie right of the center");
  // (f')^2 = -(1/3) P(f), P(f) = f^3 + 3c f^2 - 6a f - 6 W(f0), and P(f0) = 0
  // exactly by construction; deflate and solve the quadratic factor.
  const double p = 3.0 * c + f0;
  const double q = f0 * f0 + 3.0 * c * f0 - 6.0 * a;
  const double disc = p * p - 4.0 * q;
  if (disc < 0.0) throw std::invalid_argument("orbit_roots: complex turning points");
  const double sq = std::sqrt(disc);
  // stable quadratic roots of f^2 + p f + q
  const double r1 = (p >= 0.0) ? 0.5 * (-p - sq) : 0.5 * (-p + sq);
  const double r2 = (r1 != 0.0) ? q / r1 : -p - r1;
  double b[3] = {r1, r2, f0};
  std::sort(b, b + 3);
  OrbitRoots out;
  out.b1 = b[0];
  out.b2 = b[1];
  out.b3 = b[2];
  if (!(out.b3 == f0))
    throw std::runtime_error("orbit_roots: f0 is not the rightmost turning point");
  if (!(out.b3 > out.b2))
    throw std::invalid_argument("orbit_roots: degenerate orbit (b2 == b3)");
  out.m = (out.b3 - out.b2) / (out.b3 - out.b1);
  out.alpha = std::sqrt((out.b3 - out.b1) / 12.0);
  return out;
}

double orbit_period(double a, double c, double f0, PeriodMethod method) {
  if (method == PeriodMethod::ode) return ode_period(a, c, f0);
  const OrbitRoots r = orbit_roots(a, c, f0);
  return 2.0 * ellint_K(r.m) / r.alpha;
}

// ---------------------------------------------------------------------------
// Wave assembly helpers
// ---------------------------------------------------------------------------
namespace {

constexpr int kWaveGrid = 4096;

// Project grid samples to coefficients, pick the band from the decay floor,
// fit the exponential decay, and certify the ODE residual spectrally.
void finalize_wave(CnoidalWave& w, const std::vector<double>& samples, int n_modes) {
  // even symmetrization: the wave is even about its maximum at x = 0
  std::vector<double> sym(kWaveGrid);
  for (int j = 0; j < kWaveGrid; ++j)
    sym[j] = 0.5 * (samples[j] + samples[(kWaveGrid - j) % kWaveGrid]);

  Grid grid(kWaveGrid);
  FourierField full = grid.from_samples(sym, std::min(1024, kWaveGrid / 2 - 1));

  double maxabs = full.max_abs();
  int band = n_modes;
  if (band <= 0) {
    // Keep only genuinely decaying modes.  The sampled coefficients bottom out
    // on a rounding plateau (ODE-sampled waves: ~1e-13 relative); modes on the
    // plateau carry no information and their k^2/k^3 amplification would
    // dominate the spectral residual.  1e-13 relative sits above the plateau
    // and below the last resolvable decaying mode.
    band = 16;
    for (int k = full.N(); k >= 16; --k) {
      if (std::abs(full(k)) > 1e-13 * maxabs) {
        band = std::min(k + 2, full.N());
        break;
      }
    }
  }
  w.phi = full.truncated(band);
  w.phi.enforce_hermitian();
  w.mean = w.phi(0).real();

  // decay fit ln|phi_k| ~ ln A - sigma k over modes above the floor
  {
    std::vector<double> ks, ls;
    for (int k = 1; k <= w.phi.N(); ++k) {
      const double v = std::abs(w.phi(k));
      if (v > 1e-13 * maxabs) {
        ks.push_back(double(k));
        ls.push_back(std::log(v));
      }
    }
    if (ks.size() >= 3) {
      const LineFit fit = fit_line(ks, ls);
      w.decay_amp = std::exp(fit.intercept);
      w.decay_rate = -fit.slope;
    }
  }

  // spectral residual rho = a - c phi - phi^2/2 - phi'' on band 2N
  const int n = w.phi.N();
  FourierField phi2 = multiply_fields(w.phi, w.phi, 2 * n);
  FourierField rho(2 * n);
  for (int k = -2 * n; k <= 2 * n; ++k)
    rho(k) = -w.c * w.phi.get(k) - 0.5 * phi2(k) + double(k) * k * w.phi.get(k);
  rho(0) += w.a;
  Grid fine(next_fast_size(4 * n + 2));
  std::vector<double> rs = fine.to_samples(rho);
  double sup = 0.0;
  for (double v : rs) sup = std::max(sup, std::abs(v));
  w.residual_sup = sup;
  // third-order form phi''' + phi phi' + c phi' = -rho'
  std::vector<double> r3 = fine.to_samples(derivative(rho));
  sup = 0.0;
  for (double v : r3) sup = std::max(sup, std::abs(v));
  w.residual3_sup = sup;
}

}  // namespace

FourierField CnoidalWave::Phi() const {
  FourierField out = phi;
  out(0) = cplx(0.0, 0.0);
  return out;
}

CnoidalWave build_cnoidal(double a, double c, double tol, int n_modes) {
  Stopwatch timer;
  if (!(tol > 0.0)) throw std::invalid_argument("build_cnoidal: tol must be positive");
  const PotentialData pd = potential_data(a, c);
  if (!(pd.T0 < kTwoPi))
    throw std::invalid_argument(
        "build_cnoidal: linearized period >= 2*pi; no 2*pi-periodic wave in this family");
  const double f_sep = -c + 2.0 * std::sqrt(c * c + 2.0 * a);  // separatrix endpoint
  const double span = f_sep - pd.f_plus;

  auto period = [&](double f0) { return orbit_period(a, c, f0, PeriodMethod::quadrature); };

  // bracket the 2*pi level of the (increasing) period map
  double lo = pd.f_plus + 1e-8 * span;
  double hi = f_sep - 1e-13 * span;
  if (!(period(lo) < kTwoPi))
    lo = pd.f_plus + 1e-12 * span;  // extremely tight families
  if (!(period(lo) < kTwoPi) || !(period(hi) > kTwoPi))
    throw std::runtime_error("build_cnoidal: failed to bracket the period root");

  while (hi - lo > 1e-3 * span) {
    const double mid = 0.5 * (lo + hi);
    (period(mid) < kTwoPi ? lo : hi) = mid;
  }

  // Newton polish on g(f0) = T(f0) - 2*pi with a finite-difference derivative
  double f0 = 0.5 * (lo + hi);
  double g = period(f0) - kTwoPi;
  double best_f0 = f0, best_g = std::abs(g);
  const double hfd = 1e-7 * span;
  for (int it = 0; it < 60 && best_g > 1e-14; ++it) {
    const double gp = (period(std::min(f0 + hfd, hi)) - period(std::max(f0 - hfd, lo))) /
                      (std::min(f0 + hfd, hi) - std::max(f0 - hfd, lo));
    if (!(gp > 0.0)) break;
    double step = g / gp;
    f0 = std::clamp(f0 - step, lo, hi);
    g = period(f0) - kTwoPi;
    if (std::abs(g) < best_g) {
      best_g = std::abs(g);
      best_f0 = f0;
    } else if (std::abs(step) < 1e-17 * std::max(1.0, std::abs(f0))) {
      break;
    }
  }
  f0 = best_f0;

  CnoidalWave w;
  w.a = a;
  w.c = c;
  w.f0 = f0;
  w.roots = orbit_roots(a, c, f0);
  w.period_error = best_g;

  // sample the orbit over one spatial period with the fixed-step integrator
  std::vector<double> samples(kWaveGrid);
  State2 y{f0, 0.0};
  for (int j = 0; j < kWaveGrid; ++j) {
    samples[j] = y.f;
    y = gbs_step(a, c, y, kOdeH);
  }
  finalize_wave(w, samples, n_modes);
  w.build_seconds = timer.seconds();
  return w;
}

CnoidalWave cnoidal_from_roots(double b1, double b2, double b3, int n_modes) {
  Stopwatch timer;
  if (!(b1 <= b2 && b2 < b3))
    throw std::invalid_argument("cnoidal_from_roots: need b1 <= b2 < b3");
  CnoidalWave w;
  w.c = -(b1 + b2 + b3) / 3.0;
  w.a = -(b1 * b2 + b1 * b3 + b2 * b3) / 6.0;
  w.f0 = b3;
  w.roots.b1 = b1;
  w.roots.b2 = b2;
  w.roots.b3 = b3;
  w.roots.m = (b3 - b2) / (b3 - b1);
  w.roots.alpha = std::sqrt((b3 - b1) / 12.0);
  w.period_error = std::abs(2.0 * ellint_K(w.roots.m) / w.roots.alpha - kTwoPi);

  std::vector<double> samples(kWaveGrid);
  for (int j = 0; j < kWaveGrid; ++j) {
    const double cn = jacobi_cn(w.roots.alpha * (kTwoPi * j / kWaveGrid), w.roots.m);
    samples[j] = b2 + (b3 - b2) * cn * cn;
  }
  finalize_wave(w, samples, n_modes);
  w.build_seconds = timer.seconds();
  return w;
}

nlohmann::json wave_to_json(const CnoidalWave& w) {
  nlohmann::json j;
  j["a"] = w.a;
  j["c"] = w.c;
  j["f0"] = w.f0;
  j["mean"] = w.mean;
  j["roots"] = {w.roots.b1, w.roots.b2, w.roots.b3};
  j["m"] = w.roots.m;
  j["alpha"] = w.roots.alpha;
  j["residual_sup"] = w.residual_sup;
  j["residual3_sup"] = w.residual3_sup;
  j["period_error"] = w.period_error;
  j["decay_amp"] = w.decay_amp;
  j["decay_rate"] = w.decay_rate;
  j["build_seconds"] = w.build_seconds;
  j["phi"] = field_to_json(w.phi);
  return j;
}

CnoidalWave wave_from_json(const nlohmann::json& j) {
  CnoidalWave w;
  w.a = j.at("a").get<double>();
  w.c = j.at("c").get<double>();
  w.f0 = j.at("f0").get<double>();
  w.mean = j.at("mean").get<double>();
  w.roots.b1 = j.at("roots")[0].get<double>();
  w.roots.b2 = j.at("roots")[1].get<double>();
  w.roots.b3 = j.at("roots")[2].get<double>();
  w.roots.m = j.at("m").get<double>();
  w.roots.alpha = j.at("alpha").get<double>();
  w.residual_sup = j.at("residual_sup").get<double>();
  w.residual3_sup = j.at("residual3_sup").get<double>();
  w.period_error = j.at("period_error").get<double>();
  w.decay_amp = j.at("decay_amp").get<double>();
  w.decay_rate = j.at("decay_rate").get<double>();
  w.build_seconds = j.value("build_seconds", 0.0);
  w.phi = field_from_json(j.at("phi"));
  return w;
}

void save_wave(const CnoidalWave& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_wave: cannot open " + path);
  out << wave_to_json(w).dump(2) << "\n";
}

CnoidalWave load_wave(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_wave: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return wave_from_json(j);
}

}  // namespace knf
