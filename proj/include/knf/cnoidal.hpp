// ============================================================================
// cnoidal.hpp -- construction and certification of 2*pi-periodic traveling
// waves of q_t + q_xxx + q_x q = 0.
//
// A wave q(x,t) = f(x - ct) satisfies f'' = a - c f - f^2/2 (a = integration
// constant), i.e. Newtonian motion f'' = -W'(f) in the cubic potential
// W(f) = f^3/6 + c f^2/2 - a f.  For c^2 + 2a > 0 the center sits at
// f_plus = -c + sqrt(c^2+2a) with linearized period T0 = 2*pi/(c^2+2a)^{1/4};
// orbits on the right of the center have energy E = W(f0) (f0 = right turning
// point) and factorize as
//     (f')^2 = -(1/3)(f - b1)(f - b2)(f - b3),   b1 <= b2 <= f <= b3 = f0,
// with b1+b2+b3 = -3c and b1 b2 + b1 b3 + b2 b3 = -6a.  Closed form:
//     f(z) = b2 + (b3 - b2) cn^2(alpha z; m),
//     alpha = sqrt((b3-b1)/12),  m = (b3-b2)/(b3-b1),  period 2 K(m)/alpha.
// The period map f0 -> T(f0) increases from T0 to infinity (separatrix), so
// when T0 < 2*pi there is exactly one 2*pi-periodic wave in the family;
// build_cnoidal locates it by bracketing bisection plus a Newton polish and
// certifies the result by evaluating the ODE residual spectrally.
// ============================================================================
#pragma once

#include <string>

#include "knf/fourier_field.hpp"

namespace knf {

double potential_W(double a, double c, double f);    // W(f)
double potential_Wp(double a, double c, double f);   // W'(f)

struct PotentialData {
  double f_minus;  // local max of W (saddle of the flow)
  double f_plus;   // local min of W (center)
  double T0;       // linearized period at the center
};
// Throws if c^2 + 2a <= 0 (no center, no wave family).
PotentialData potential_data(double a, double c);

struct OrbitRoots {
  double b1, b2, b3;  // ascending roots of 2(E - W), b3 = f0
  double m, alpha;    // cn-form parameters
};
// Turning-point factorization of the orbit through (f0, 0), f_plus < f0 < separatrix.
OrbitRoots orbit_roots(double a, double c, double f0);

enum class PeriodMethod {
  quadrature,  // 4 sqrt(3) K(m) / sqrt(b3 - b1)
  ode,         // integrate f'' = -W'(f) and detect the return to the section f' = 0
};
double orbit_period(double a, double c, double f0,
                    PeriodMethod method = PeriodMethod::quadrature);

struct CnoidalWave {
  double a = 0.0, c = 0.0;
  double f0 = 0.0;     // wave maximum (right turning point)
  OrbitRoots roots{};
  double mean = 0.0;   // <phi> (Fourier mode 0)
  FourierField phi;    // the wave; Hermitian, band chosen from coefficient decay

  // certification, evaluated spectrally on the built coefficients:
  double residual_sup = 0.0;   // sup |a - c phi - phi^2/2 - phi''|
  double residual3_sup = 0.0;  // sup |phi''' + phi phi' + c phi'|
  double period_error = 0.0;   // |T(f0) - 2 pi|
  double decay_amp = 0.0;      // fit |phi_k| ~ decay_amp * exp(-decay_rate * k)
  double decay_rate = 0.0;
  double build_seconds = 0.0;

  FourierField Phi() const;    // mean-zero part phi - <phi>
};

// Locate and certify the 2*pi-periodic wave with parameters (a, c).
// tol controls the period root polish; n_modes = 0 picks the band
// automatically from the coefficient decay floor.
CnoidalWave build_cnoidal(double a, double c, double tol = 1e-12, int n_modes = 0);

// Direct construction from prescribed turning points via the cn^2 closed form
// (speed and integration constant are implied: c = -(b1+b2+b3)/3,
// a = -(b1 b2 + b1 b3 + b2 b3)/6).  The certification residual is meaningful
// only when the roots are 2*pi-compatible (2 K(m)/alpha = 2*pi); otherwise the
// wrap-around discontinuity shows up honestly as a large residual.
CnoidalWave cnoidal_from_roots(double b1, double b2, double b3, int n_modes = 0);

nlohmann::json wave_to_json(const CnoidalWave& w);
CnoidalWave wave_from_json(const nlohmann::json& j);
void save_wave(const CnoidalWave& w, const std::string& path);
CnoidalWave load_wave(const std::string& path);

}  // namespace knf
