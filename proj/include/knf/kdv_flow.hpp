// ============================================================================
// kdv_flow.hpp -- nonlinear KdV evolution and the two linear semigroups.
//
// Equation and conventions:
//   q_t + q_xxx + q q_x = 0 on the 2pi-periodic circle, coefficients
//   q_k = (1/2pi) int q e^{-ikx} dx.  The mean a = q_0 is conserved; writing
//   q = a + p (p the mean-zero part) and folding the transport a q_x into the
//   linear phase gives
//       d/dt q_k = i psi_a(k) q_k - (ik/2) (p^2)_k,   psi_a(k) = k^3 - a k.
//   The solver steps the integrating-factor variables v_k = q_k e^{-i psi_a t}
//   with classical RK4; the linear (stiff) part is integrated exactly, so the
//   time-step limit is the nonlinear CFL dt <~ 2.8 / (N max|q|), not 1/N^3.
//
// Mode 0 of the right-hand side vanishes identically, so momentum (the mean)
// is conserved bitwise.  The quadratic term is evaluated pointwise on a padded
// grid: with M >= 3N+1 points the band-N part of the product is exactly the
// truncated convolution (no aliasing).
//
// Linear flows:
//   airy_flow:      e^{tL} with L = -d^3/dx^3 - a d/dx, diagonal phases
//                   e^{i psi_a(k) t}.
//   modified_flow:  e^{tL1} with L1 = L + P, where P u = proj_{mean 0}(G u)
//                   and G = -(2/3) Phi * antiderivative(Phi); equivalently
//                   (P u)_k = (2i/3) sum_{k1+k2+k3=k} (Phi_{k1}/k1) Phi_{k2} u_{k3}.
//
// Galilean symmetry: if q solves the equation above, so does
//   q~(t,x) = q(t, x - ct) + c,   i.e.  q~_k(t) = q_k(t) e^{-ikct} (+c at k=0).
// (Derivation: d/dt q~ = q_t - c q_x, q~ q~_x = (q+c) q_x, third derivative
// unchanged; the extra terms cancel.)
// ============================================================================
#pragma once

#include <string>
#include <vector>

#include "knf/fourier_field.hpp"

namespace knf {

enum class Dealias {
  pad32,       // zero-pad to >= 3N+1 points: alias-free (default, certified)
  truncate23,  // minimal 2N+1-point grid, product truncated: aliased baseline
};

struct SolverConfig {
  int N = 64;           // retained band |k| <= N
  double dt = 1e-4;     // must divide T to ~1e-9 relative
  double T = 1.0;
  Dealias dealias = Dealias::pad32;
  int monitor_every = 0;      // conservation sampling stride; 0 = steps/256
  int store_every = 0;        // state storage stride; 0 = initial+final only
  double blowup_factor = 10.0;
};

struct ConservationSample {
  double t = 0.0;
  double momentum = 0.0;  // mode-0 coefficient (the mean); conserved bitwise
  double l2sq = 0.0;      // sum_k |q_k|^2  (the L^2 invariant, mode 0 included)
  double energy = 0.0;    // evolve_kdv: sum k^2|q_k|^2/2 - (1/6)(1/2pi) int q^3
                          // modified_flow: sum (1+k^2)|u_k|^2  (H^1 norm^2)
};

struct Trajectory {
  SolverConfig cfg;
  double a = 0.0;  // conserved mean (mode 0)
  std::vector<double> times;
  std::vector<FourierField> states;
  std::vector<ConservationSample> conservation;
  bool aborted = false;

  // State stored at time t (matched to 1e-9 absolute+relative); throws if absent.
  const FourierField& state_at(double t) const;

  void save(const std::string& dir) const;
  static Trajectory load(const std::string& dir);
};

double momentum_l2sq(const FourierField& q);
double kdv_energy(const FourierField& q);

Trajectory evolve_kdv(const FourierField& q0, const SolverConfig& cfg);

// q(t,x) -> q(t, x - ct) + c applied to one stored state at its time t.
FourierField galilean_shift_state(const FourierField& q, double c, double t);
// Same shift applied to every stored state of a trajectory.
Trajectory galilean_shift(const Trajectory& traj, double c);

// e^{tL} g with L = -d^3 - a d:  g_k e^{i (k^3 - a k) t}.
FourierField airy_flow(const FourierField& g, double t, double a);

// Fourier coefficients of G = -(2/3) Phi * antiderivative(Phi), band 2*N_Phi.
FourierField build_G(const FourierField& Phi);

// (P u)_k = (2i/3) ((Phi/k) * Phi * u)_k for k != 0, 0 at k = 0; output band = u band.
FourierField apply_P(const FourierField& u, const FourierField& Phi);
// Fast path with G = build_G(Phi) precomputed: P u = truncated convolution G*u, mode 0 zeroed.
FourierField apply_P_G(const FourierField& G, const FourierField& u);

enum class ModifiedRoute {
  integrating_factor,  // Lawson RK4 on v_k = u_k e^{-i psi t}; P via padded grid (production)
  grid_direct,         // RK4 on u with explicit i psi u + pointwise G u (stiff: dt <~ 2.8/N^3)
  spectral_vspace,     // literal phased triple sum (2i/3) sum e3 (S1/k1) S2 v3
};

// u_t = L1 u from u(0) = g (mean-zero), with a = wave mean and Phi = wave profile.
Trajectory modified_flow(const FourierField& g, double a, const FourierField& Phi,
                         const SolverConfig& cfg,
                         ModifiedRoute route = ModifiedRoute::integrating_factor);

}  // namespace knf
