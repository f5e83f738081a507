// ============================================================================
// harness.hpp -- experiment orchestration for the near-linear superposition
// property of perturbed traveling waves.
//
// The experiment: build a certified wave phi (mean a + mean-zero part Phi),
// draw high-frequency data g supported on N0 <= |k| <= 2N0 with unit l^2 norm
// (so its homogeneous H^{-s} norm eps ~ N0^{-s} is small), evolve the full KdV
// flow from q0 = phi + g, and compare the perturbation against two *linear*
// flows at the stored sample times:
//     err_L(t)  = || q(t) - phi - e^{tL}  g ||_2      (Airy flow)
//     err_L1(t) = || q(t) - phi - e^{tL1} g ||_2      (modified flow L1 = L+P)
//     gap(t)    = || e^{tL1} g - e^{tL} g ||_2
// The claim under test is err <= C1 e^{C2 t} eps with constants independent of
// eps; fit_growth extracts (C1, C2) from the sample series, and run_suite
// executes a (s, N0, seed, T) matrix and renders verdicts: eps-linearity of
// err_L(T)/eps across cells, stability of the fitted C2 across eps levels
// (for both err_L and gap), and gap(0) = 0 to rounding.
//
// For a moving wave (c != 0) the comparison applies the Galilean reduction:
// the (a, c) wave translates as f(x + ct), so the frame perturbation is
// q(x - ct, t) - phi(x), and the linear flows use the reduced drift a + c
// (the boost q(x - ct, t) + c brings the wave to rest).
//
// Solver floors: each record carries the floor measured from a g = 0
// companion run (pure wave under the same solver settings); fit samples at or
// below 10x that floor are excluded, and a fit with fewer than 4 usable
// samples is reported as vacuous (the bound holds trivially).
// ============================================================================
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "knf/cnoidal.hpp"
#include "knf/fourier_field.hpp"
#include "knf/kdv_flow.hpp"

namespace knf {

// Random high-frequency data: support N0 <= |k| <= 2N0, independent uniform
// phases with unit amplitudes, Hermitian-symmetrized, zero mean, rescaled to
// ||g||_2 = 1.  Returns (g on band N, eps = ||g||_{H^{-s} homogeneous}); the
// same seed reproduces g bit-for-bit.  Requires 2 N0 <= N.
std::pair<FourierField, double> generate_hf_data(int N0, double s,
                                                 std::uint64_t seed, int N);

struct ExperimentSpec {
  double s = 0.25;                // Sobolev index of the smallness norm
  int N0 = 16;                    // data band [N0, 2N0]
  std::uint64_t seed = 1;
  double wave_a = 8.0;            // potential parameters of the wave
  double wave_c = 0.0;            // wave speed (0 = stationary)
  double wave_tol = 1e-12;
  SolverConfig solver;            // N, dt, dealias; T/store/monitor are derived
  double T = 1.0;
  int samples = 16;               // stored sample intervals over [0, T]
  ModifiedRoute route = ModifiedRoute::integrating_factor;
  std::string out_dir;            // optional persistence; never serialized

  void validate() const;          // throws std::invalid_argument on violation
};

struct GrowthFit {
  double C1 = 0.0;   // exp(intercept) of the log-linear fit
  double C2 = 0.0;   // slope (growth rate)
  double rms = 0.0;  // rms residual of log(err/eps) about the fit
  int n_used = 0;    // samples above the 10x-floor cut
  bool vacuous = true;  // < 4 usable samples: bound vacuously satisfied
};

// Least-squares fit of log(err(t)/eps) against t over the samples with
// err > 10*floor.  eps must be positive; t and err must have equal sizes.
GrowthFit fit_growth(const std::vector<double>& t,
                     const std::vector<double>& err, double eps, double floor);

struct ExperimentRecord {
  ExperimentSpec spec;
  double eps = 0.0;           // measured ||g||_{H^{-s} homogeneous}
  double solver_floor = 0.0;  // max_t ||wave-only run - phi||_2
  std::vector<double> t;
  std::vector<double> err_L, err_L1, gap, energy_drift;
  GrowthFit fit_L, fit_L1, fit_gap;

  // record.json (everything) + series.csv (t,err_L,err_L1,gap,energy_drift)
  void save(const std::string& dir) const;
  static ExperimentRecord load(const std::string& dir);
};

// Runs one cell; persists to spec.out_dir when nonempty.
ExperimentRecord run_superposition(const ExperimentSpec& spec);

// Flat INI-style configuration: [suite] s / bands / seeds / T / samples,
// [wave] a / c / tol, [solver] N / dt / dealias / route.  Values may be
// whitespace-separated lists where a list is meaningful; '#' starts a
// comment; unknown sections or keys are errors.
//
// The data band sets the stiffest active resonance (|3 k1 k2 (k1+k2)| grows
// like the cube of the band edge), so the dt that keeps discretization error
// below the dynamics differs per band.  [solver] dt_band_<N0> = <dt>
// overrides dt for the cells with that band; other bands keep [solver] dt.
struct SuiteConfig {
  std::vector<double> s_list{0.25};
  std::vector<int> bands{16, 32, 64};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> T_list{1.0};
  int samples = 16;
  double wave_a = 8.0, wave_c = 0.0, wave_tol = 1e-12;
  SolverConfig solver;
  std::map<int, double> dt_bands;  // per-band dt overrides (see above)
  ModifiedRoute route = ModifiedRoute::integrating_factor;

  std::vector<ExperimentSpec> cells() const;  // (s, N0, seed, T) product
  static SuiteConfig parse_file(const std::string& path);
  static SuiteConfig parse_text(const std::string& text);
};

// Single-cell spec file: [experiment] s / N0 / seed / T / samples plus the
// same [wave] and [solver] sections.
ExperimentSpec parse_spec_file(const std::string& path);
ExperimentSpec parse_spec_text(const std::string& text);

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CellResult {
  ExperimentSpec spec;
  bool ok = false;
  std::string error;        // set when !ok; the suite continues
  ExperimentRecord record;  // valid iff ok
  std::string dir;          // where the record was written
};

struct SuiteSummary {
  std::vector<CellResult> cells;
  std::vector<Verdict> verdicts;
  bool all_pass() const;
};

// Executes the cell matrix on a bounded worker pool (jobs threads); each cell
// is internally sequential and written to <out_dir>/<cell_name>/.  The main
// thread is the single consumer: it renders verdicts and writes summary.csv
// and verdicts.json into out_dir.
SuiteSummary run_suite(const SuiteConfig& cfg, const std::string& out_dir,
                       int jobs = 1);

std::vector<Verdict> suite_verdicts(const std::vector<CellResult>& cells);
void write_summary_csv(const SuiteSummary& s, const std::string& path);
void write_verdicts_json(const SuiteSummary& s, const std::string& path);
std::string cell_name(const ExperimentSpec& spec);

}  // namespace knf
