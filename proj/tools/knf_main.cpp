// ============================================================================
// knf -- command line harness for the spectral traveling-wave toolkit.
//
// Subcommands:
//   cnoidal      build + certify a 2*pi-periodic traveling wave
//   evolve       integrate KdV from a wave (+ optional stored perturbation)
//   run          one superposition experiment from an INI spec
//   suite        a matrix of experiments with pass/fail verdicts
//   nf verify    finite-difference check of the differentiation-by-parts
//                identity (or its once-integrated variant) along a trajectory
//   nf oracle    exact-product-rule closure residuals at a single time
//   nf bounds    measured-vs-proved operator inequality report
//   nf fredholm  invertibility margin of I + K in the weighted basis
//
// Every subcommand prints a JSON report to stdout and exits 0 only when its
// checks pass (build succeeded, residuals under threshold, zero violations,
// all suite verdicts green).
// ============================================================================
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "knf/cnoidal.hpp"
#include "knf/harness.hpp"
#include "knf/kdv_flow.hpp"
#include "knf/normal_form.hpp"

using json = nlohmann::ordered_json;
using namespace knf;

namespace {

struct WaveOpts {
  double a = 8.0, c = 0.0, tol = 1e-12;
  std::string file;  // when set, load instead of building
};

void add_wave_opts(CLI::App* cmd, WaveOpts& w) {
  cmd->add_option("--wave", w.file, "load a saved wave (wave.json) instead of building");
  cmd->add_option("--a", w.a, "integration constant of the wave ODE")
      ->capture_default_str();
  cmd->add_option("--c", w.c, "wave speed")->capture_default_str();
  cmd->add_option("--wave-tol", w.tol, "period root tolerance")
      ->capture_default_str();
}

CnoidalWave get_wave(const WaveOpts& w) {
  if (!w.file.empty()) return load_wave(w.file);
  return build_cnoidal(w.a, w.c, w.tol);
}

Convention convention_from(const std::string& s) {
  if (s == "closing") return Convention::closing;
  if (s == "reference") return Convention::reference;
  throw CLI::ValidationError("--convention", "expected 'closing' or 'reference'");
}

json wave_summary(const CnoidalWave& w) {
  return json{{"a", w.a},
              {"c", w.c},
              {"f0", w.f0},
              {"mean", w.mean},
              {"band", w.phi.N()},
              {"elliptic_m", w.roots.m},
              {"residual_sup", w.residual_sup},
              {"residual3_sup", w.residual3_sup},
              {"period_error", w.period_error},
              {"decay_rate", w.decay_rate},
              {"build_seconds", w.build_seconds}};
}

void print(const json& j) { std::printf("%s\n", j.dump(2).c_str()); }

json conservation_summary(const Trajectory& tr) {
  const auto& c0 = tr.conservation.front();
  double edrift = 0.0, ldrift = 0.0;
  for (const auto& c : tr.conservation) {
    edrift = std::max(edrift, std::abs(c.energy - c0.energy) /
                                  std::max(std::abs(c0.energy), 1e-300));
    ldrift = std::max(ldrift, std::abs(c.l2sq - c0.l2sq) /
                                  std::max(std::abs(c0.l2sq), 1e-300));
  }
  return json{{"samples", tr.conservation.size()},
              {"momentum", c0.momentum},
              {"energy_drift_rel", edrift},
              {"l2sq_drift_rel", ldrift},
              {"aborted", tr.aborted}};
}

json fit_json(const GrowthFit& f) {
  return json{{"C1", f.C1}, {"C2", f.C2}, {"rms", f.rms},
              {"n_used", f.n_used}, {"vacuous", f.vacuous}};
}

json sweep_json(const FdSweep& sw) {
  json pts = json::array();
  for (const auto& p : sw.points)
    pts.push_back(json{{"h", p.h}, {"residual_rel", p.residual_rel}});
  return json{{"points", pts},
              {"slope", sw.loglog.slope},
              {"intercept", sw.loglog.intercept}};
}

// ---- subcommand bodies -------------------------------------------------------

int cmd_cnoidal(const WaveOpts& wopts, const std::string& out,
                double max_residual, double max_period_err) {
  const CnoidalWave w = get_wave(wopts);
  const bool pass = w.residual_sup <= max_residual && w.period_error <= max_period_err;
  json j = wave_summary(w);
  j["pass"] = pass;
  if (!out.empty()) {
    save_wave(w, out);
    j["saved"] = out;
  }
  print(j);
  return pass ? 0 : 1;
}

int cmd_evolve(const WaveOpts& wopts, const std::string& init_file, int N,
               double dt, double T, int store, const std::string& dealias,
               const std::string& out) {
  const CnoidalWave wave = get_wave(wopts);
  if (N < wave.phi.N())
    std::fprintf(stderr, "note: truncating wave band %d to N=%d\n", wave.phi.N(), N);
  FourierField q0 = wave.phi.truncated(N);
  if (!init_file.empty()) {
    const FourierField g = load_field(init_file);
    if (g.N() > N)
      throw std::invalid_argument("initial perturbation band exceeds N");
    q0 += g.truncated(N);
  }
  SolverConfig cfg;
  cfg.N = N;
  cfg.dt = dt;
  cfg.T = T;
  cfg.store_every = store;
  cfg.dealias = dealias == "truncate23" ? Dealias::truncate23 : Dealias::pad32;

  const Trajectory tr = evolve_kdv(q0, cfg);
  json j{{"wave", wave_summary(wave)},
         {"N", N},
         {"dt", dt},
         {"T", T},
         {"dealias", dealias},
         {"states_stored", tr.states.size()},
         {"conservation", conservation_summary(tr)}};
  if (!out.empty()) {
    tr.save(out);
    j["saved"] = out;
  }
  print(j);
  return tr.aborted ? 1 : 0;
}

int cmd_run(const std::string& spec_file, const std::string& out) {
  ExperimentSpec spec = parse_spec_file(spec_file);
  if (!out.empty()) spec.out_dir = out;
  const ExperimentRecord rec = run_superposition(spec);
  json j{{"cell", cell_name(spec)},
         {"eps", rec.eps},
         {"solver_floor", rec.solver_floor},
         {"samples", rec.t.size()},
         {"err_L_final", rec.err_L.back()},
         {"err_L1_final", rec.err_L1.back()},
         {"gap_final", rec.gap.back()},
         {"energy_drift_final", rec.energy_drift.back()},
         {"fits", json{{"err_L", fit_json(rec.fit_L)},
                       {"err_L1", fit_json(rec.fit_L1)},
                       {"gap", fit_json(rec.fit_gap)}}}};
  if (!out.empty()) j["saved"] = out;
  print(j);
  return 0;
}

int cmd_suite(const std::string& config, const std::string& out, int jobs) {
  const SuiteConfig cfg = SuiteConfig::parse_file(config);
  const SuiteSummary sum = run_suite(cfg, out, jobs);
  json cells = json::array();
  for (const auto& c : sum.cells) {
    json jc{{"cell", cell_name(c.spec)}, {"ok", c.ok}};
    if (c.ok) {
      jc["eps"] = c.record.eps;
      jc["err_L_final"] = c.record.err_L.back();
      jc["C2_L"] = c.record.fit_L.C2;
    } else {
      jc["error"] = c.error;
    }
    cells.push_back(std::move(jc));
  }
  json verdicts = json::array();
  for (const auto& v : sum.verdicts)
    verdicts.push_back(json{{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  print(json{{"cells", cells},
             {"verdicts", verdicts},
             {"all_pass", sum.all_pass()},
             {"out", out}});
  return sum.all_pass() ? 0 : 1;
}

int cmd_nf_verify(const std::string& traj_dir, const WaveOpts& wopts,
                  const std::string& identity, const std::string& conv_name,
                  double t0, std::vector<double> h_list, int band) {
  const Trajectory tr = Trajectory::load(traj_dir);
  const CnoidalWave wave = get_wave(wopts);
  if (wave.c != 0.0)
    throw std::invalid_argument(
        "identity checks expect the wave at rest in the trajectory frame; "
        "rebuild with --c 0 (apply the Galilean reduction before evolving)");
  const int nf_band = band > 0 ? band : tr.cfg.N;
  const NormalForm nf =
      NormalForm::from_wave(convention_from(conv_name), wave, nf_band);

  // Default probe times: centered at the middle stored sample, steps in units
  // of the stored stride.
  const std::size_t n = tr.times.size();
  if (n < 5) throw std::invalid_argument("trajectory has fewer than 5 stored states");
  const double stride = tr.times[1] - tr.times[0];
  if (t0 < 0.0) t0 = tr.times[n / 2];
  if (h_list.empty()) {
    for (double m : {1.0, 2.0, 4.0, 8.0}) {
      const double h = m * stride;
      if (t0 - h >= tr.times.front() - 1e-12 && t0 + h <= tr.times.back() + 1e-12)
        h_list.push_back(h);
    }
  }
  if (h_list.size() < 2)
    throw std::invalid_argument("need at least two usable probe steps h");

  const FdSweep sw = identity == "modified"
                         ? verify_de_identity(tr, nf, t0, h_list)
                         : verify_dbp_identity(tr, nf, t0, h_list);
  const double slope = sw.loglog.slope;
  const bool pass = slope >= 1.7 && slope <= 2.3;
  json j{{"identity", identity},
         {"convention", conv_name},
         {"t0", t0},
         {"band", nf_band},
         {"sweep", sweep_json(sw)},
         {"slope_window", json::array({1.7, 2.3})},
         {"pass", pass}};
  print(j);
  return pass ? 0 : 1;
}

int cmd_nf_oracle(const WaveOpts& wopts, const std::string& conv_name, int band,
                  double t, std::uint64_t seed, double max_rel) {
  const CnoidalWave wave = get_wave(wopts);
  const NormalForm nf =
      NormalForm::from_wave(convention_from(conv_name), wave, band);
  const FourierField v = random_test_field(band, 2, seed);
  const OracleReport dbp = oracle_dbp(nf, v, t);
  const OracleReport de = oracle_de(nf, v, t);
  const bool pass = dbp.residual_rel <= max_rel && de.residual_rel <= max_rel;
  print(json{{"convention", conv_name},
             {"band", band},
             {"t", t},
             {"dbp", json{{"residual_rel", dbp.residual_rel}, {"scale", dbp.scale}}},
             {"once_integrated", json{{"residual_rel", de.residual_rel},
                                      {"scale", de.scale}}},
             {"max_rel", max_rel},
             {"pass", pass}});
  return pass ? 0 : 1;
}

int cmd_nf_bounds(const WaveOpts& wopts, double s, int trials, int band,
                  std::uint64_t seed, const std::string& csv_out) {
  const CnoidalWave wave = get_wave(wopts);
  const NormalForm nf = NormalForm::from_wave(Convention::reference, wave, band);
  const BoundReport rep = bound_report(nf, s, trials, seed);
  json lines = json::array();
  for (const auto& l : rep.lines)
    lines.push_back(json{{"name", l.name},
                         {"constant", l.constant},
                         {"worst_ratio", l.worst_ratio},
                         {"mean_ratio", l.mean_ratio},
                         {"headroom", l.headroom()},
                         {"violations", l.violations}});
  if (!csv_out.empty()) {
    std::ofstream f(csv_out);
    f << "name,constant,worst_ratio,mean_ratio,headroom,violations\n";
    for (const auto& l : rep.lines)
      f << '"' << l.name << "\"," << format_double(l.constant) << ','
        << format_double(l.worst_ratio) << ',' << format_double(l.mean_ratio)
        << ',' << format_double(l.headroom()) << ',' << l.violations << '\n';
  }
  const bool pass = rep.total_violations() == 0;
  print(json{{"s", s},
             {"band", band},
             {"trials", trials},
             {"lines", lines},
             {"total_violations", rep.total_violations()},
             {"pass", pass}});
  return pass ? 0 : 1;
}

int cmd_nf_fredholm(const WaveOpts& wopts, double s, int N, int N2) {
  const CnoidalWave wave = get_wave(wopts);
  const FourierField Phi = wave.Phi();
  const FredholmReport r1 = fredholm_report(Phi, s, N);
  json j{{"s", s},
         {"N", N},
         {"sigma_min", r1.sigma_min},
         {"sigma_max_A", r1.sigma_max_A},
         {"phi_l2", r1.phi_l2},
         {"apriori_bound", r1.apriori_bound},
         {"resolvent_bound", r1.resolvent_bound}};
  bool pass = r1.sigma_min > 0.0 && r1.sigma_max_A <= r1.apriori_bound;
  if (N2 > 0) {
    const FredholmReport r2 = fredholm_report(Phi, s, N2);
    const double change = std::abs(r2.sigma_min - r1.sigma_min) / r1.sigma_min;
    j["N2"] = N2;
    j["sigma_min_N2"] = r2.sigma_min;
    j["sigma_min_change_rel"] = change;
    pass = pass && r2.sigma_min > 0.0 && change < 0.10;
  }
  j["pass"] = pass;
  print(j);
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral traveling-wave toolkit: cnoidal waves, KdV evolution, "
               "normal-form identities, and superposition experiments"};
  app.require_subcommand(1);

  // ---- cnoidal ----
  auto* c_cmd = app.add_subcommand("cnoidal", "build and certify a periodic wave");
  WaveOpts c_w;
  std::string c_out;
  double c_maxres = 1e-8, c_maxper = 1e-10;
  add_wave_opts(c_cmd, c_w);
  c_cmd->add_option("--out", c_out, "save the wave (JSON)");
  c_cmd->add_option("--max-residual", c_maxres, "pass threshold on the ODE residual")
      ->capture_default_str();
  c_cmd->add_option("--max-period-err", c_maxper, "pass threshold on |T - 2pi|")
      ->capture_default_str();

  // ---- evolve ----
  auto* e_cmd = app.add_subcommand("evolve", "integrate KdV from the wave");
  WaveOpts e_w;
  std::string e_init, e_out, e_dealias = "pad32";
  int e_N = 128, e_store = 0;
  double e_dt = 1e-4, e_T = 1.0;
  add_wave_opts(e_cmd, e_w);
  e_cmd->add_option("--init", e_init, "perturbation field to add (field JSON)");
  e_cmd->add_option("--N", e_N, "retained band")->capture_default_str();
  e_cmd->add_option("--dt", e_dt, "time step")->capture_default_str();
  e_cmd->add_option("--T", e_T, "final time")->capture_default_str();
  e_cmd->add_option("--store", e_store, "state storage stride (0 = ends only)")
      ->capture_default_str();
  e_cmd->add_option("--dealias", e_dealias, "pad32 | truncate23")
      ->check(CLI::IsMember({"pad32", "truncate23"}))
      ->capture_default_str();
  e_cmd->add_option("--out", e_out, "trajectory output directory");

  // ---- run ----
  auto* r_cmd = app.add_subcommand("run", "one superposition experiment");
  std::string r_spec, r_out;
  r_cmd->add_option("--spec", r_spec, "experiment spec (INI)")->required();
  r_cmd->add_option("--out", r_out, "record output directory");

  // ---- suite ----
  auto* s_cmd = app.add_subcommand("suite", "experiment matrix with verdicts");
  std::string s_cfg, s_out;
  int s_jobs = 1;
  s_cmd->add_option("--config", s_cfg, "suite config (INI)")->required();
  s_cmd->add_option("--out", s_out, "output directory")->required();
  s_cmd->add_option("--jobs", s_jobs, "parallel cells")->capture_default_str();

  // ---- nf ----
  auto* nf_cmd = app.add_subcommand("nf", "normal-form calculus checks");
  nf_cmd->require_subcommand(1);

  auto* v_cmd = nf_cmd->add_subcommand("verify", "finite-difference identity check");
  WaveOpts v_w;
  std::string v_traj, v_identity = "kdv", v_conv = "closing";
  double v_t0 = -1.0;
  std::vector<double> v_h;
  int v_band = 0;
  v_cmd->add_option("--traj", v_traj, "trajectory directory")->required();
  add_wave_opts(v_cmd, v_w);
  v_cmd->add_option("--identity", v_identity, "kdv | modified")
      ->check(CLI::IsMember({"kdv", "modified"}))
      ->capture_default_str();
  v_cmd->add_option("--convention", v_conv, "closing | reference")
      ->check(CLI::IsMember({"closing", "reference"}))
      ->capture_default_str();
  v_cmd->add_option("--t0", v_t0, "probe center (default: middle sample)");
  v_cmd->add_option("--h-list", v_h, "probe steps (default: stored stride x {1,2,4,8})");
  v_cmd->add_option("--band", v_band, "operator band (default: trajectory N)");

  auto* o_cmd = nf_cmd->add_subcommand("oracle", "exact closure residuals");
  WaveOpts o_w;
  std::string o_conv = "closing";
  int o_band = 24;
  double o_t = 0.3, o_max = 1e-12;
  std::uint64_t o_seed = 1;
  add_wave_opts(o_cmd, o_w);
  o_cmd->add_option("--convention", o_conv, "closing | reference")
      ->check(CLI::IsMember({"closing", "reference"}))
      ->capture_default_str();
  o_cmd->add_option("--band", o_band, "operator band")->capture_default_str();
  o_cmd->add_option("--t", o_t, "evaluation time")->capture_default_str();
  o_cmd->add_option("--seed", o_seed, "test field seed")->capture_default_str();
  o_cmd->add_option("--max-rel", o_max, "pass threshold on relative residual")
      ->capture_default_str();

  auto* b_cmd = nf_cmd->add_subcommand("bounds", "operator inequality report");
  WaveOpts b_w;
  double b_s = 0.25;
  int b_trials = 100, b_band = 32;
  std::uint64_t b_seed = 1;
  std::string b_csv;
  add_wave_opts(b_cmd, b_w);
  b_cmd->add_option("--s", b_s, "Sobolev index in (0, 1/2)")->capture_default_str();
  b_cmd->add_option("--trials", b_trials, "random fields per line")->capture_default_str();
  b_cmd->add_option("--band", b_band, "operator band")->capture_default_str();
  b_cmd->add_option("--seed", b_seed, "RNG seed")->capture_default_str();
  b_cmd->add_option("--csv", b_csv, "also write the table as CSV");

  auto* f_cmd = nf_cmd->add_subcommand("fredholm", "I + K invertibility margin");
  WaveOpts f_w;
  double f_s = 0.25;
  int f_N = 32, f_N2 = 64;
  add_wave_opts(f_cmd, f_w);
  f_cmd->add_option("--s", f_s, "Sobolev index")->capture_default_str();
  f_cmd->add_option("--N", f_N, "band")->capture_default_str();
  f_cmd->add_option("--N2", f_N2, "comparison band (0 = skip)")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_cmd) return cmd_cnoidal(c_w, c_out, c_maxres, c_maxper);
    if (*e_cmd)
      return cmd_evolve(e_w, e_init, e_N, e_dt, e_T, e_store, e_dealias, e_out);
    if (*r_cmd) return cmd_run(r_spec, r_out);
    if (*s_cmd) return cmd_suite(s_cfg, s_out, s_jobs);
    if (*v_cmd)
      return cmd_nf_verify(v_traj, v_w, v_identity, v_conv, v_t0, v_h, v_band);
    if (*o_cmd) return cmd_nf_oracle(o_w, o_conv, o_band, o_t, o_seed, o_max);
    if (*b_cmd) return cmd_nf_bounds(b_w, b_s, b_trials, b_band, b_seed, b_csv);
    if (*f_cmd) return cmd_nf_fredholm(f_w, f_s, f_N, f_N2);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }
  return 2;  // unreachable: require_subcommand guarantees a match
}
