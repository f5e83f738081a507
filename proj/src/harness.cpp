// Experiment orchestration: high-frequency data, the superposition
// experiment, growth fits, INI configuration, and the suite runner.

#include "knf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "knf/common.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace knf {

namespace {

std::string dealias_name(Dealias d) {
  return d == Dealias::pad32 ? "pad32" : "truncate23";
}

Dealias dealias_from(const std::string& s) {
  if (s == "pad32") return Dealias::pad32;
  if (s == "truncate23") return Dealias::truncate23;
  throw std::invalid_argument("unknown dealias rule '" + s + "'");
}

std::string route_name(ModifiedRoute r) {
  switch (r) {
    case ModifiedRoute::integrating_factor: return "integrating_factor";
    case ModifiedRoute::grid_direct: return "grid_direct";
    case ModifiedRoute::spectral_vspace: return "spectral_vspace";
  }
  return "integrating_factor";
}

ModifiedRoute route_from(const std::string& s) {
  if (s == "integrating_factor") return ModifiedRoute::integrating_factor;
  if (s == "grid_direct") return ModifiedRoute::grid_direct;
  if (s == "spectral_vspace") return ModifiedRoute::spectral_vspace;
  throw std::invalid_argument("unknown modified-flow route '" + s + "'");
}

}  // namespace

// ---- data generation ----------------------------------------------------------

std::pair<FourierField, double> generate_hf_data(int N0, double s,
                                                 std::uint64_t seed, int N) {
  if (N0 < 4) throw std::invalid_argument("generate_hf_data: N0 must be >= 4");
  if (!(s > 0.0 && s < 0.5))
    throw std::invalid_argument("generate_hf_data: s must lie in (0, 1/2)");
  if (2 * N0 > N)
    throw std::invalid_argument("generate_hf_data: band [N0, 2N0] exceeds the truncation N");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  FourierField g(N);
  for (int k = N0; k <= 2 * N0; ++k) {
    const cplx z = std::polar(1.0, phase(rng));
    g(k) = z;
    g(-k) = std::conj(z);
  }
  g *= 1.0 / l2_norm(g);
  return {g, sobolev_norm(g, s, Sobolev::homogeneous)};
}

// ---- spec ----------------------------------------------------------------------

void ExperimentSpec::validate() const {
  if (!(s > 0.0 && s < 0.5))
    throw std::invalid_argument("ExperimentSpec: s must lie in (0, 1/2)");
  if (N0 < 4) throw std::invalid_argument("ExperimentSpec: N0 must be >= 4");
  if (4 * N0 > solver.N)
    throw std::invalid_argument(
        "ExperimentSpec: need 2 N0 <= N/2 (room for nonlinear spreading)");
  if (!(T > 0.0)) throw std::invalid_argument("ExperimentSpec: T must be positive");
  if (!(solver.dt > 0.0))
    throw std::invalid_argument("ExperimentSpec: dt must be positive");
  if (samples < 1)
    throw std::invalid_argument("ExperimentSpec: samples must be >= 1");
  if (!(wave_tol > 0.0))
    throw std::invalid_argument("ExperimentSpec: wave_tol must be positive");
}

// ---- growth fit ----------------------------------------------------------------

GrowthFit fit_growth(const std::vector<double>& t,
                     const std::vector<double>& err, double eps, double floor) {
  if (t.size() != err.size())
    throw std::invalid_argument("fit_growth: size mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("fit_growth: eps must be positive");
  if (floor < 0.0) throw std::invalid_argument("fit_growth: floor must be >= 0");

  std::vector<double> x, y;
  const double cut = 10.0 * floor;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (err[i] > cut && err[i] > 0.0) {
      x.push_back(t[i]);
      y.push_back(std::log(err[i] / eps));
    }
  }
  GrowthFit out;
  out.n_used = static_cast<int>(x.size());
  if (out.n_used < 4) return out;  // vacuous: the bound holds trivially

  const LineFit lf = fit_line(x, y);
  out.C1 = std::exp(lf.intercept);
  out.C2 = lf.slope;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (lf.intercept + lf.slope * x[i]);
    ss += r * r;
  }
  out.rms = std::sqrt(ss / static_cast<double>(x.size()));
  out.vacuous = false;
  return out;
}

// ---- the experiment ------------------------------------------------------------

namespace {

// Perturbation in the wave frame: q(x - ct, t) - phi(x).  The (a, c) wave
// translates as f(x + ct), so the Galilean boost q(x - ct, t) + c makes it
// stationary; the +c mean shift cancels against phi's, leaving the phases.
FourierField frame_perturbation(const FourierField& q, const FourierField& phi,
                                double c, double t) {
  FourierField out = q;
  if (c != 0.0) {
    for (int k = -q.N(); k <= q.N(); ++k)
      if (k != 0) out(k) *= std::polar(1.0, -static_cast<double>(k) * c * t);
  }
  out -= phi;
  return out;
}

SolverConfig derive_solver(const ExperimentSpec& spec) {
  SolverConfig cfg = spec.solver;
  cfg.T = spec.T;
  const long long steps = std::llround(spec.T / cfg.dt);
  const long long store = std::max(1LL, steps / spec.samples);
  cfg.store_every = static_cast<int>(store);
  cfg.monitor_every = static_cast<int>(store);
  return cfg;
}

}  // namespace

ExperimentRecord run_superposition(const ExperimentSpec& spec) {
  spec.validate();

  const CnoidalWave wave = build_cnoidal(spec.wave_a, spec.wave_c, spec.wave_tol);
  const FourierField Phi = wave.Phi();
  // Galilean-reduced drift: the boost q(x - ct, t) + c brings the wave to
  // rest, so the resting mean is the moving mean plus c.
  const double drift = wave.mean + spec.wave_c;
  const int N = spec.solver.N;

  FourierField phi_field = Phi.truncated(N);
  phi_field(0) = cplx(wave.mean, 0.0);

  auto [g, eps] = generate_hf_data(spec.N0, spec.s, spec.seed, N);

  const SolverConfig cfg = derive_solver(spec);

  const Trajectory traj = evolve_kdv(phi_field + g, cfg);
  if (traj.aborted)
    throw std::runtime_error("run_superposition: KdV solver hit the blow-up guard");
  const Trajectory base = evolve_kdv(phi_field, cfg);  // g = 0 companion (floor)
  if (base.aborted)
    throw std::runtime_error("run_superposition: wave-only run hit the blow-up guard");
  const Trajectory mod = modified_flow(g, drift, Phi, cfg, spec.route);
  if (mod.aborted)
    throw std::runtime_error("run_superposition: modified flow hit the blow-up guard");

  const std::size_t n = traj.times.size();
  if (base.times.size() != n || mod.times.size() != n ||
      traj.conservation.size() != n)
    throw std::logic_error("run_superposition: sample grids disagree");

  ExperimentRecord rec;
  rec.spec = spec;
  rec.eps = eps;

  for (std::size_t i = 0; i < n; ++i) {
    const double bt = base.times[i];
    rec.solver_floor = std::max(
        rec.solver_floor,
        l2_norm(frame_perturbation(base.states[i], phi_field, spec.wave_c, bt)));
  }

  const double E0 = traj.conservation.front().energy;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = traj.times[i];
    const FourierField u =
        frame_perturbation(traj.states[i], phi_field, spec.wave_c, t);
    const FourierField lin = airy_flow(g, t, drift);
    rec.t.push_back(t);
    rec.err_L.push_back(l2_norm(u - lin));
    rec.err_L1.push_back(l2_norm(u - mod.states[i]));
    rec.gap.push_back(l2_norm(mod.states[i] - lin));
    rec.energy_drift.push_back(std::abs(traj.conservation[i].energy - E0) /
                               std::max(std::abs(E0), 1e-300));
  }

  rec.fit_L = fit_growth(rec.t, rec.err_L, eps, rec.solver_floor);
  rec.fit_L1 = fit_growth(rec.t, rec.err_L1, eps, rec.solver_floor);
  rec.fit_gap = fit_growth(rec.t, rec.gap, eps, rec.solver_floor);

  if (!spec.out_dir.empty()) rec.save(spec.out_dir);
  return rec;
}

// ---- persistence ---------------------------------------------------------------

namespace {

json fit_to_json(const GrowthFit& f) {
  return json{{"C1", f.C1},
              {"C2", f.C2},
              {"rms", f.rms},
              {"n_used", f.n_used},
              {"vacuous", f.vacuous}};
}

GrowthFit fit_from_json(const json& j) {
  GrowthFit f;
  f.C1 = j.at("C1").get<double>();
  f.C2 = j.at("C2").get<double>();
  f.rms = j.at("rms").get<double>();
  f.n_used = j.at("n_used").get<int>();
  f.vacuous = j.at("vacuous").get<bool>();
  return f;
}

json spec_to_json(const ExperimentSpec& spec) {
  return json{{"s", spec.s},
              {"N0", spec.N0},
              {"seed", spec.seed},
              {"wave", json{{"a", spec.wave_a}, {"c", spec.wave_c}, {"tol", spec.wave_tol}}},
              {"solver", json{{"N", spec.solver.N},
                              {"dt", spec.solver.dt},
                              {"dealias", dealias_name(spec.solver.dealias)},
                              {"route", route_name(spec.route)}}},
              {"T", spec.T},
              {"samples", spec.samples}};
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec spec;
  spec.s = j.at("s").get<double>();
  spec.N0 = j.at("N0").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.wave_a = j.at("wave").at("a").get<double>();
  spec.wave_c = j.at("wave").at("c").get<double>();
  spec.wave_tol = j.at("wave").at("tol").get<double>();
  spec.solver.N = j.at("solver").at("N").get<int>();
  spec.solver.dt = j.at("solver").at("dt").get<double>();
  spec.solver.dealias = dealias_from(j.at("solver").at("dealias").get<std::string>());
  spec.route = route_from(j.at("solver").at("route").get<std::string>());
  spec.T = j.at("T").get<double>();
  spec.samples = j.at("samples").get<int>();
  return spec;
}

}  // namespace

void ExperimentRecord::save(const std::string& dir) const {
  fs::create_directories(dir);
  json j;
  j["spec"] = spec_to_json(spec);
  j["eps"] = eps;
  j["solver_floor"] = solver_floor;
  j["series"] = json{{"t", t},
                     {"err_L", err_L},
                     {"err_L1", err_L1},
                     {"gap", gap},
                     {"energy_drift", energy_drift}};
  j["fits"] = json{{"err_L", fit_to_json(fit_L)},
                   {"err_L1", fit_to_json(fit_L1)},
                   {"gap", fit_to_json(fit_gap)}};
  {
    std::ofstream f(fs::path(dir) / "record.json");
    if (!f) throw std::runtime_error("ExperimentRecord::save: cannot open record.json");
    f << j.dump(2) << '\n';
  }
  {
    std::ofstream f(fs::path(dir) / "series.csv");
    if (!f) throw std::runtime_error("ExperimentRecord::save: cannot open series.csv");
    f << "t,err_L,err_L1,gap,energy_drift\n";
    for (std::size_t i = 0; i < t.size(); ++i)
      f << format_double(t[i]) << ',' << format_double(err_L[i]) << ','
        << format_double(err_L1[i]) << ',' << format_double(gap[i]) << ','
        << format_double(energy_drift[i]) << '\n';
  }
}

ExperimentRecord ExperimentRecord::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "record.json");
  if (!f) throw std::runtime_error("ExperimentRecord::load: cannot open record.json");
  json j;
  f >> j;
  ExperimentRecord rec;
  rec.spec = spec_from_json(j.at("spec"));
  rec.eps = j.at("eps").get<double>();
  rec.solver_floor = j.at("solver_floor").get<double>();
  const json& s = j.at("series");
  rec.t = s.at("t").get<std::vector<double>>();
  rec.err_L = s.at("err_L").get<std::vector<double>>();
  rec.err_L1 = s.at("err_L1").get<std::vector<double>>();
  rec.gap = s.at("gap").get<std::vector<double>>();
  rec.energy_drift = s.at("energy_drift").get<std::vector<double>>();
  rec.fit_L = fit_from_json(j.at("fits").at("err_L"));
  rec.fit_L1 = fit_from_json(j.at("fits").at("err_L1"));
  rec.fit_gap = fit_from_json(j.at("fits").at("gap"));
  return rec;
}

// ---- configuration -------------------------------------------------------------

namespace {

struct IniEntry {
  std::string section, key, value;
  int line = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<IniEntry> parse_ini(const std::string& text) {
  std::vector<IniEntry> out;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(line) +
                                    ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty())
        throw std::invalid_argument("config line " + std::to_string(line) +
                                    ": empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line) +
                                  ": expected key = value");
    IniEntry e;
    e.section = section;
    e.key = trim(s.substr(0, eq));
    e.value = trim(s.substr(eq + 1));
    e.line = line;
    if (e.key.empty() || e.value.empty())
      throw std::invalid_argument("config line " + std::to_string(line) +
                                  ": empty key or value");
    out.push_back(std::move(e));
  }
  return out;
}

[[noreturn]] void unknown_key(const IniEntry& e) {
  throw std::invalid_argument("config line " + std::to_string(e.line) +
                              ": unknown key '" + e.key + "' in section [" +
                              e.section + "]");
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double to_real(const IniEntry& e, const std::string& tok) {
  std::size_t pos = 0;
  const double v = std::stod(tok, &pos);
  if (pos != tok.size())
    throw std::invalid_argument("config line " + std::to_string(e.line) +
                                ": bad number '" + tok + "' for key '" + e.key + "'");
  return v;
}

long long to_ll(const IniEntry& e, const std::string& tok) {
  std::size_t pos = 0;
  const long long v = std::stoll(tok, &pos);
  if (pos != tok.size())
    throw std::invalid_argument("config line " + std::to_string(e.line) +
                                ": bad integer '" + tok + "' for key '" + e.key + "'");
  return v;
}

std::vector<double> real_list(const IniEntry& e) {
  std::vector<double> out;
  for (const auto& t : split_ws(e.value)) out.push_back(to_real(e, t));
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Shared [wave]/[solver] handling; returns true when consumed.
template <class Cfg>
bool consume_common(Cfg& cfg, ModifiedRoute& route, const IniEntry& e) {
  if (e.section == "wave") {
    if (e.key == "a") cfg.wave_a = to_real(e, e.value);
    else if (e.key == "c") cfg.wave_c = to_real(e, e.value);
    else if (e.key == "tol") cfg.wave_tol = to_real(e, e.value);
    else unknown_key(e);
    return true;
  }
  if (e.section == "solver") {
    if (e.key == "N") cfg.solver.N = static_cast<int>(to_ll(e, e.value));
    else if (e.key == "dt") cfg.solver.dt = to_real(e, e.value);
    else if (e.key == "dealias") cfg.solver.dealias = dealias_from(e.value);
    else if (e.key == "route") route = route_from(e.value);
    else unknown_key(e);
    return true;
  }
  return false;
}

}  // namespace

SuiteConfig SuiteConfig::parse_text(const std::string& text) {
  SuiteConfig cfg;
  for (const IniEntry& e : parse_ini(text)) {
    if (e.section == "solver" && e.key.rfind("dt_band_", 0) == 0) {
      const std::string suffix = e.key.substr(8);
      long long band = 0;
      try {
        band = to_ll(e, suffix);
      } catch (const std::exception&) {
        unknown_key(e);
      }
      if (band <= 0) unknown_key(e);
      cfg.dt_bands[static_cast<int>(band)] = to_real(e, e.value);
      continue;
    }
    if (consume_common(cfg, cfg.route, e)) continue;
    if (e.section == "suite") {
      if (e.key == "s") cfg.s_list = real_list(e);
      else if (e.key == "bands") {
        cfg.bands.clear();
        for (const auto& t : split_ws(e.value))
          cfg.bands.push_back(static_cast<int>(to_ll(e, t)));
      } else if (e.key == "seeds") {
        cfg.seeds.clear();
        for (const auto& t : split_ws(e.value))
          cfg.seeds.push_back(static_cast<std::uint64_t>(to_ll(e, t)));
      } else if (e.key == "T") cfg.T_list = real_list(e);
      else if (e.key == "samples") cfg.samples = static_cast<int>(to_ll(e, e.value));
      else unknown_key(e);
      continue;
    }
    throw std::invalid_argument("config line " + std::to_string(e.line) +
                                ": unknown section [" + e.section + "]");
  }
  return cfg;
}

SuiteConfig SuiteConfig::parse_file(const std::string& path) {
  return parse_text(read_file(path));
}

std::vector<ExperimentSpec> SuiteConfig::cells() const {
  std::vector<ExperimentSpec> out;
  for (double s : s_list)
    for (int N0 : bands)
      for (std::uint64_t seed : seeds)
        for (double T : T_list) {
          ExperimentSpec spec;
          spec.s = s;
          spec.N0 = N0;
          spec.seed = seed;
          spec.T = T;
          spec.samples = samples;
          spec.wave_a = wave_a;
          spec.wave_c = wave_c;
          spec.wave_tol = wave_tol;
          spec.solver = solver;
          if (const auto it = dt_bands.find(N0); it != dt_bands.end())
            spec.solver.dt = it->second;
          spec.route = route;
          out.push_back(std::move(spec));
        }
  return out;
}

ExperimentSpec parse_spec_text(const std::string& text) {
  ExperimentSpec spec;
  for (const IniEntry& e : parse_ini(text)) {
    if (consume_common(spec, spec.route, e)) continue;
    if (e.section == "experiment") {
      if (e.key == "s") spec.s = to_real(e, e.value);
      else if (e.key == "N0") spec.N0 = static_cast<int>(to_ll(e, e.value));
      else if (e.key == "seed") spec.seed = static_cast<std::uint64_t>(to_ll(e, e.value));
      else if (e.key == "T") spec.T = to_real(e, e.value);
      else if (e.key == "samples") spec.samples = static_cast<int>(to_ll(e, e.value));
      else unknown_key(e);
      continue;
    }
    throw std::invalid_argument("config line " + std::to_string(e.line) +
                                ": unknown section [" + e.section + "]");
  }
  return spec;
}

ExperimentSpec parse_spec_file(const std::string& path) {
  return parse_spec_text(read_file(path));
}

// ---- suite ---------------------------------------------------------------------

std::string cell_name(const ExperimentSpec& spec) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "s%g_N0%d_seed%llu_T%g", spec.s, spec.N0,
                static_cast<unsigned long long>(spec.seed), spec.T);
  return buf;
}

bool SuiteSummary::all_pass() const {
  for (const auto& v : verdicts)
    if (!v.pass) return false;
  return true;
}

namespace {

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Mean of the non-vacuous C2 values per N0 level; empty when none.
std::map<int, double> level_means(const std::vector<CellResult>& cells,
                                  GrowthFit ExperimentRecord::* fit) {
  std::map<int, double> sum;
  std::map<int, int> cnt;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    const GrowthFit& f = c.record.*fit;
    if (f.vacuous) continue;
    sum[c.spec.N0] += f.C2;
    cnt[c.spec.N0] += 1;
  }
  std::map<int, double> out;
  for (auto& [N0, s] : sum) out[N0] = s / cnt[N0];
  return out;
}

Verdict rate_stability(const std::vector<CellResult>& cells,
                       GrowthFit ExperimentRecord::* fit, const std::string& name) {
  Verdict v;
  v.name = name;
  const auto means = level_means(cells, fit);
  if (means.size() < 2) {
    v.pass = true;
    v.detail = means.empty() ? "all fits vacuous (bound holds trivially)"
                             : "single eps level; nothing to compare";
    return v;
  }
  double grand = 0.0;
  for (const auto& [N0, m] : means) grand += m;
  grand /= static_cast<double>(means.size());
  double worst = 0.0;
  std::string detail;
  for (const auto& [N0, m] : means) {
    const double dev = std::abs(m - grand) / std::max(std::abs(grand), 1e-300);
    worst = std::max(worst, dev);
    detail += (detail.empty() ? "" : ", ") + ("N0=" + std::to_string(N0)) +
              ": C2=" + fmt(m);
  }
  v.pass = worst <= 0.25;
  v.detail = detail + "; worst deviation " + fmt(100.0 * worst) + "% of mean " +
             fmt(grand);
  return v;
}

}  // namespace

std::vector<Verdict> suite_verdicts(const std::vector<CellResult>& cells) {
  std::vector<Verdict> out;

  {
    Verdict v;
    v.name = "cells_completed";
    int ok = 0;
    for (const auto& c : cells) ok += c.ok ? 1 : 0;
    v.pass = ok == static_cast<int>(cells.size());
    v.detail = std::to_string(ok) + "/" + std::to_string(cells.size()) + " cells ok";
    for (const auto& c : cells)
      if (!c.ok) v.detail += "; " + cell_name(c.spec) + ": " + c.error;
    out.push_back(std::move(v));
  }

  {
    // eps-linearity: err_L(T)/eps within a factor 3 across all cells
    Verdict v;
    v.name = "eps_linearity_factor3";
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const auto& c : cells) {
      if (!c.ok || c.record.err_L.empty()) continue;
      const double r = c.record.err_L.back() / c.record.eps;
      lo = any ? std::min(lo, r) : r;
      hi = any ? std::max(hi, r) : r;
      any = true;
    }
    if (!any) {
      v.pass = true;
      v.detail = "no completed cells";
    } else {
      v.pass = lo > 0.0 && hi <= 3.0 * lo;
      v.detail = "err_L(T)/eps in [" + fmt(lo) + ", " + fmt(hi) + "], spread x" +
                 fmt(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
    }
    out.push_back(std::move(v));
  }

  out.push_back(rate_stability(cells, &ExperimentRecord::fit_L,
                               "growth_rate_C2_stable_25pct"));
  out.push_back(rate_stability(cells, &ExperimentRecord::fit_gap,
                               "gap_rate_C2_stable_25pct"));

  {
    Verdict v;
    v.name = "gap_zero_at_t0";
    v.pass = true;
    double worst = 0.0;
    for (const auto& c : cells) {
      if (!c.ok || c.record.gap.empty()) continue;
      worst = std::max(worst, std::max(c.record.gap.front(), c.record.err_L.front()));
    }
    v.pass = worst <= 1e-12;
    v.detail = "max |gap(0)|, |err_L(0)| = " + fmt(worst);
    out.push_back(std::move(v));
  }

  return out;
}

SuiteSummary run_suite(const SuiteConfig& cfg, const std::string& out_dir, int jobs) {
  if (jobs < 1) throw std::invalid_argument("run_suite: jobs must be >= 1");
  fs::create_directories(out_dir);

  const std::vector<ExperimentSpec> specs = cfg.cells();
  SuiteSummary sum;
  sum.cells.resize(specs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      CellResult& cell = sum.cells[i];
      cell.spec = specs[i];
      cell.dir = (fs::path(out_dir) / cell_name(specs[i])).string();
      try {
        ExperimentSpec spec = specs[i];
        spec.out_dir = cell.dir;
        cell.record = run_superposition(spec);
        cell.record.spec.out_dir.clear();  // keep records location-independent
        cell.ok = true;
      } catch (const std::exception& ex) {
        cell.ok = false;
        cell.error = ex.what();
      }
    }
  };

  const int nw = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(jobs), std::max<std::size_t>(specs.size(), 1)));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nw));
  for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  sum.verdicts = suite_verdicts(sum.cells);
  write_summary_csv(sum, (fs::path(out_dir) / "summary.csv").string());
  write_verdicts_json(sum, (fs::path(out_dir) / "verdicts.json").string());
  return sum;
}

void write_summary_csv(const SuiteSummary& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_summary_csv: cannot open " + path);
  f << "cell,s,N0,seed,T,eps,solver_floor,err_L_final,err_L1_final,gap_final,"
       "C1_L,C2_L,vacuous_L,C1_L1,C2_L1,vacuous_L1,C1_gap,C2_gap,vacuous_gap,"
       "status,error\n";
  for (const auto& c : s.cells) {
    f << cell_name(c.spec) << ',' << format_double(c.spec.s) << ',' << c.spec.N0
      << ',' << c.spec.seed << ',' << format_double(c.spec.T) << ',';
    if (c.ok) {
      const ExperimentRecord& r = c.record;
      f << format_double(r.eps) << ',' << format_double(r.solver_floor) << ','
        << format_double(r.err_L.back()) << ',' << format_double(r.err_L1.back())
        << ',' << format_double(r.gap.back()) << ',' << format_double(r.fit_L.C1)
        << ',' << format_double(r.fit_L.C2) << ',' << (r.fit_L.vacuous ? 1 : 0)
        << ',' << format_double(r.fit_L1.C1) << ',' << format_double(r.fit_L1.C2)
        << ',' << (r.fit_L1.vacuous ? 1 : 0) << ',' << format_double(r.fit_gap.C1)
        << ',' << format_double(r.fit_gap.C2) << ',' << (r.fit_gap.vacuous ? 1 : 0)
        << ",ok,\n";
    } else {
      std::string msg = c.error;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      f << ",,,,,,,,,,,,,,failed," << msg << '\n';
    }
  }
}

void write_verdicts_json(const SuiteSummary& s, const std::string& path) {
  json arr = json::array();
  for (const auto& v : s.verdicts)
    arr.push_back(json{{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  json j{{"all_pass", s.all_pass()}, {"verdicts", arr}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_verdicts_json: cannot open " + path);
  f << j.dump(2) << '\n';
}

}  // namespace knf
