#include "knf/kdv_flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "knf/common.hpp"
#include "knf/fft_grid.hpp"

namespace knf {

namespace {

namespace fs = std::filesystem;

long long step_count(double T, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("SolverConfig: dt must be positive");
  if (!(T >= 0.0)) throw std::invalid_argument("SolverConfig: T must be nonnegative");
  const long long n = std::llround(T / dt);
  if (std::abs(double(n) * dt - T) > 1e-9 * std::max(1.0, T))
    throw std::invalid_argument("SolverConfig: dt must divide T");
  return n;
}

void check_real_input(const FourierField& q0, const char* who) {
  if (!q0.is_hermitian(1e-9))
    throw std::invalid_argument(std::string(who) + ": input field is not real (Hermitian)");
}

void require_mean_zero(const FourierField& u, const char* who) {
  if (std::abs(u.mean()) > 1e-12 * (1.0 + u.max_abs()))
    throw std::invalid_argument(std::string(who) + ": input must be mean-zero");
}

// Shared RK4 driver over a generic stage RHS f(t, y) -> dy/dt on a coefficient
// vector.  `observe(step, t, y)` is called after every accepted step and at
// step 0; returning false aborts the run (blow-up guard).
template <typename Rhs, typename Observe>
bool rk4_drive(std::vector<cplx>& y, double dt, long long steps, Rhs&& rhs, Observe&& observe) {
  const size_t n = y.size();
  std::vector<cplx> k1(n), k2(n), k3(n), k4(n), tmp(n);
  if (!observe(0LL, 0.0, y)) return false;
  for (long long s = 0; s < steps; ++s) {
    const double t = double(s) * dt;
    rhs(t, y, k1);
    for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    rhs(t + 0.5 * dt, tmp, k2);
    for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    rhs(t + 0.5 * dt, tmp, k3);
    for (size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
    rhs(t + dt, tmp, k4);
    for (size_t i = 0; i < n; ++i)
      y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!observe(s + 1, double(s + 1) * dt, y)) return false;
  }
  return true;
}

// Lawson form of the integrating-factor RK4 for y' = L y + F(y) with diagonal
// L: the state stays untwisted and the linear phases enter only through the
// fixed half/full-step tables Eh = e^{L dt/2}, E1 = e^{L dt}.  Algebraically
// this is RK4 applied to the twisted variable e^{-tL} y, so it shares that
// scheme's order and stability, but no absolute-time phase is ever evaluated.
template <typename Rhs, typename Observe>
bool lawson_rk4_drive(std::vector<cplx>& y, double dt, long long steps,
                      const std::vector<cplx>& Eh, const std::vector<cplx>& E1,
                      Rhs&& rhs, Observe&& observe) {
  const size_t n = y.size();
  std::vector<cplx> a1(n), a2(n), a3(n), a4(n), tmp(n), yh(n);
  if (!observe(0LL, 0.0, y)) return false;
  for (long long s = 0; s < steps; ++s) {
    rhs(y, a1);
    for (size_t i = 0; i < n; ++i) {
      yh[i] = Eh[i] * y[i];
      tmp[i] = Eh[i] * (y[i] + 0.5 * dt * a1[i]);
    }
    rhs(tmp, a2);
    for (size_t i = 0; i < n; ++i) tmp[i] = yh[i] + 0.5 * dt * a2[i];
    rhs(tmp, a3);
    for (size_t i = 0; i < n; ++i) tmp[i] = E1[i] * y[i] + dt * Eh[i] * a3[i];
    rhs(tmp, a4);
    for (size_t i = 0; i < n; ++i)
      y[i] = E1[i] * (y[i] + dt / 6.0 * a1[i]) +
             dt / 6.0 * (2.0 * Eh[i] * (a2[i] + a3[i]) + a4[i]);
    if (!observe(s + 1, double(s + 1) * dt, y)) return false;
  }
  return true;
}

double l2sq_band(const std::vector<cplx>& v) {
  double s = 0.0;
  for (const cplx& c : v) s += std::norm(c);
  return s;
}

}  // namespace

double momentum_l2sq(const FourierField& q) {
  double s = 0.0;
  for (int k = -q.N(); k <= q.N(); ++k) s += std::norm(q(k));
  return s;
}

double kdv_energy(const FourierField& q) {
  const int n = q.N();
  double grad = 0.0;
  for (int k = -n; k <= n; ++k) grad += double(k) * k * std::norm(q(k));
  // (1/2pi) int q^3: mode 0 of the cubic is alias-free on M >= 3N+1 points
  Grid grid(next_fast_size(3 * n + 2));
  std::vector<double> s = grid.to_samples(q);
  double cube = 0.0;
  for (double x : s) cube += x * x * x;
  cube /= double(s.size());
  return 0.5 * grad - cube / 6.0;
}

const FourierField& Trajectory::state_at(double t) const {
  for (size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return states[i];
  throw std::out_of_range("Trajectory::state_at: no state stored at t = " + format_double(t));
}

Trajectory evolve_kdv(const FourierField& q0, const SolverConfig& cfg) {
  if (cfg.N < 8) throw std::invalid_argument("SolverConfig: N must be >= 8");
  check_real_input(q0, "evolve_kdv");
  const long long steps = step_count(cfg.T, cfg.dt);
  const int N = cfg.N;

  Trajectory out;
  out.cfg = cfg;
  FourierField q = q0.truncated(N);
  out.a = q(0).real();
  const double a = out.a;

  // nonlinear CFL of the integrating-factor RK4 scheme (the k^3 part is exact)
  const double amp = [&] {
    Grid g(next_fast_size(2 * N + 2));
    double m = 0.0;
    for (double x : g.to_samples(q)) m = std::max(m, std::abs(x));
    return m;
  }();
  if (cfg.dt * N * std::max(amp, 1e-12) > 2.8)
    std::fprintf(stderr,
                 "evolve_kdv: warning: dt=%g exceeds the nonlinear CFL ~2.8/(N max|q|)=%g; "
                 "expect instability\n",
                 cfg.dt, 2.8 / (N * std::max(amp, 1e-12)));

  std::vector<double> psi(2 * size_t(N) + 1);
  for (int k = -N; k <= N; ++k) psi[size_t(k + N)] = (double(k) * k * k) - a * k;

  const int M = cfg.dealias == Dealias::pad32 ? next_fast_size(3 * N + 2)
                                              : next_fast_size(2 * N + 1);
  Grid grid(M);

  std::vector<cplx> v(2 * size_t(N) + 1);
  for (int k = -N; k <= N; ++k) v[size_t(k + N)] = q(k);

  // fixed Lawson phase tables for the k^3 - a k symbol
  std::vector<cplx> Eh(2 * size_t(N) + 1), E1(2 * size_t(N) + 1);
  for (int k = -N; k <= N; ++k) {
    Eh[size_t(k + N)] = std::polar(1.0, psi[size_t(k + N)] * (0.5 * cfg.dt));
    E1[size_t(k + N)] = std::polar(1.0, psi[size_t(k + N)] * cfg.dt);
  }

  FourierField p(N), p2(N);
  std::vector<double> sbuf;
  auto rhs = [&](const std::vector<cplx>& y, std::vector<cplx>& dy) {
    // mean removed, square on the grid, take -(1/2) d/dx of the projection
    for (int k = -N; k <= N; ++k)
      p(k) = (k == 0) ? cplx(0.0, 0.0) : y[size_t(k + N)];
    grid.to_samples(p, sbuf);
    for (double& x : sbuf) x *= x;
    p2 = grid.from_samples(sbuf, N);
    for (int k = -N; k <= N; ++k)
      dy[size_t(k + N)] = (k == 0) ? cplx(0.0, 0.0) : cplx(0.0, -0.5 * k) * p2(k);
  };

  const long long monitor = cfg.monitor_every > 0 ? cfg.monitor_every
                                                  : std::max(1LL, steps / 256);
  const long long store = cfg.store_every;
  const double p0_l2 = std::sqrt(std::max(l2sq_band(v) - a * a, 0.0));

  auto snapshot = [&](double, const std::vector<cplx>& y) {
    FourierField qt(N);
    for (int k = -N; k <= N; ++k) qt(k) = y[size_t(k + N)];
    // psi(0) = 0 and the mode-0 RHS vanishes identically, so y[N] is the
    // initial mean bitwise; keep it untouched so tests can observe that.
    qt.enforce_hermitian();
    return qt;
  };

  auto observe = [&](long long s, double t, const std::vector<cplx>& y) {
    const bool last = (s == steps);
    if (s == 0 || last || (store > 0 && s % store == 0)) {
      out.times.push_back(t);
      out.states.push_back(snapshot(t, y));
    }
    if (s == 0 || last || s % monitor == 0) {
      const FourierField qt = (!out.states.empty() &&
                               out.times.back() == t)
                                  ? out.states.back()
                                  : snapshot(t, y);
      ConservationSample cs;
      cs.t = t;
      cs.momentum = y[size_t(N)].real();
      cs.l2sq = momentum_l2sq(qt);
      cs.energy = kdv_energy(qt);
      out.conservation.push_back(cs);
    }
    // blow-up guard on the mean-zero part
    const double pl2 = std::sqrt(std::max(l2sq_band(y) - a * a, 0.0));
    if (pl2 > cfg.blowup_factor * std::max(p0_l2, 1e-12) + 1e-12) {
      out.aborted = true;
      return false;
    }
    return true;
  };

  lawson_rk4_drive(v, cfg.dt, steps, Eh, E1, rhs, observe);
  return out;
}

FourierField galilean_shift_state(const FourierField& q, double c, double t) {
  FourierField out = q;
  for (int k = -q.N(); k <= q.N(); ++k)
    if (k != 0) out(k) = q(k) * std::polar(1.0, -double(k) * c * t);
  out(0) += c;
  return out;
}

Trajectory galilean_shift(const Trajectory& traj, double c) {
  Trajectory out = traj;
  out.a = traj.a + c;
  for (size_t i = 0; i < traj.states.size(); ++i)
    out.states[i] = galilean_shift_state(traj.states[i], c, traj.times[i]);
  for (auto& cs : out.conservation) {
    cs.momentum += c;
    cs.l2sq += 2.0 * c * traj.a + c * c;  // |q_0 + c|^2 - |q_0|^2
    cs.energy = 0.0;                      // not transported (recompute if needed)
  }
  return out;
}

FourierField airy_flow(const FourierField& g, double t, double a) {
  FourierField out = g;
  for (int k = -g.N(); k <= g.N(); ++k)
    out(k) = g(k) * std::polar(1.0, ((double(k) * k * k) - a * k) * t);
  return out;
}

FourierField build_G(const FourierField& Phi) {
  require_mean_zero(Phi, "build_G");
  // G = -(2/3) Phi * dx^{-1} Phi; exact via truncated convolution on band 2N
  return (-2.0 / 3.0) * convolve(antiderivative(Phi), Phi, 2 * Phi.N());
}

FourierField apply_P_G(const FourierField& G, const FourierField& u) {
  FourierField out = convolve(G, u, u.N());
  out(0) = cplx(0.0, 0.0);
  return out;
}

FourierField apply_P(const FourierField& u, const FourierField& Phi) {
  require_mean_zero(u, "apply_P");
  return apply_P_G(build_G(Phi), u);
}

Trajectory modified_flow(const FourierField& g, double a, const FourierField& Phi,
                         const SolverConfig& cfg, ModifiedRoute route) {
  if (cfg.N < 8) throw std::invalid_argument("SolverConfig: N must be >= 8");
  check_real_input(g, "modified_flow");
  require_mean_zero(g, "modified_flow");
  require_mean_zero(Phi, "modified_flow(Phi)");
  const long long steps = step_count(cfg.T, cfg.dt);
  const int N = cfg.N;
  const int NPhi = Phi.N();

  Trajectory out;
  out.cfg = cfg;
  out.a = a;

  std::vector<double> psi(2 * size_t(N) + 1);
  for (int k = -N; k <= N; ++k) psi[size_t(k + N)] = (double(k) * k * k) - a * k;
  const FourierField G = build_G(Phi);

  std::vector<cplx> y(2 * size_t(N) + 1);
  {
    FourierField u0 = g.truncated(N);
    for (int k = -N; k <= N; ++k) y[size_t(k + N)] = u0(k);
    y[size_t(N)] = cplx(0.0, 0.0);
  }

  // grid large enough that the pointwise product G*u is alias-free on band N
  Grid grid(next_fast_size(2 * N + 2 * NPhi + 2));

  FourierField ubuf(N);
  auto apply_P_direct = [&](const std::vector<cplx>& coeffs, std::vector<cplx>& dest) {
    // literal convolution sum; kept as the independent route's algorithm
    for (int k = -N; k <= N; ++k) ubuf(k) = coeffs[size_t(k + N)];
    ubuf(0) = cplx(0.0, 0.0);
    FourierField w = apply_P_G(G, ubuf);
    for (int k = -N; k <= N; ++k) dest[size_t(k + N)] = w(k);
    dest[size_t(N)] = cplx(0.0, 0.0);
  };

  std::function<void(double, const std::vector<cplx>&, std::vector<cplx>&)> rhs;
  bool state_is_v = false;
  const bool lawson = route == ModifiedRoute::integrating_factor;

  switch (route) {
    case ModifiedRoute::integrating_factor:
      // handled below by lawson_rk4_drive; the state stays untwisted
      break;
    case ModifiedRoute::grid_direct: {
      const double maxpsi = std::abs(psi[0]);
      if (cfg.dt * maxpsi > 2.8)
        std::fprintf(stderr,
                     "modified_flow(grid_direct): warning: dt=%g exceeds the stiff RK4 "
                     "stability limit ~2.8/max|psi|=%g\n",
                     cfg.dt, 2.8 / maxpsi);
      rhs = [&, apply_P_direct](double t, const std::vector<cplx>& yu, std::vector<cplx>& dy) {
        (void)t;
        apply_P_direct(yu, dy);
        for (int k = -N; k <= N; ++k)
          dy[size_t(k + N)] += cplx(0.0, psi[size_t(k + N)]) * yu[size_t(k + N)];
        dy[size_t(N)] = cplx(0.0, 0.0);
      };
      break;
    }
    case ModifiedRoute::spectral_vspace: {
      state_is_v = true;
      // literal phased triple sum (2i/3) sum_{k1+k2+k3=k} e3 (S1/k1) S2 v3,
      // e3 = E[k1]E[k2]E[k3] conj(E[k]), E[j] = e^{i t j^3}, S_j = Phi_j e^{-i psi(j) t}
      rhs = [&, NPhi](double t, const std::vector<cplx>& yv, std::vector<cplx>& dy) {
        const int EB = std::max(N, 2 * NPhi + N);
        std::vector<cplx> E(2 * size_t(EB) + 1), S(2 * size_t(NPhi) + 1);
        for (int j = -EB; j <= EB; ++j)
          E[size_t(j + EB)] = std::polar(1.0, t * double(j) * j * j);
        for (int j = -NPhi; j <= NPhi; ++j)
          S[size_t(j + NPhi)] =
              Phi.get(j) * std::polar(1.0, -((double(j) * j * j) - a * j) * t);
        for (int k = -N; k <= N; ++k) {
          if (k == 0) {
            dy[size_t(N)] = cplx(0.0, 0.0);
            continue;
          }
          cplx acc(0.0, 0.0);
          for (int k1 = -NPhi; k1 <= NPhi; ++k1) {
            if (k1 == 0) continue;
            const cplx s1 = S[size_t(k1 + NPhi)] / double(k1) * E[size_t(k1 + EB)];
            if (s1 == cplx(0.0, 0.0)) continue;
            for (int k2 = -NPhi; k2 <= NPhi; ++k2) {
              if (k2 == 0) continue;
              const int k3 = k - k1 - k2;
              if (k3 == 0 || std::abs(k3) > N) continue;
              acc += s1 * (S[size_t(k2 + NPhi)] * E[size_t(k2 + EB)]) *
                     (yv[size_t(k3 + N)] * E[size_t(k3 + EB)]);
            }
          }
          dy[size_t(k + N)] = cplx(0.0, 2.0 / 3.0) * acc * std::conj(E[size_t(k + EB)]);
        }
      };
      break;
    }
  }

  const long long monitor = cfg.monitor_every > 0 ? cfg.monitor_every
                                                  : std::max(1LL, steps / 256);
  const long long store = cfg.store_every;
  const double u0_l2 = std::sqrt(l2sq_band(y));

  auto snapshot = [&](double t, const std::vector<cplx>& yv) {
    FourierField ut(N);
    for (int k = -N; k <= N; ++k) {
      cplx c = yv[size_t(k + N)];
      if (state_is_v && k != 0) c *= std::polar(1.0, psi[size_t(k + N)] * t);
      ut(k) = c;
    }
    ut(0) = cplx(0.0, 0.0);
    ut.enforce_hermitian();
    return ut;
  };

  auto observe = [&](long long s, double t, const std::vector<cplx>& yv) {
    const bool last = (s == steps);
    if (s == 0 || last || (store > 0 && s % store == 0)) {
      out.times.push_back(t);
      out.states.push_back(snapshot(t, yv));
    }
    if (s == 0 || last || s % monitor == 0) {
      const FourierField ut = (!out.times.empty() && out.times.back() == t)
                                  ? out.states.back()
                                  : snapshot(t, yv);
      ConservationSample cs;
      cs.t = t;
      cs.momentum = ut(0).real();
      cs.l2sq = momentum_l2sq(ut);
      double h1 = 0.0;
      for (int k = -N; k <= N; ++k) h1 += (1.0 + double(k) * k) * std::norm(ut(k));
      cs.energy = h1;
      out.conservation.push_back(cs);
    }
    if (std::sqrt(l2sq_band(yv)) > cfg.blowup_factor * std::max(u0_l2, 1e-12) + 1e-12) {
      out.aborted = true;
      return false;
    }
    return true;
  };

  if (lawson) {
    // P u evaluated as the pointwise product G(x) u(x) on the padded grid
    // (alias-free for band N); the stiff phases live in the Lawson tables.
    std::vector<cplx> Eh(2 * size_t(N) + 1), E1(2 * size_t(N) + 1);
    for (int k = -N; k <= N; ++k) {
      Eh[size_t(k + N)] = std::polar(1.0, psi[size_t(k + N)] * (0.5 * cfg.dt));
      E1[size_t(k + N)] = std::polar(1.0, psi[size_t(k + N)] * cfg.dt);
    }
    const std::vector<double> Gs = grid.to_samples(G);
    std::vector<double> sbuf;
    FourierField w(N);
    auto rhs_l = [&](const std::vector<cplx>& yu, std::vector<cplx>& dy) {
      for (int k = -N; k <= N; ++k) ubuf(k) = yu[size_t(k + N)];
      ubuf(0) = cplx(0.0, 0.0);
      grid.to_samples(ubuf, sbuf);
      for (size_t i = 0; i < sbuf.size(); ++i) sbuf[i] *= Gs[i];
      w = grid.from_samples(sbuf, N);
      for (int k = -N; k <= N; ++k) dy[size_t(k + N)] = w(k);
      dy[size_t(N)] = cplx(0.0, 0.0);
    };
    lawson_rk4_drive(y, cfg.dt, steps, Eh, E1, rhs_l, observe);
  } else {
    rk4_drive(y, cfg.dt, steps, rhs, observe);
  }
  return out;
}

// ---------------------------------------------------------------------------
// serialization: directory with index.json, sample_%04zu.json, conservation.csv
// ---------------------------------------------------------------------------

void Trajectory::save(const std::string& dir) const {
  fs::create_directories(dir);
  nlohmann::json idx;
  idx["a"] = a;
  idx["aborted"] = aborted;
  idx["cfg"] = {{"N", cfg.N},
                {"dt", cfg.dt},
                {"T", cfg.T},
                {"dealias", cfg.dealias == Dealias::pad32 ? "pad32" : "truncate23"},
                {"monitor_every", cfg.monitor_every},
                {"store_every", cfg.store_every},
                {"blowup_factor", cfg.blowup_factor}};
  idx["times"] = times;
  idx["n_samples"] = times.size();
  {
    std::ofstream f(fs::path(dir) / "index.json");
    if (!f) throw std::runtime_error("Trajectory::save: cannot write " + dir);
    f << idx.dump(1) << "\n";
  }
  for (size_t i = 0; i < states.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04zu.json", i);
    save_field(states[i], (fs::path(dir) / name).string());
  }
  {
    std::ofstream f(fs::path(dir) / "conservation.csv");
    f << "t,momentum,l2sq,energy\n";
    for (const auto& cs : conservation)
      f << format_double(cs.t) << "," << format_double(cs.momentum) << ","
        << format_double(cs.l2sq) << "," << format_double(cs.energy) << "\n";
  }
}

Trajectory Trajectory::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "index.json");
  if (!f) throw std::runtime_error("Trajectory::load: cannot read " + dir + "/index.json");
  nlohmann::json idx = nlohmann::json::parse(f);
  Trajectory out;
  out.a = idx.at("a").get<double>();
  out.aborted = idx.at("aborted").get<bool>();
  const auto& jc = idx.at("cfg");
  out.cfg.N = jc.at("N").get<int>();
  out.cfg.dt = jc.at("dt").get<double>();
  out.cfg.T = jc.at("T").get<double>();
  out.cfg.dealias =
      jc.at("dealias").get<std::string>() == "pad32" ? Dealias::pad32 : Dealias::truncate23;
  out.cfg.monitor_every = jc.at("monitor_every").get<int>();
  out.cfg.store_every = jc.at("store_every").get<int>();
  out.cfg.blowup_factor = jc.at("blowup_factor").get<double>();
  out.times = idx.at("times").get<std::vector<double>>();
  for (size_t i = 0; i < out.times.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04zu.json", i);
    out.states.push_back(load_field((fs::path(dir) / name).string()));
  }
  std::ifstream csv(fs::path(dir) / "conservation.csv");
  if (csv) {
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
      ConservationSample cs;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &cs.t, &cs.momentum, &cs.l2sq,
                      &cs.energy) == 4)
        out.conservation.push_back(cs);
    }
  }
  return out;
}

}  // namespace knf
