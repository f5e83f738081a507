// Experiment harness: high-band data generation, growth fits, INI configs,
// one small superposition cell with its record round-trip, suite-vs-standalone
// bit identity, and frame independence of the measured error series.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "knf/cnoidal.hpp"
#include "knf/common.hpp"
#include "knf/harness.hpp"

using namespace knf;
namespace fs = std::filesystem;

TEST_CASE("generate_hf_data: norm, eps window, support, determinism") {
  auto [g, eps] = generate_hf_data(16, 0.25, 7, 64);
  CHECK(std::abs(l2_norm(g) - 1.0) < 1e-14);
  CHECK(std::abs(g.mean()) == 0.0);
  CHECK(g.hermitian_defect() < 1e-15);

  // ||g||_{H^-s} for unit-l2 data supported on [N0, 2N0] lands between the
  // band edges' weights
  const double lo = std::pow(32.0, -0.25), hi = std::pow(16.0, -0.25);
  CHECK(eps >= lo - 1e-15);
  CHECK(eps <= hi + 1e-15);

  for (int k = -g.N(); k <= g.N(); ++k) {
    const bool in_band = std::abs(k) >= 16 && std::abs(k) <= 32;
    if (in_band)
      CHECK(std::abs(g(k)) > 0.0);
    else
      CHECK(std::abs(g(k)) == 0.0);
  }

  auto [g2, eps2] = generate_hf_data(16, 0.25, 7, 64);
  CHECK(l2_norm(g - g2) == 0.0);
  CHECK(eps == eps2);
  auto [g3, eps3] = generate_hf_data(16, 0.25, 8, 64);
  (void)eps3;
  CHECK(l2_norm(g - g3) > 1e-3);

  CHECK_THROWS(generate_hf_data(16, 0.25, 1, 24));  // 2 N0 > N
  CHECK_THROWS(generate_hf_data(2, 0.25, 1, 64));   // N0 too small
  CHECK_THROWS(generate_hf_data(16, 0.8, 1, 64));   // s outside (0, 1/2)
}

TEST_CASE("fit_growth recovers a synthetic C1 e^{C2 t} eps law") {
  const double eps = 0.3;
  std::vector<double> t, err;
  for (int i = 0; i <= 12; ++i) {
    t.push_back(0.1 * i);
    err.push_back(3.0 * std::exp(2.0 * 0.1 * i) * eps);
  }
  const GrowthFit f = fit_growth(t, err, eps, 1e-14);
  CHECK_FALSE(f.vacuous);
  CHECK(f.n_used == 13);
  CHECK(std::abs(f.C1 - 3.0) < 1e-6);
  CHECK(std::abs(f.C2 - 2.0) < 1e-6);
  CHECK(f.rms < 1e-10);

  // a series that never rises above 10x the solver floor carries no signal
  const GrowthFit fv = fit_growth(t, std::vector<double>(t.size(), 1e-15), eps, 1e-10);
  CHECK(fv.vacuous);
  CHECK(fv.n_used == 0);

  CHECK_THROWS(fit_growth(t, std::vector<double>(3, 1.0), eps, 0.0));
  CHECK_THROWS(fit_growth(t, err, 0.0, 0.0));
}

TEST_CASE("INI configs: fields, cell matrix, and error reporting") {
  const std::string text =
      "# comment\n"
      "[suite]\n"
      "s = 0.25\n"
      "bands = 8 12\n"
      "seeds = 1 2\n"
      "T = 0.25\n"
      "samples = 6\n"
      "[wave]\n"
      "a = 8 # inline comment\n"
      "c = 0\n"
      "tol = 1e-12\n"
      "[solver]\n"
      "N = 64\n"
      "dt = 1e-3\n"
      "dt_band_12 = 2.5e-4\n"
      "dealias = pad32\n"
      "route = integrating_factor\n";
  const SuiteConfig cfg = SuiteConfig::parse_text(text);
  CHECK(cfg.s_list == std::vector<double>{0.25});
  CHECK(cfg.bands == std::vector<int>{8, 12});
  CHECK(cfg.seeds.size() == 2);
  CHECK(cfg.samples == 6);
  CHECK(cfg.wave_a == 8.0);
  CHECK(cfg.solver.N == 64);
  CHECK(cfg.solver.dt == 1e-3);
  REQUIRE(cfg.dt_bands.size() == 1);
  CHECK(cfg.dt_bands.at(12) == 2.5e-4);

  const auto cells = cfg.cells();
  REQUIRE(cells.size() == 4);  // 2 bands x 2 seeds
  CHECK(cells[0].N0 == 8);
  CHECK(cells[0].seed == 1);
  CHECK(cells[1].seed == 2);  // seed varies fastest
  CHECK(cells[2].N0 == 12);
  CHECK(cell_name(cells[0]) == "s0.25_N08_seed1_T0.25");
  CHECK(cells[0].solver.dt == 1e-3);    // no override for band 8
  CHECK(cells[2].solver.dt == 2.5e-4);  // dt_band_12 applies to band 12 only
  CHECK(cells[3].solver.dt == 2.5e-4);

  CHECK_THROWS_WITH_AS(SuiteConfig::parse_text("[suite]\nfoo = 1\n"),
                       doctest::Contains("unknown key"), std::invalid_argument);
  CHECK_THROWS(SuiteConfig::parse_text("[bogus]\ns = 1\n"));
  CHECK_THROWS(SuiteConfig::parse_text("[solver]\ndealias = bogus\n"));
  // dt_band_ keys need a positive integer suffix
  CHECK_THROWS_WITH_AS(SuiteConfig::parse_text("[solver]\ndt_band_x3 = 1e-4\n"),
                       doctest::Contains("unknown key"), std::invalid_argument);
  CHECK_THROWS(SuiteConfig::parse_text("[solver]\ndt_band_0 = 1e-4\n"));
  // ...and stay suite-only: a single-cell spec has exactly one band
  CHECK_THROWS(parse_spec_text("[solver]\ndt_band_8 = 1e-4\n"));

  const ExperimentSpec sp = parse_spec_text(
      "[experiment]\ns=0.3\nN0=8\nseed=5\nT=0.5\nsamples=4\n[solver]\nN=48\ndt=2e-3\n");
  CHECK(sp.s == 0.3);
  CHECK(sp.N0 == 8);
  CHECK(sp.seed == 5);
  CHECK(sp.samples == 4);
  CHECK(sp.solver.N == 48);
}

TEST_CASE("ExperimentSpec::validate rejects inconsistent requests") {
  ExperimentSpec ok;
  ok.s = 0.25;
  ok.N0 = 8;
  ok.T = 0.25;
  ok.solver.N = 64;
  ok.solver.dt = 1e-3;
  CHECK_NOTHROW(ok.validate());

  auto expect_throw = [&](auto&& tweak) {
    ExperimentSpec bad = ok;
    tweak(bad);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  };
  expect_throw([](ExperimentSpec& s) { s.s = 0.7; });
  expect_throw([](ExperimentSpec& s) { s.N0 = 2; });
  expect_throw([](ExperimentSpec& s) { s.N0 = 20; });  // 4 N0 > N
  expect_throw([](ExperimentSpec& s) { s.T = 0.0; });
  expect_throw([](ExperimentSpec& s) { s.solver.dt = -1.0; });
  expect_throw([](ExperimentSpec& s) { s.samples = 0; });
}

TEST_CASE("superposition cell: zero initial error, record round-trip") {
  ExperimentSpec spec;
  spec.s = 0.25;
  spec.N0 = 8;
  spec.seed = 1;
  spec.T = 0.25;
  spec.samples = 6;
  spec.wave_a = 8.0;
  spec.wave_c = 0.0;
  spec.solver.N = 64;
  spec.solver.dt = 1e-3;
  spec.out_dir = "/tmp/knf_test_harness/cell";
  fs::remove_all("/tmp/knf_test_harness");

  const ExperimentRecord rec = run_superposition(spec);
  REQUIRE(rec.t.size() >= 6);
  CHECK(rec.t.front() == 0.0);
  CHECK(rec.t.back() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(rec.eps > 0.0);

  // at t = 0 the superposed state is exactly wave + data: no error, no gap
  CHECK(rec.err_L.front() <= 1e-12);
  CHECK(rec.err_L1.front() <= 1e-12);
  CHECK(rec.gap.front() <= 1e-12);

  // thereafter the error is nonzero but far below O(1); the wave-only floor
  // is orders of magnitude smaller still
  CHECK(rec.err_L.back() > 0.0);
  CHECK(rec.err_L.back() < 1.0);
  CHECK(rec.err_L1.back() > 0.0);
  CHECK(rec.err_L1.back() < 1.0);
  CHECK(rec.solver_floor < 1e-6);
  CHECK(rec.solver_floor < 0.01 * rec.err_L.back());
  for (double d : rec.energy_drift) CHECK(d < 0.05);  // coarse probe dt

  const ExperimentRecord back = ExperimentRecord::load(spec.out_dir);
  CHECK(back.eps == rec.eps);
  CHECK(back.solver_floor == rec.solver_floor);
  CHECK(back.t == rec.t);
  CHECK(back.err_L == rec.err_L);
  CHECK(back.err_L1 == rec.err_L1);
  CHECK(back.gap == rec.gap);
  CHECK(back.fit_L.C1 == rec.fit_L.C1);
  CHECK(back.fit_L.C2 == rec.fit_L.C2);
  CHECK(back.spec.N0 == spec.N0);
  CHECK(back.spec.seed == spec.seed);
  CHECK(back.spec.solver.N == spec.solver.N);

  // determinism: rerunning the same spec reproduces the series bitwise
  const ExperimentRecord again = run_superposition(spec);
  CHECK(again.err_L == rec.err_L);
  CHECK(again.gap == rec.gap);
}

TEST_CASE("measured series are invariant under a Galilean boost of the wave") {
  // (a, 0) and (a - c^2/2, c) lie on the same orbit family: the moving wave
  // is the resting one boosted by -c (profile lowered by c, traveling as
  // f(x + ct)); both reduce to the identical resting problem.
  const CnoidalWave w0 = build_cnoidal(8.0, 0.0, 1e-12);
  const CnoidalWave w1 = build_cnoidal(7.5, 1.0, 1e-12);
  REQUIRE(w1.phi.N() == w0.phi.N());
  CHECK(std::abs(w1.mean - (w0.mean - 1.0)) < 1e-10);
  for (int k = 1; k <= w0.phi.N(); ++k)
    CHECK(std::abs(w1.phi.get(k) - w0.phi.get(k)) < 1e-10);

  // the harness reduces both to the same resting frame, so the error series
  // agree to the accuracy of the two independent wave constructions
  ExperimentSpec spec;
  spec.s = 0.25;
  spec.N0 = 8;
  spec.seed = 3;
  spec.T = 0.25;
  spec.samples = 6;
  spec.wave_a = 8.0;
  spec.wave_c = 0.0;
  spec.solver.N = 64;
  spec.solver.dt = 5e-4;
  const ExperimentRecord rest = run_superposition(spec);

  ExperimentSpec boosted = spec;
  boosted.wave_a = 7.5;
  boosted.wave_c = 1.0;
  const ExperimentRecord moving = run_superposition(boosted);

  CHECK(moving.eps == rest.eps);  // data depends only on (N0, s, seed)
  REQUIRE(moving.t.size() == rest.t.size());
  for (std::size_t i = 0; i < rest.t.size(); ++i) {
    CHECK(std::abs(moving.err_L[i] - rest.err_L[i]) < 1e-7);
    CHECK(std::abs(moving.gap[i] - rest.gap[i]) < 1e-7);
  }
}

TEST_CASE("suite: cell records are bit-identical to standalone runs") {
  fs::remove_all("/tmp/knf_test_harness/suite");
  fs::remove_all("/tmp/knf_test_harness/alone");

  SuiteConfig cfg;
  cfg.s_list = {0.25};
  cfg.bands = {8};
  cfg.seeds = {1, 2};
  cfg.T_list = {0.25};
  cfg.samples = 6;
  cfg.wave_a = 8.0;
  cfg.solver.N = 64;
  cfg.solver.dt = 1e-3;
  const SuiteSummary sum = run_suite(cfg, "/tmp/knf_test_harness/suite", 2);
  REQUIRE(sum.cells.size() == 2);
  CHECK(sum.cells[0].ok);
  CHECK(sum.cells[1].ok);
  CHECK_FALSE(sum.verdicts.empty());
  CHECK(fs::exists("/tmp/knf_test_harness/suite/summary.csv"));
  CHECK(fs::exists("/tmp/knf_test_harness/suite/verdicts.json"));

  // the record of cell (seed 1), rerun standalone with its own output
  // directory, matches byte for byte: results carry no trace of where they
  // were produced
  ExperimentSpec alone = sum.cells[0].spec;
  alone.out_dir = "/tmp/knf_test_harness/alone";
  run_superposition(alone);
  auto slurp = [](const std::string& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const std::string standalone = slurp("/tmp/knf_test_harness/alone/record.json");
  const std::string in_suite = slurp("/tmp/knf_test_harness/suite/" +
                                     cell_name(sum.cells[0].spec) + "/record.json");
  REQUIRE_FALSE(standalone.empty());
  CHECK(standalone == in_suite);

  // an empty experiment matrix is a successful (if silent) suite
  SuiteConfig empty = cfg;
  empty.seeds.clear();
  const SuiteSummary none = run_suite(empty, "/tmp/knf_test_harness/empty", 1);
  CHECK(none.cells.empty());
  CHECK(none.all_pass());
}
