// Coefficient-space conventions: norms, convolution, calculus, serialization.
// The Parseval and convolution tests are dual-route checks against the FFT
// grid, so a convention drift in either representation shows up here.
#include <cmath>
#include <random>

#include "doctest.h"
#include "knf/common.hpp"
#include "knf/fft_grid.hpp"
#include "knf/fourier_field.hpp"

using namespace knf;

namespace {

FourierField random_real_field(int band, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  FourierField u(band);
  u(0) = cplx(amp(rng), 0.0);
  for (int k = 1; k <= band; ++k) {
    u(k) = cplx(amp(rng), amp(rng)) / (1.0 + k);
    u(-k) = std::conj(u(k));
  }
  return u;
}

double rel_diff(const FourierField& a, const FourierField& b) {
  const double na = l2_norm(a);
  return l2_norm(a - b) / (na > 0 ? na : 1.0);
}

}  // namespace

TEST_CASE("band access and out-of-band get") {
  FourierField u(4);
  u(3) = cplx(1.0, 2.0);
  CHECK(u.N() == 4);
  CHECK(u.get(3) == cplx(1.0, 2.0));
  CHECK(u.get(5) == cplx(0.0, 0.0));
  CHECK(u.get(-17) == cplx(0.0, 0.0));
  CHECK_THROWS_AS(FourierField(-1), std::invalid_argument);
}

TEST_CASE("hermitian bookkeeping") {
  FourierField u(3);
  u(1) = cplx(0.5, -0.25);
  u(-1) = std::conj(u(1));
  CHECK(u.hermitian_defect() == doctest::Approx(0.0));
  CHECK(u.is_hermitian());

  u(-1) += cplx(0.0, 1e-3);
  CHECK_FALSE(u.is_hermitian());
  u.enforce_hermitian();
  CHECK(u.is_hermitian());
  // averaging preserves the Hermitian part
  CHECK(u(1).real() == doctest::Approx(0.5));
}

TEST_CASE("truncated extends with zeros and shrinks") {
  FourierField u = random_real_field(5, 42);
  const FourierField big = u.truncated(9);
  CHECK(big.N() == 9);
  for (int k = -9; k <= 9; ++k) CHECK(big.get(k) == u.get(k));
  const FourierField small = u.truncated(2);
  CHECK(small.N() == 2);
  for (int k = -2; k <= 2; ++k) CHECK(small.get(k) == u.get(k));
}

TEST_CASE("operator+= extends to the larger band") {
  FourierField a = random_real_field(3, 1);
  const FourierField b = random_real_field(7, 2);
  const FourierField sum = a + b;
  CHECK(sum.N() == 7);
  for (int k = -7; k <= 7; ++k) CHECK(sum.get(k) == a.get(k) + b.get(k));
}

TEST_CASE("Parseval against the grid: (1/2pi) int u^2 = sum |u_k|^2") {
  const FourierField u = random_real_field(12, 7);
  Grid grid(64);
  const std::vector<double> samples = grid.to_samples(u);
  double integral = 0.0;
  for (double s : samples) integral += s * s;
  integral /= static_cast<double>(samples.size());  // (1/2pi) int = grid mean
  CHECK(integral == doctest::Approx(l2_norm(u) * l2_norm(u)).epsilon(1e-12));
}

TEST_CASE("grid round trip is the identity on band-limited fields") {
  const FourierField u = random_real_field(10, 3);
  Grid grid(48);
  const FourierField back = grid.from_samples(grid.to_samples(u), 10);
  CHECK(rel_diff(u, back) < 1e-14);
}

TEST_CASE("sobolev norms") {
  FourierField u(3);
  u(1) = cplx(1.0, 0.0);
  u(-1) = cplx(1.0, 0.0);
  u(2) = cplx(0.0, 0.5);
  u(-2) = cplx(0.0, -0.5);

  SUBCASE("inhomogeneous weight (1+k^2)^{-s}") {
    const double s = 0.25;
    const double expect = std::sqrt(2.0 * std::pow(2.0, -s) + 2.0 * 0.25 * std::pow(5.0, -s));
    CHECK(sobolev_norm(u, s) == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("homogeneous weight |k|^{-2s}, mean-zero only") {
    const double s = 0.25;
    const double expect = std::sqrt(2.0 + 2.0 * 0.25 * std::pow(2.0, -2.0 * s));
    CHECK(sobolev_norm(u, s, Sobolev::homogeneous) ==
          doctest::Approx(expect).epsilon(1e-14));
    u(0) = cplx(0.5, 0.0);
    CHECK_THROWS_AS(sobolev_norm(u, s, Sobolev::homogeneous), std::invalid_argument);
    // s <= 0 (a positive-order norm) tolerates a mean
    CHECK_NOTHROW(sobolev_norm(u, -1.0, Sobolev::homogeneous));
  }
  SUBCASE("s = 0 reduces to l2") {
    CHECK(sobolev_norm(u, 0.0) == doctest::Approx(l2_norm(u)).epsilon(1e-14));
  }
}

TEST_CASE("convolve matches the dealiased grid product") {
  const FourierField u = random_real_field(8, 11);
  const FourierField v = random_real_field(6, 13);
  const FourierField direct = convolve(u, v, 14);
  const FourierField gridded = multiply_fields(u, v, 14);
  CHECK(rel_diff(direct, gridded) < 1e-13);

  // output band restriction just truncates
  const FourierField low = convolve(u, v, 5);
  for (int k = -5; k <= 5; ++k) CHECK(low.get(k) == direct.get(k));
}

TEST_CASE("derivative and antiderivative") {
  FourierField u = random_real_field(9, 17);
  u(0) = cplx(0.0, 0.0);  // mean-zero for the antiderivative
  const FourierField du = derivative(u);
  for (int k = -9; k <= 9; ++k)
    CHECK(du.get(k) == u.get(k) * cplx(0.0, static_cast<double>(k)));
  CHECK(rel_diff(antiderivative(du), u) < 1e-14);

  const FourierField d3 = derivative(u, 3);
  for (int k = -9; k <= 9; ++k) {
    const cplx ik(0.0, static_cast<double>(k));
    CHECK(std::abs(d3.get(k) - u.get(k) * ik * ik * ik) < 1e-12);
  }

  FourierField with_mean = u;
  with_mean(0) = cplx(1.0, 0.0);
  CHECK_THROWS_AS(antiderivative(with_mean), std::invalid_argument);
}

TEST_CASE("json round trip is exact for real fields") {
  const FourierField u = random_real_field(6, 23);
  const FourierField back = field_from_json(field_to_json(u));
  CHECK(back.N() == u.N());
  for (int k = -6; k <= 6; ++k) CHECK(back.get(k) == u.get(k));

  FourierField skew(2);
  skew(1) = cplx(1.0, 0.0);  // no matching conjugate at -1
  CHECK_THROWS(field_to_json(skew));
}

TEST_CASE("next_fast_size returns the smallest 7-smooth size") {
  auto smooth = [](int n) {
    for (int p : {2, 3, 5, 7})
      while (n % p == 0) n /= p;
    return n == 1;
  };
  for (int n : {1, 2, 11, 97, 194, 386, 770}) {
    const int m = next_fast_size(n);
    CHECK(m >= n);
    CHECK(smooth(m));
    // minimality: nothing 7-smooth in between
    for (int j = n; j < m; ++j) CHECK_FALSE(smooth(j));
  }
}

TEST_CASE("fit_line recovers an exact affine relation") {
  std::vector<double> x, y;
  for (int i = 0; i < 9; ++i) {
    x.push_back(0.3 * i);
    y.push_back(2.5 - 1.75 * x.back());
  }
  const LineFit lf = fit_line(x, y);
  CHECK(lf.slope == doctest::Approx(-1.75).epsilon(1e-12));
  CHECK(lf.intercept == doctest::Approx(2.5).epsilon(1e-12));
}
