// AGM elliptic integrals and Jacobi functions.  Frozen reference values were
// computed independently (SciPy 1.x, scipy.special.ellipk/ellipe/ellipj with
// the same parameter-m convention) and pasted as literals.
#include <cmath>

#include "doctest.h"
#include "knf/common.hpp"
#include "knf/elliptic.hpp"

using namespace knf;

TEST_CASE("agm basics") {
  CHECK(agm(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(agm(4.0, 4.0) == doctest::Approx(4.0).epsilon(1e-15));
  // agm(1, sqrt(2)-ish) classical value: agm(1, sqrt(1/2)) = pi/(2 K(1/2))
  CHECK(agm(1.0, std::sqrt(0.5)) ==
        doctest::Approx(kPi / (2.0 * 1.8540746773013719)).epsilon(1e-14));
}

TEST_CASE("complete elliptic integrals against frozen references") {
  CHECK(ellint_K(0.0) == doctest::Approx(kPi / 2.0).epsilon(1e-15));
  CHECK(ellint_E(0.0) == doctest::Approx(kPi / 2.0).epsilon(1e-15));
  CHECK(ellint_E(1.0) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK(ellint_K(0.5) == doctest::Approx(1.8540746773013719).epsilon(1e-14));
  CHECK(ellint_K(0.25) == doctest::Approx(1.685750354812596).epsilon(1e-14));
  CHECK(ellint_E(0.25) == doctest::Approx(1.4674622093394272).epsilon(1e-14));
  // parameters of the two waves used throughout the test suite
  CHECK(ellint_K(0.7721142626071247) == doctest::Approx(2.198131961768672).epsilon(1e-14));
  CHECK(ellint_E(0.7721142626071247) == doctest::Approx(1.1969212075373328).epsilon(1e-14));
  CHECK(ellint_K(0.9705245161635802) == doctest::Approx(3.1644708138811053).epsilon(1e-14));
  CHECK(ellint_E(0.9705245161635802) == doctest::Approx(1.0393736982829127).epsilon(1e-14));
}

TEST_CASE("Legendre relation E(m)K(1-m) + E(1-m)K(m) - K(m)K(1-m) = pi/2") {
  for (double m : {0.1, 0.3, 0.5, 0.77, 0.93}) {
    const double lhs = ellint_E(m) * ellint_K(1.0 - m) +
                       ellint_E(1.0 - m) * ellint_K(m) -
                       ellint_K(m) * ellint_K(1.0 - m);
    CHECK(lhs == doctest::Approx(kPi / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("jacobi functions against frozen references") {
  const JacobiSCD a = jacobi_sncndn(0.7, 0.3);
  CHECK(a.sn == doctest::Approx(0.6323047763108646).epsilon(1e-13));
  CHECK(a.cn == doctest::Approx(0.7747197363269298).epsilon(1e-13));
  CHECK(a.dn == doctest::Approx(0.9381136396814304).epsilon(1e-13));

  const JacobiSCD b = jacobi_sncndn(1.9, 0.92);
  CHECK(b.sn == doctest::Approx(0.9706574805623719).epsilon(1e-13));
  CHECK(b.cn == doctest::Approx(0.2404663290947582).epsilon(1e-12));
  CHECK(b.dn == doctest::Approx(0.3649631912865239).epsilon(1e-12));
}

TEST_CASE("degenerate parameters reduce to circular/hyperbolic functions") {
  for (double z : {-1.3, 0.0, 0.4, 2.2}) {
    CHECK(jacobi_cn(z, 0.0) == doctest::Approx(std::cos(z)).epsilon(1e-13));
    const JacobiSCD j = jacobi_sncndn(z, 0.0);
    CHECK(j.sn == doctest::Approx(std::sin(z)).epsilon(1e-13));
    CHECK(j.dn == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(jacobi_cn(z, 1.0) == doctest::Approx(1.0 / std::cosh(z)).epsilon(1e-12));
  }
}

TEST_CASE("pythagorean identities on a grid of arguments") {
  for (double m : {0.2, 0.6, 0.97}) {
    for (int i = -8; i <= 8; ++i) {
      const double z = 0.45 * i;
      const JacobiSCD j = jacobi_sncndn(z, m);
      CHECK(j.sn * j.sn + j.cn * j.cn == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(j.dn * j.dn + m * j.sn * j.sn == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("quarter- and full-period structure") {
  for (double m : {0.3, 0.7721142626071247}) {
    const double K = ellint_K(m);
    CHECK(std::abs(jacobi_cn(K, m)) < 1e-13);          // cn vanishes at K
    CHECK(jacobi_sncndn(K, m).sn == doctest::Approx(1.0).epsilon(1e-13));
    const JacobiSCD at = jacobi_sncndn(0.37, m);
    const JacobiSCD sh = jacobi_sncndn(0.37 + 4.0 * K, m);  // 4K periodicity
    CHECK(sh.sn == doctest::Approx(at.sn).epsilon(1e-10));
    CHECK(sh.cn == doctest::Approx(at.cn).epsilon(1e-10));
    CHECK(sh.dn == doctest::Approx(at.dn).epsilon(1e-10));
  }
}

TEST_CASE("derivative relation d/dz sn = cn dn (finite difference)") {
  const double m = 0.6, z = 0.8, h = 1e-5;
  const double fd =
      (jacobi_sncndn(z + h, m).sn - jacobi_sncndn(z - h, m).sn) / (2.0 * h);
  const JacobiSCD j = jacobi_sncndn(z, m);
  CHECK(fd == doctest::Approx(j.cn * j.dn).epsilon(1e-8));
}
