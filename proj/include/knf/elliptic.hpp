// ============================================================================
// elliptic.hpp -- arithmetic-geometric-mean evaluation of the complete
// elliptic integral K and the Jacobi functions sn/cn/dn.
//
// Parameter convention: everywhere `m` is the PARAMETER (modulus squared,
// m = k^2 in modulus notation), m in [0, 1].  With this convention
//   cn(z, 0) = cos z,   cn(z, 1) = sech z,   cn(K(m), m) = 0,
// and the cnoidal wave formula uses m = (b3-b2)/(b3-b1) directly.
//
// Method: descending AGM ladder a_{n+1}=(a_n+b_n)/2, b_{n+1}=sqrt(a_n b_n),
// c_{n+1}=(a_n-b_n)/2 from (1, sqrt(1-m), sqrt(m)); then
//   K(m) = pi / (2 * agm(1, sqrt(1-m)))
// and the Gauss backward phi-recursion phi_{n-1} = (phi_n + asin(c_n/a_n *
// sin phi_n))/2 from phi_n = 2^n a_n z gives sn = sin(phi_0), cn = cos(phi_0),
// dn = cos(phi_0)/cos(phi_1 - phi_0).
// ============================================================================
#pragma once

namespace knf {

// Arithmetic-geometric mean of a0 >= b0 >= 0.
double agm(double a0, double b0);

// Complete elliptic integral of the first kind, parameter m in [0, 1).
double ellint_K(double m);

// Complete elliptic integral of the second kind, parameter m in [0, 1].
// AGM ladder identity: E = K * (1 - sum_{n>=0} 2^{n-1} c_n^2) with c_0^2 = m.
double ellint_E(double m);

struct JacobiSCD {
  double sn, cn, dn;
};

// Jacobi elliptic functions of real argument, parameter m in [0, 1].
JacobiSCD jacobi_sncndn(double z, double m);
double jacobi_cn(double z, double m);

}  // namespace knf
