// ============================================================================
// fourier_field.hpp -- truncated Fourier series on the 2*pi-periodic circle.
//
// Conventions (used consistently across the whole library):
//   * u(x) = sum_{|k| <= N} u_k e^{ikx};  u_k = (1/2pi) \int_0^{2pi} u e^{-ikx}
//   * products convolve: (u v)_k = sum_{m+n=k} u_m v_n
//   * real fields are Hermitian: u_{-k} = conj(u_k)
//   * all norms are coefficient norms WITHOUT 2*pi factors:
//       l2_norm(u)        = ( sum |u_k|^2 )^{1/2}
//       sobolev_norm(u,s) = ( sum |u_k|^2 (1+k^2)^{-s} )^{1/2}   (inhomogeneous)
//                         = ( sum_{k!=0} |u_k|^2 |k|^{-2s} )^{1/2} (homogeneous,
//                           defined for mean-zero fields when s > 0)
//     With these conventions Parseval reads (1/2pi) \int u^2 = l2_norm(u)^2
//     for real u (see the unit tests).
// ============================================================================
#pragma once

#include <complex>
#include <string>
#include <vector>

#include "json.hpp"

namespace knf {

using cplx = std::complex<double>;

class FourierField {
 public:
  FourierField() = default;
  explicit FourierField(int n_modes)
      : N_(n_modes), c_(checked_size(n_modes), cplx(0.0, 0.0)) {}

  int N() const { return N_; }

  // Coefficient access; operator() requires |k| <= N, get() returns 0 outside.
  cplx& operator()(int k) { return c_[static_cast<size_t>(k + N_)]; }
  const cplx& operator()(int k) const { return c_[static_cast<size_t>(k + N_)]; }
  cplx get(int k) const {
    return (k < -N_ || k > N_) ? cplx(0.0, 0.0) : c_[static_cast<size_t>(k + N_)];
  }

  cplx mean() const { return N_ >= 0 && !c_.empty() ? (*this)(0) : cplx(0.0); }

  // Largest |u_k|, and max Hermitian asymmetry |u_{-k} - conj(u_k)|.
  double max_abs() const;
  double hermitian_defect() const;
  bool is_hermitian(double tol = 1e-12) const { return hermitian_defect() <= tol * (1.0 + max_abs()); }
  void enforce_hermitian();  // average u_k and conj(u_{-k})

  // Band change: keep modes |k| <= n (zero-pad if n > N).
  FourierField truncated(int n) const;

  FourierField& operator+=(const FourierField& o);
  FourierField& operator-=(const FourierField& o);
  FourierField& operator*=(double s);

 private:
  static size_t checked_size(int n_modes) {
    if (n_modes < 0) throw std::invalid_argument("FourierField: negative band");
    return 2 * static_cast<size_t>(n_modes) + 1;
  }

  int N_ = -1;
  std::vector<cplx> c_;
};

FourierField operator+(FourierField a, const FourierField& b);
FourierField operator-(FourierField a, const FourierField& b);
FourierField operator*(double s, FourierField a);

enum class Sobolev { inhomogeneous, homogeneous };

double l2_norm(const FourierField& u);
// Norm of index -s (s > 0 measures a *negative*-order norm; s < 0 positive order).
double sobolev_norm(const FourierField& u, double s,
                    Sobolev variant = Sobolev::inhomogeneous);

// Truncated convolution (u v)_k = sum u_m v_{k-m} over stored bands,
// for output modes |k| <= n_out (default: max of the input bands).
FourierField convolve(const FourierField& u, const FourierField& v, int n_out = -1);

// d/dx: multiply mode k by (ik)^order.
FourierField derivative(const FourierField& u, int order = 1);

// The mean-zero antiderivative: mode k -> u_k/(ik), mode 0 -> 0.
// Requires a mean-zero input (throws otherwise).
FourierField antiderivative(const FourierField& u);

// ---- serialization ---------------------------------------------------------
// JSON layout {"N":n,"mean_zero":b,"coeffs":[[k,re,im],...]} with k = 0..N;
// negative modes are implied by Hermitian symmetry, so only real fields
// round-trip (from_json rebuilds u_{-k} = conj(u_k); to_json rejects fields
// with a Hermitian defect).
nlohmann::json field_to_json(const FourierField& u);
FourierField field_from_json(const nlohmann::json& j);
void save_field(const FourierField& u, const std::string& path);
FourierField load_field(const std::string& path);

}  // namespace knf
