// ============================================================================
// fft_grid.hpp -- RAII wrapper around FFTW real transforms of one fixed size.
//
// Maps between coefficient space (FourierField, u(x) = sum u_k e^{ikx}) and
// samples on the uniform grid x_j = 2*pi*j/M:
//   * to_samples:  u(x_j) via the unnormalized c2r transform (coefficients go
//                  in as-is; FFTW's Hermitian completion matches our symmetry)
//   * from_samples: u_k = (DFT of samples)_k / M -- the exact band-limited
//                  projection when the samples come from a band <= (M-1)/2
//                  field (otherwise aliased, which callers exploit for
//                  dealiasing rules)
//
// Plan creation/destruction is serialized by a global mutex (FFTW requirement);
// execution runs on plan-owned buffers, so each Grid instance is safe to use
// from one thread at a time and distinct instances are safe concurrently.
// ============================================================================
#pragma once

#include <vector>

#include "knf/fourier_field.hpp"

// forward-declare the FFTW plan handles so fftw3.h stays out of the headers
struct fftw_plan_s;

namespace knf {

// Smallest size >= n with only factors 2,3,5,7 (fast FFTW sizes).
int next_fast_size(int n);

class Grid {
 public:
  explicit Grid(int m);
  ~Grid();
  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;

  int size() const { return M_; }

  // Evaluate u on the grid; requires u.N() <= (M-1)/2.
  void to_samples(const FourierField& u, std::vector<double>& samples);
  std::vector<double> to_samples(const FourierField& u);

  // Band-limited projection of samples onto modes |k| <= n_out.
  FourierField from_samples(const std::vector<double>& samples, int n_out);

 private:
  int M_;
  double* real_buf_;
  void* cplx_buf_;  // fftw_complex[M/2+1]
  fftw_plan_s* plan_c2r_;
  fftw_plan_s* plan_r2c_;
};

// Alias-free pointwise product projected to modes |k| <= n_out.
// Uses a padded grid of size >= u.N() + v.N() + n_out + 1.
FourierField multiply_fields(const FourierField& u, const FourierField& v, int n_out);

}  // namespace knf
