#include "knf/fft_grid.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace knf {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

int next_fast_size(int n) {
  if (n < 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

Grid::Grid(int m) : M_(m) {
  if (m < 1) throw std::invalid_argument("Grid: size must be positive");
  real_buf_ = fftw_alloc_real(M_);
  cplx_buf_ = fftw_alloc_complex(M_ / 2 + 1);
  std::lock_guard<std::mutex> lock(plan_mutex());
  // FFTW_ESTIMATE: deterministic plans, no measurement noise in results.
  plan_c2r_ = fftw_plan_dft_c2r_1d(M_, static_cast<fftw_complex*>(cplx_buf_),
                                   real_buf_, FFTW_ESTIMATE);
  plan_r2c_ = fftw_plan_dft_r2c_1d(M_, real_buf_,
                                   static_cast<fftw_complex*>(cplx_buf_),
                                   FFTW_ESTIMATE);
  if (!plan_c2r_ || !plan_r2c_) throw std::runtime_error("Grid: FFTW planning failed");
}

Grid::~Grid() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(plan_c2r_);
  fftw_destroy_plan(plan_r2c_);
  fftw_free(real_buf_);
  fftw_free(cplx_buf_);
}

void Grid::to_samples(const FourierField& u, std::vector<double>& samples) {
  if (2 * u.N() + 1 > M_)
    throw std::invalid_argument("Grid::to_samples: band exceeds grid resolution");
  auto* cb = static_cast<fftw_complex*>(cplx_buf_);
  std::memset(cb, 0, sizeof(fftw_complex) * (M_ / 2 + 1));
  for (int k = 0; k <= u.N(); ++k) {
    cb[k][0] = u(k).real();
    cb[k][1] = u(k).imag();
  }
  fftw_execute(plan_c2r_);  // unnormalized: output = sum_k u_k e^{ikx_j}
  samples.assign(real_buf_, real_buf_ + M_);
}

std::vector<double> Grid::to_samples(const FourierField& u) {
  std::vector<double> s;
  to_samples(u, s);
  return s;
}

FourierField Grid::from_samples(const std::vector<double>& samples, int n_out) {
  if (static_cast<int>(samples.size()) != M_)
    throw std::invalid_argument("Grid::from_samples: sample count != grid size");
  if (2 * n_out + 1 > M_)
    throw std::invalid_argument("Grid::from_samples: requested band exceeds grid");
  std::memcpy(real_buf_, samples.data(), sizeof(double) * M_);
  fftw_execute(plan_r2c_);
  auto* cb = static_cast<fftw_complex*>(cplx_buf_);
  FourierField out(n_out);
  const double inv = 1.0 / M_;
  for (int k = 0; k <= n_out; ++k) {
    out(k) = cplx(cb[k][0] * inv, cb[k][1] * inv);
    if (k > 0) out(-k) = std::conj(out(k));
  }
  return out;
}

FourierField multiply_fields(const FourierField& u, const FourierField& v, int n_out) {
  const int M = next_fast_size(u.N() + v.N() + n_out + 1);
  Grid g(M);
  std::vector<double> su = g.to_samples(u);
  std::vector<double> sv = g.to_samples(v);
  for (int j = 0; j < M; ++j) su[j] *= sv[j];
  return g.from_samples(su, n_out);
}

}  // namespace knf
