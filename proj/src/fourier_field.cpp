#include "knf/fourier_field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "knf/common.hpp"

namespace knf {

double FourierField::max_abs() const {
  double m = 0.0;
  for (const auto& z : c_) m = std::max(m, std::abs(z));
  return m;
}

double FourierField::hermitian_defect() const {
  double d = std::abs((*this)(0).imag());
  for (int k = 1; k <= N_; ++k)
    d = std::max(d, std::abs((*this)(-k) - std::conj((*this)(k))));
  return d;
}

void FourierField::enforce_hermitian() {
  (*this)(0) = cplx((*this)(0).real(), 0.0);
  for (int k = 1; k <= N_; ++k) {
    const cplx avg = 0.5 * ((*this)(k) + std::conj((*this)(-k)));
    (*this)(k) = avg;
    (*this)(-k) = std::conj(avg);
  }
}

FourierField FourierField::truncated(int n) const {
  FourierField out(n);
  const int m = std::min(n, N_);
  for (int k = -m; k <= m; ++k) out(k) = (*this)(k);
  return out;
}

FourierField& FourierField::operator+=(const FourierField& o) {
  if (o.N_ > N_) *this = truncated(o.N_);
  for (int k = -o.N_; k <= o.N_; ++k) (*this)(k) += o(k);
  return *this;
}

FourierField& FourierField::operator-=(const FourierField& o) {
  if (o.N_ > N_) *this = truncated(o.N_);
  for (int k = -o.N_; k <= o.N_; ++k) (*this)(k) -= o(k);
  return *this;
}

FourierField& FourierField::operator*=(double s) {
  for (auto& z : c_) z *= s;
  return *this;
}

FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
FourierField operator*(double s, FourierField a) { return a *= s; }

double l2_norm(const FourierField& u) {
  double s = 0.0;
  for (int k = -u.N(); k <= u.N(); ++k) s += std::norm(u(k));
  return std::sqrt(s);
}

double sobolev_norm(const FourierField& u, double s, Sobolev variant) {
  double acc = 0.0;
  if (variant == Sobolev::inhomogeneous) {
    for (int k = -u.N(); k <= u.N(); ++k)
      acc += std::norm(u(k)) * std::pow(1.0 + double(k) * k, -s);
    return std::sqrt(acc);
  }
  // homogeneous: weight |k|^{-s} on nonzero modes; for s > 0 the mean carries
  // no weight, so require it to vanish rather than silently dropping it.
  if (s > 0.0 && std::abs(u.mean()) > 1e-12 * (1.0 + u.max_abs()))
    throw std::invalid_argument("sobolev_norm(homogeneous): field has nonzero mean");
  for (int k = -u.N(); k <= u.N(); ++k) {
    if (k == 0) continue;
    acc += std::norm(u(k)) * std::pow(std::abs(double(k)), -2.0 * s);
  }
  return std::sqrt(acc);
}

FourierField convolve(const FourierField& u, const FourierField& v, int n_out) {
  if (n_out < 0) n_out = std::max(u.N(), v.N());
  FourierField out(n_out);
  for (int k = -n_out; k <= n_out; ++k) {
    cplx acc(0.0, 0.0);
    const int lo = std::max(-u.N(), k - v.N());
    const int hi = std::min(u.N(), k + v.N());
    for (int m = lo; m <= hi; ++m) acc += u(m) * v(k - m);
    out(k) = acc;
  }
  return out;
}

FourierField derivative(const FourierField& u, int order) {
  FourierField out(u.N());
  for (int k = -u.N(); k <= u.N(); ++k) {
    cplx w(1.0, 0.0);
    for (int j = 0; j < order; ++j) w *= cplx(0.0, double(k));
    out(k) = w * u(k);
  }
  return out;
}

FourierField antiderivative(const FourierField& u) {
  if (std::abs(u.mean()) > 1e-12 * (1.0 + u.max_abs()))
    throw std::invalid_argument("antiderivative: field has nonzero mean");
  FourierField out(u.N());
  for (int k = -u.N(); k <= u.N(); ++k)
    out(k) = (k == 0) ? cplx(0.0, 0.0) : u(k) / cplx(0.0, double(k));
  return out;
}

nlohmann::json field_to_json(const FourierField& u) {
  if (!u.is_hermitian(1e-9))
    throw std::invalid_argument("field_to_json: field is not Hermitian (defect " +
                                format_double(u.hermitian_defect()) + ")");
  nlohmann::json j;
  j["N"] = u.N();
  j["mean_zero"] = std::abs(u.mean()) <= 1e-14 * (1.0 + u.max_abs());
  nlohmann::json coeffs = nlohmann::json::array();
  for (int k = 0; k <= u.N(); ++k)
    coeffs.push_back({k, u(k).real(), u(k).imag()});
  j["coeffs"] = std::move(coeffs);
  return j;
}

FourierField field_from_json(const nlohmann::json& j) {
  const int n = j.at("N").get<int>();
  FourierField u(n);
  for (const auto& row : j.at("coeffs")) {
    const int k = row.at(0).get<int>();
    if (k < 0 || k > n) throw std::invalid_argument("field_from_json: mode out of range");
    u(k) = cplx(row.at(1).get<double>(), row.at(2).get<double>());
    if (k > 0) u(-k) = std::conj(u(k));
  }
  u(0) = cplx(u(0).real(), 0.0);
  return u;
}

void save_field(const FourierField& u, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_field: cannot open " + path);
  out << field_to_json(u).dump(2) << "\n";
}

FourierField load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_field: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return field_from_json(j);
}

}  // namespace knf
