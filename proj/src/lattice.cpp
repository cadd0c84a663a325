#include "qcadapt/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qcadapt {

namespace {

// Floor division for a positive divisor.
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && (a < 0)) --q;
  return q;
}

}  // namespace

LatticeFunction::LatticeFunction(int n_half, double macroscopic_slope)
    : n_half_(n_half), slope_(macroscopic_slope), offsets_(2 * static_cast<std::size_t>(n_half), 0.0) {
  if (n_half < 2) throw std::invalid_argument("lattice needs N >= 2");
}

LatticeFunction::LatticeFunction(int n_half, double macroscopic_slope, std::vector<double> window_values)
    : LatticeFunction(from_offsets(n_half, macroscopic_slope, std::move(window_values))) {
  const double eps = epsilon();
  for (std::int64_t ell = -n_half + 1; ell <= n_half; ++ell) offsets_[slot(ell)] -= slope_ * eps * ell;
}

LatticeFunction LatticeFunction::from_offsets(int n_half, double macroscopic_slope, std::vector<double> offsets) {
  LatticeFunction v(n_half, macroscopic_slope);
  if (offsets.size() != v.offsets_.size())
    throw std::invalid_argument("lattice function expects 2N values, got " + std::to_string(offsets.size()));
  v.offsets_ = std::move(offsets);
  return v;
}

LatticeFunction LatticeFunction::affine(int n_half, double slope) { return LatticeFunction(n_half, slope); }

std::size_t LatticeFunction::wrapped_slot(std::int64_t ell) const {
  const std::int64_t p = period();
  return slot(ell - floor_div(ell + n_half_ - 1, p) * p);
}

double LatticeFunction::offset(std::int64_t ell) const { return offsets_[wrapped_slot(ell)]; }

double LatticeFunction::operator[](std::int64_t ell) const {
  return slope_ * epsilon() * static_cast<double>(ell) + offset(ell);
}

void LatticeFunction::set(std::int64_t ell, double value) {
  if (ell <= -n_half_ || ell > n_half_)
    throw std::out_of_range("lattice index " + std::to_string(ell) + " outside the period window");
  offsets_[slot(ell)] = value - slope_ * epsilon() * static_cast<double>(ell);
}

double LatticeFunction::difference(std::int64_t ell, int range) const {
  return slope_ * range + (offset(ell) - offset(ell - range)) / epsilon();
}

double LatticeFunction::offset_at_site(double t) const {
  const double lo = std::floor(t);
  const auto ell = static_cast<std::int64_t>(lo);
  const double lambda = t - lo;
  if (lambda == 0.0) return offset(ell);
  return (1.0 - lambda) * offset(ell) + lambda * offset(ell + 1);
}

double LatticeFunction::value_at(double x) const {
  return slope_ * x + offset_at_site(x / epsilon());
}

LatticeFunction LatticeFunction::displacement() const { return from_offsets(n_half_, 0.0, offsets_); }

LatticeFunction LatticeFunction::deformation(double stretch) const {
  return from_offsets(n_half_, slope_ + stretch, offsets_);
}

std::vector<Bond> bond_set(int n_half) {
  std::vector<Bond> bonds;
  bonds.reserve(4 * static_cast<std::size_t>(n_half));
  for (int range = 1; range <= 2; ++range)
    for (std::int64_t ell = -n_half + 1; ell <= n_half; ++ell) bonds.push_back({ell, range});
  return bonds;
}

double first_difference(const LatticeFunction& v, std::int64_t ell) { return v.difference(ell, 1); }

double bond_difference(const std::function<double(double)>& v, Interval omega) {
  if (!(omega.right > omega.left))
    throw std::invalid_argument("finite difference over a degenerate interval");
  return (v(omega.right) - v(omega.left)) / omega.length();
}

SobolevNorms sobolev_norms(const LatticeFunction& v) {
  const int n = v.n_half();
  double sum = 0.0, mx = 0.0;
  for (std::int64_t ell = -n + 1; ell <= n; ++ell) {
    const double d = first_difference(v, ell);
    sum += d * d;
    mx = std::max(mx, std::abs(d));
  }
  return {std::sqrt(v.epsilon() * sum), mx};
}

LatticeFunction interpolate_to_lattice(int n_half, double macroscopic_slope,
                                       const std::function<double(double)>& g) {
  LatticeFunction v(n_half, macroscopic_slope);
  const double eps = v.epsilon();
  for (std::int64_t ell = -n_half + 1; ell <= n_half; ++ell) v.set(ell, g(eps * ell));
  return v;
}

}  // namespace qcadapt
