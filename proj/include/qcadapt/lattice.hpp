#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace qcadapt {

/// Periodic function on the lattice eps*Z, eps = 1/(2N), with
/// v_{ell+2N} = v_ell + F for the macroscopic slope F (0 for displacements,
/// the stretch for deformations).
///
/// Stored as the periodic offsets o_ell = v_ell - F eps ell for ell = -N+1..N,
/// so that differences keep full precision for large N. The pinning
/// constraint v_0 = 0 is not enforced by the type; the models check it.
class LatticeFunction {
 public:
  /// The affine function F x.
  LatticeFunction(int n_half, double macroscopic_slope);
  /// From values v_ell, ell = -N+1..N.
  LatticeFunction(int n_half, double macroscopic_slope, std::vector<double> window_values);

  static LatticeFunction from_offsets(int n_half, double macroscopic_slope, std::vector<double> offsets);

  /// v(x) = slope * x sampled at the sites.
  static LatticeFunction affine(int n_half, double slope);

  int n_half() const { return n_half_; }
  std::int64_t period() const { return 2 * static_cast<std::int64_t>(n_half_); }
  double epsilon() const { return 0.5 / n_half_; }
  double macroscopic_slope() const { return slope_; }

  /// v_ell for any integer ell.
  double operator[](std::int64_t ell) const;

  /// Sets v_ell; ell must lie in -N+1..N.
  void set(std::int64_t ell, double value);

  /// o_ell for any integer ell (2N-periodic).
  double offset(std::int64_t ell) const;
  /// Offsets for ell = -N+1..N in order.
  std::span<const double> offsets() const { return offsets_; }
  std::span<double> offsets() { return offsets_; }

  /// (v_ell - v_{ell-range}) / eps.
  double difference(std::int64_t ell, int range = 1) const;

  /// Continuous piecewise-affine interpolant evaluated at the physical point x.
  double value_at(double x) const;
  /// Same for the offsets, x measured in lattice units.
  double offset_at_site(double t) const;

  bool pinned() const { return (*this)[0] == 0.0; }

  /// u = y - F x (slope 0).
  LatticeFunction displacement() const;

  /// y = u + F x for a displacement u.
  LatticeFunction deformation(double stretch) const;

 private:
  std::size_t slot(std::int64_t ell) const { return static_cast<std::size_t>(ell + n_half_ - 1); }
  std::size_t wrapped_slot(std::int64_t ell) const;

  int n_half_;
  double slope_;
  std::vector<double> offsets_;
};

/// Open interval (left, right) in physical coordinates.
struct Interval {
  double left;
  double right;
  double length() const { return right - left; }
};

/// Bond (ell eps, (ell + range) eps), range in {1, 2}.
struct Bond {
  std::int64_t left_index;
  int range;
};

/// The per-period bond set: ell = -N+1..N, range 1 and 2 (4N bonds).
std::vector<Bond> bond_set(int n_half);

/// v'_ell = (v_ell - v_{ell-1}) / eps.
double first_difference(const LatticeFunction& v, std::int64_t ell);

/// D_omega v = (v(R) - v(L)) / |omega| for a continuous v.
double bond_difference(const std::function<double(double)>& v, Interval omega);

struct SobolevNorms {
  double l2_of_gradient;
  double linf_of_gradient;
};

SobolevNorms sobolev_norms(const LatticeFunction& v);

/// Nodal interpolant I_eps: values g(eps ell). g must satisfy g(x+1) = g(x) + slope.
LatticeFunction interpolate_to_lattice(int n_half, double macroscopic_slope,
                                       const std::function<double(double)>& g);

}  // namespace qcadapt
