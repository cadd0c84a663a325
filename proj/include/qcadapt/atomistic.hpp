#pragma once

#include <memory>

#include <Eigen/SparseCore>

#include "qcadapt/force.hpp"
#include "qcadapt/lattice.hpp"
#include "qcadapt/newton.hpp"
#include "qcadapt/potential.hpp"

namespace qcadapt {

/// Periodic chain with nearest and next-nearest neighbour pair interaction
/// under a dead load f.
class AtomisticModel {
 public:
  AtomisticModel(std::shared_ptr<const PairPotential> potential, int n_half, double stretch,
                 std::shared_ptr<const ExternalForce> force);

  const PairPotential& potential() const { return *potential_; }
  const std::shared_ptr<const PairPotential>& potential_ptr() const { return potential_; }
  const ExternalForce& force() const { return *force_; }
  const std::shared_ptr<const ExternalForce>& force_ptr() const { return force_; }
  int n_half() const { return n_half_; }
  double epsilon() const { return 0.5 / n_half_; }
  double stretch() const { return stretch_; }

  /// f(eps ell); the value at the pinned site is irrelevant and taken as 0.
  double nodal_force(std::int64_t ell) const;

  /// Stored energy eps sum phi(y'_l) + eps sum phi(y'_{l-1} + y'_l).
  double stored_energy(const LatticeFunction& y) const;
  /// <f, u>_eps = eps sum f_l u_l for a displacement u.
  double load(const LatticeFunction& u) const;
  /// Stored energy minus load of y - F x.
  double energy(const LatticeFunction& y) const;

  /// dE/dy_l for l = -N+1..N (slope 0); the pinned entry is zeroed.
  LatticeFunction gradient(const LatticeFunction& y) const;
  /// Same without the load and without zeroing the pinned entry.
  LatticeFunction stored_gradient(const LatticeFunction& y) const;

  /// Full periodic Hessian on the 2N window values (row l + N - 1).
  Eigen::SparseMatrix<double> hessian_matrix(const LatticeFunction& y) const;
  LatticeFunction hessian_apply(const LatticeFunction& y, const LatticeFunction& v) const;

  double min_strain(const LatticeFunction& y) const;

  /// Energy minimizer near `initial` by damped Newton on the pinned system.
  LatticeFunction solve(const LatticeFunction& initial, const NewtonOptions& options = {},
                        NewtonReport* report = nullptr) const;

 private:
  void check_deformation(const LatticeFunction& y) const;

  std::shared_ptr<const PairPotential> potential_;
  int n_half_;
  double stretch_;
  std::shared_ptr<const ExternalForce> force_;
};

}  // namespace qcadapt
