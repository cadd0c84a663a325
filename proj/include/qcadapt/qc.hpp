#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "qcadapt/atomistic.hpp"
#include "qcadapt/mesh.hpp"

namespace qcadapt {

/// Part of a bond inside one continuum element (physical coordinates).
struct ContinuumPart {
  std::size_t element;
  Interval part;
};

/// Decomposition of a bond into its atomistic part (merged into one
/// interval) and its pieces in the continuum elements.
struct BondSplit {
  Bond bond;
  std::optional<Interval> atom_part;
  std::vector<ContinuumPart> continuum_parts;
};

BondSplit split_bond(const Bond& bond, const Mesh& mesh);

/// Same decomposition for the lattice interval [left, right] (lattice
/// coordinates in and out).
BondSplit split_sites(const Mesh& mesh, double left, double right);

/// Bond-splitting QC energy on a fixed mesh.
class QcModel {
 public:
  /// Throws std::invalid_argument if the mesh fails validation or does not
  /// match the lattice of `atomistic`.
  QcModel(AtomisticModel atomistic, std::shared_ptr<const Mesh> mesh);

  const AtomisticModel& atomistic() const { return atomistic_; }
  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }

  /// W(r) = phi(r) + phi(2r) and its derivatives.
  double cauchy_born(double r, int order) const;

  /// Stored energy as a sum over the per-period bond set (reference path).
  double bond_sum_stored_energy(const MeshFunction& y) const;
  /// Stored energy: atomistic bonds plus Cauchy-Born continuum integral.
  double stored_energy(const MeshFunction& y) const;
  /// <f, u_h>_h: exact integral of the nodal interpolant of f u_h.
  double load(const MeshFunction& u) const;
  double energy(const MeshFunction& y) const;

  /// dE_qc/dY_k for every node; the pinned entry is zeroed.
  std::vector<double> gradient(const MeshFunction& y) const;
  std::vector<double> stored_gradient(const MeshFunction& y) const;
  /// K x K Hessian of the stored energy (the load is linear).
  Eigen::SparseMatrix<double> hessian(const MeshFunction& y) const;
  /// Hessian with the pinned row and column removed.
  Eigen::SparseMatrix<double> reduced_hessian(const MeshFunction& y) const;

  double min_strain(const MeshFunction& y) const;

  /// Energy minimizer near `initial` by damped Newton on the pinned system.
  MeshFunction solve(const MeshFunction& initial, const NewtonOptions& options = {},
                     NewtonReport* report = nullptr) const;

 private:
  struct AtomBond {
    int range;
    std::int64_t left_node, right_node;  // unwrapped node indices of the atomistic hull
    double length;                      // physical length of the hull
  };

  double nodal_load_weight(std::int64_t k) const;
  double nodal_force(std::int64_t k) const;
  void check(const MeshFunction& y) const;

  AtomisticModel atomistic_;
  std::shared_ptr<const Mesh> mesh_;
  std::vector<AtomBond> atom_bonds_;
  std::vector<std::size_t> continuum_elements_;
};

}  // namespace qcadapt
