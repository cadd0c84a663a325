#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcadapt/estimators.hpp"

namespace qcadapt {

/// Brute-force reference computations, kept independent of the production
/// assembly paths so that the two can be compared.
namespace oracle {

/// Stored energy by a direct loop over the 4N bonds.
double atomistic_stored_energy(const PairPotential& phi, const LatticeFunction& y);

/// min over all 2N sites of A_l(I_eps y_h).
double a_star(const PairPotential& phi, const MeshFunction& y);

/// Exact U^{-1,2} norm of R_int[v] = E_a'(y)[v] - E_qc'(y)[I_h v], via the
/// Riesz representative of the periodic discrete Laplacian. `magnitude`
/// receives the same norm of the entrywise absolute sum of both gradients.
double internal_residual_dual_norm(const QcModel& model, const MeshFunction& y, double* magnitude = nullptr);

/// R_ext[v] = <f, v>_eps - <f, I_h v>_h for a lattice displacement v (v_0 = 0).
double external_residual(const QcModel& model, const LatticeFunction& v);

/// ||w^{-1} v||_{L^2} over the extended continuum region of `mesh`, by
/// 30-point Gauss quadrature on every lattice cell.
double weighted_norm(const Mesh& mesh, const LatticeFunction& v);

}  // namespace oracle

/// Random valid mesh with 0 inside the atomistic region and a node at 1/2.
/// `minimal` makes every continuum element exactly 2 eps long where possible.
Mesh random_mesh(int n_half, std::mt19937_64& rng, bool minimal = false);

/// Every lattice site a node, atomistic interval a whole period.
Mesh fully_atomistic_mesh(int n_half);

/// F x plus nodal perturbations of size <= amplitude * eps (pinned node fixed).
MeshFunction random_deformation(std::shared_ptr<const Mesh> mesh, double stretch, double amplitude,
                                std::mt19937_64& rng);

/// Random displacement with v_0 = 0 and entries in [-amplitude, amplitude].
LatticeFunction random_lattice_displacement(int n_half, double amplitude, std::mt19937_64& rng);

std::shared_ptr<const ExternalForce> random_force(std::mt19937_64& rng);

struct OracleCheck {
  std::string name;
  std::size_t cases = 0;
  std::size_t violations = 0;
  double worst = 0.0;  ///< largest lhs / rhs (or relative difference) seen
  std::string first_failure;
};

struct OracleReport {
  std::uint64_t seed = 0;
  std::size_t instances = 0;
  std::vector<OracleCheck> checks;
  bool passed() const;
  nlohmann::json to_json() const;
};

/// Randomized oracle comparisons on small instances: energy forms, A_*,
/// internal residual against the Riesz dual norm, the energy estimators and
/// the external residual bound.
OracleReport oracle_suite(std::uint64_t seed, const std::vector<int>& sizes, int cases_per_size = 70,
                          int test_functions = 100);

}  // namespace qcadapt
