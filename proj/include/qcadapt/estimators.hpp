#pragma once

#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcadapt/qc.hpp"

namespace qcadapt {

/// Raised when the strain assumptions behind the stability estimate fail.
class AssumptionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InternalResidual {
  std::vector<double> eta_k;  ///< per node; 0 for nodes strictly inside the atomistic region
  double eta = 0.0;           ///< (3 sum eta_k^2)^{1/2}
};

struct ExternalResidual {
  std::vector<double> eta_f_k;      ///< per element
  std::vector<double> eta_q_k;      ///< per element
  std::vector<double> eta_hat_q_k;  ///< per element, weighted-Poincare variant
  double eta_f = 0.0;
  double eta_q = 0.0;
  double eta_hat_q = 0.0;
};

struct StabilityResult {
  double a_star = 0.0;
  double b_min = 0.0;       ///< min_l B_l
  double min_strain = 0.0;  ///< min_l y'_l of the lattice interpolant
  bool assumptions_hold = false;
};

struct LipschitzConstants {
  double c_h = 0.0;
  double c_lip = 0.0;
};

struct EnergyEstimators {
  std::vector<double> mu_k;         ///< per node, absolute value
  std::vector<double> mu_k_signed;  ///< per node, before taking absolute values
  std::vector<double> mu_f_k;       ///< per node
  std::vector<double> mu_q_k;       ///< per element
  double mu = 0.0;
  double mu_f = 0.0;
  double mu_q = 0.0;
};

struct Indicators {
  std::vector<double> rho_grad_k;    ///< rho^grad (not squared)
  std::vector<double> rho_energy_k;  ///< rho^E
};

struct EstimatorOptions {
  /// Use the weighted quadrature term eta_hat_q in place of eta_q in both bounds.
  bool singular_force_mode = true;
};

struct EstimateReport {
  InternalResidual internal;
  ExternalResidual external;
  EnergyEstimators energy;
  Indicators indicators;
  StabilityResult stability;
  LipschitzConstants lipschitz;
  double strain_lower_bound = 0.0;  ///< mu used for C_H and C_Lip
  bool singular_force_mode = true;
  double gradient_bound = 0.0;
  double energy_bound = 0.0;

  nlohmann::json to_json() const;
};

/// Elements contained in the extended continuum region.
std::vector<bool> extended_continuum_elements(const Mesh& mesh);

/// Bonds b with x_k in int(b), for the node at lattice coordinate t.
std::vector<Bond> bonds_containing(double t);

InternalResidual internal_residual(const QcModel& model, const MeshFunction& y);

/// Weight |x| log^2|x| of the weighted Poincare inequality (x reduced to the period cell).
double poincare_weight(double x);

ExternalResidual external_residual(const Mesh& mesh, const ExternalForce& force);

/// A_l of the lattice function y at site ell.
double site_stability(const PairPotential& phi, const LatticeFunction& y, std::int64_t ell);

/// A_*, B_l and strain checks in O(K) operations. Throws AssumptionViolation
/// when `strict` and min strain < r_*/2 or some B_l < 0.
StabilityResult stability(const QcModel& model, const MeshFunction& y, bool strict = true);

/// C_H = M_2(mu) + 4 M_2(2 mu), C_Lip = M_3(mu) + 8 M_3(2 mu).
LipschitzConstants lipschitz_constants(const PairPotential& phi, double mu);

double gradient_error_bound(double a_star, double eta, double eta_f, double eta_q);
double energy_error_bound(double a_star, double c_h, double eta, double eta_f, double eta_q, double mu,
                          double mu_f, double mu_q);

EnergyEstimators energy_estimators(const QcModel& model, const MeshFunction& y);

/// Element indicators from a report whose residual, energy and stability
/// parts are filled in. Atomistic elements get 0. Without a positive A_*
/// both kinds fall back to the gradient indicator with the 4 / A_* factor
/// dropped, which still orders the elements for marking.
Indicators indicators(const EstimateReport& report, const Mesh& mesh);

EstimateReport estimate(const QcModel& model, const MeshFunction& y, const EstimatorOptions& options = {});

}  // namespace qcadapt
