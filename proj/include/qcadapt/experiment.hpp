#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcadapt/adapt.hpp"

namespace qcadapt {

enum class Strategy { apriori, adaptive_gradient, adaptive_energy };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

/// One refinement step of one strategy, compared against the exact solution.
struct ExperimentRecord {
  Strategy strategy = Strategy::apriori;
  int step = 0;
  std::size_t dof = 0;
  double grad_error = 0.0;
  double energy_error = 0.0;
  double rel_grad_error = 0.0;
  double rel_energy_error = 0.0;
  double grad_bound = 0.0;
  double energy_bound = 0.0;
  double grad_efficiency = 0.0;
  double energy_efficiency = 0.0;
  double a_star = 0.0;
  double eta = 0.0;
  double eta_f = 0.0;
  double eta_q = 0.0;
  double eta_hat_q = 0.0;
  double mu = 0.0;
  double mu_f = 0.0;
  double mu_q = 0.0;
  bool assumptions_hold = false;
  std::uint64_t mesh_hash = 0;
  std::int64_t wall_time_ms = 0;

  /// Efficiencies >= 1, i.e. both bounds hold.
  bool bounds_hold() const { return grad_bound >= grad_error && energy_bound >= energy_error; }
  nlohmann::json to_json() const;
};

struct ExperimentConfig {
  int n_half = 2500;
  double stretch = 1.0;
  double alpha = 5.0;
  double force_amplitude = 0.4;
  AdaptiveConfig adapt;                     ///< indicator is set per strategy
  std::optional<IndicatorKind> indicator;   ///< adaptive strategies in "all"; empty: both
  std::vector<int> apriori_radii;           ///< empty: geometric sweep up to max_dof
  std::filesystem::path out_dir = "out";
  std::vector<std::string> formats{"csv", "json"};
  unsigned threads = 0;                     ///< 0: QCADAPT_THREADS or hardware concurrency

  ExperimentConfig();
  nlohmann::json to_json() const;
};

/// Exact atomistic solution and the scales used for relative errors.
struct ReferenceSolution {
  LatticeFunction deformation;
  double energy = 0.0;
  double gradient_scale = 0.0;  ///< ||y_a' - F||_{L^2}
  double energy_scale = 0.0;    ///< |E_a(y_a) - E_a(F x)|
  int newton_iterations = 0;
};

AtomisticModel make_model(const ExperimentConfig& cfg);

ReferenceSolution solve_reference(const AtomisticModel& model, const NewtonOptions& options = {});

/// Fills the error and estimator fields of a record.
ExperimentRecord compare(const AtomisticModel& model, const ReferenceSolution& ref, const QcModel& qc,
                         const MeshFunction& y_qc, const EstimateReport& report);

/// Atomistic radii for the a priori sequence: round(4 * 2^(i/2)) up to the DoF budget.
std::vector<int> default_apriori_radii(int n_half, std::size_t max_dof, const ExternalForce& force);

std::vector<ExperimentRecord> run_apriori(const AtomisticModel& model, const ReferenceSolution& ref,
                                          const ExperimentConfig& cfg, std::ostream* log = nullptr);
std::vector<ExperimentRecord> run_adaptive_strategy(const AtomisticModel& model, const ReferenceSolution& ref,
                                                    const ExperimentConfig& cfg, IndicatorKind indicator,
                                                    std::ostream* log = nullptr);

/// Least-squares slope of log(value) against log(dof) over points with
/// dof >= dof_max / 10. NaN if fewer than two points qualify.
double last_decade_slope(const std::vector<ExperimentRecord>& records, bool energy);

/// Relative gradient error at `dof`, log-log interpolated along a record sequence.
double error_at_dof(const std::vector<ExperimentRecord>& records, double dof);

struct StrategyResult {
  Strategy strategy;
  std::vector<ExperimentRecord> records;
  std::string error;  ///< non-empty if the strategy failed
};

struct ExperimentResult {
  ReferenceSolution reference;
  std::vector<StrategyResult> strategies;
  nlohmann::json summary;
};

/// Runs the requested strategies (in parallel up to cfg.threads) and writes
/// <strategy>.csv, <strategy>.jsonl and summary.json into cfg.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<Strategy>& strategies);

void write_csv(const std::filesystem::path& path, const std::vector<ExperimentRecord>& records);

std::string version_string();

}  // namespace qcadapt
