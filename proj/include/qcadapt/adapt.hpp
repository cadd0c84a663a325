#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcadapt/estimators.hpp"

namespace qcadapt {

enum class IndicatorKind { gradient, energy };

std::string to_string(IndicatorKind kind);
IndicatorKind indicator_from_string(const std::string& name);

struct AdaptiveConfig {
  IndicatorKind indicator = IndicatorKind::gradient;
  double dorfler_fraction = 0.5;
  std::size_t max_dof = 600;
  int initial_atom_radius = 3;
  int initial_continuum_nodes_per_half = 0;
  InitialSpacing initial_spacing = InitialSpacing::graded;
  bool warm_start = true;
  int max_steps = 1000;
  EstimatorOptions estimator;
  NewtonOptions newton;

  /// Throws std::invalid_argument for out-of-range settings.
  void validate() const;
};

/// Smallest prefix of the elements sorted by decreasing indicator (ties by
/// index) whose indicator sum reaches fraction * total. Empty if all are 0.
std::vector<std::size_t> mark(std::span<const double> rho, double fraction);

/// One solve-estimate step of the adaptive loop.
struct AdaptiveStep {
  int step = 0;
  std::size_t dof = 0;
  std::uint64_t mesh_hash = 0;
  double atom_left = 0.0;   ///< physical interface positions
  double atom_right = 0.0;
  int newton_iterations = 0;
  double gradient_bound = 0.0;
  double energy_bound = 0.0;
  double a_star = 0.0;
  bool assumptions_hold = false;
  std::size_t marked = 0;
  std::size_t bisected = 0;
  std::size_t absorbed = 0;
  std::size_t unrefined = 0;
  double wall_time_ms = 0.0;
  nlohmann::json extra;  ///< filled by the observer (true errors etc.)

  nlohmann::json to_json() const;
};

enum class AdaptiveStatus { budget_reached, converged, stalled, step_limit };
std::string to_string(AdaptiveStatus status);

struct AdaptiveRun {
  std::vector<AdaptiveStep> steps;
  AdaptiveStatus status = AdaptiveStatus::budget_reached;
};

/// Solver or estimator failure inside the loop; carries the offending mesh.
class AdaptiveFailure : public std::runtime_error {
 public:
  AdaptiveFailure(const std::string& what, nlohmann::json mesh)
      : std::runtime_error(what), mesh_(std::move(mesh)) {}
  const nlohmann::json& mesh() const { return mesh_; }

 private:
  nlohmann::json mesh_;
};

/// Called after every estimate with the current model, solution and report.
using StepObserver = std::function<void(const QcModel&, const MeshFunction&, const EstimateReport&, AdaptiveStep&)>;

/// Solve, estimate, mark, refine until the mesh reaches cfg.max_dof nodes.
/// One JSON line per step is appended to `log` if given.
AdaptiveRun run_adaptive(const AtomisticModel& model, const AdaptiveConfig& cfg, const StepObserver& observer = {},
                         std::ostream* log = nullptr);

/// Same loop from a given starting mesh.
AdaptiveRun run_adaptive(const AtomisticModel& model, const AdaptiveConfig& cfg, Mesh initial,
                         const StepObserver& observer = {}, std::ostream* log = nullptr);

}  // namespace qcadapt
