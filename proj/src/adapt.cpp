#include "qcadapt/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>

namespace qcadapt {

std::string to_string(IndicatorKind kind) { return kind == IndicatorKind::gradient ? "gradient" : "energy"; }

IndicatorKind indicator_from_string(const std::string& name) {
  if (name == "gradient" || name == "grad") return IndicatorKind::gradient;
  if (name == "energy") return IndicatorKind::energy;
  throw std::invalid_argument("unknown indicator '" + name + "'");
}

std::string to_string(AdaptiveStatus status) {
  switch (status) {
    case AdaptiveStatus::budget_reached:
      return "budget_reached";
    case AdaptiveStatus::converged:
      return "converged";
    case AdaptiveStatus::stalled:
      return "stalled";
    default:
      return "step_limit";
  }
}

void AdaptiveConfig::validate() const {
  if (!(dorfler_fraction > 0.0 && dorfler_fraction < 1.0))
    throw std::invalid_argument("dorfler_fraction must lie in (0, 1)");
  if (max_dof <= 9) throw std::invalid_argument("max_dof must exceed 9");
  if (initial_atom_radius < 1) throw std::invalid_argument("initial_atom_radius must be positive");
  if (initial_continuum_nodes_per_half < 0) throw std::invalid_argument("negative initial continuum node count");
}

std::vector<std::size_t> mark(std::span<const double> rho, double fraction) {
  double total = 0.0;
  for (double r : rho) {
    if (!(r >= 0.0)) throw std::invalid_argument("indicators must be nonnegative");
    total += r;
  }
  std::vector<std::size_t> order(rho.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!(total > 0.0)) return {};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rho[a] > rho[b]; });
  std::vector<std::size_t> out;
  double acc = 0.0;
  for (std::size_t k : order) {
    if (acc >= fraction * total) break;
    out.push_back(k);
    acc += rho[k];
  }
  return out;
}

nlohmann::json AdaptiveStep::to_json() const {
  nlohmann::json j{{"step", step},
                   {"dof", dof},
                   {"mesh_hash", mesh_hash},
                   {"atomistic_interval", {atom_left, atom_right}},
                   {"newton_iterations", newton_iterations},
                   {"gradient_bound", gradient_bound},
                   {"energy_bound", energy_bound},
                   {"a_star", a_star},
                   {"assumptions_hold", assumptions_hold},
                   {"marked", marked},
                   {"bisected", bisected},
                   {"absorbed", absorbed},
                   {"unrefined", unrefined},
                   {"wall_time_ms", wall_time_ms}};
  if (!extra.is_null()) j["extra"] = extra;
  return j;
}

AdaptiveRun run_adaptive(const AtomisticModel& model, const AdaptiveConfig& cfg, const StepObserver& observer,
                         std::ostream* log) {
  cfg.validate();
  return run_adaptive(model, cfg,
                      initial_adaptive_mesh(model.n_half(), cfg.initial_atom_radius,
                                            cfg.initial_continuum_nodes_per_half, cfg.initial_spacing),
                      observer, log);
}

AdaptiveRun run_adaptive(const AtomisticModel& model, const AdaptiveConfig& cfg, Mesh initial,
                         const StepObserver& observer, std::ostream* log) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  AdaptiveRun run;
  auto mesh = std::make_shared<const Mesh>(std::move(initial));
  MeshFunction guess = MeshFunction::affine(mesh, model.stretch());

  for (int step = 0;; ++step) {
    const auto t0 = clock::now();
    AdaptiveStep rec;
    rec.step = step;
    rec.dof = mesh->num_nodes();
    rec.mesh_hash = mesh->hash();
    rec.atom_left = mesh->atomistic_interval().left;
    rec.atom_right = mesh->atomistic_interval().right;

    QcModel qc(model, mesh);
    NewtonReport newton;
    std::optional<MeshFunction> y;
    EstimateReport report;
    try {
      y = qc.solve(guess, cfg.newton, &newton);
      report = estimate(qc, *y, cfg.estimator);
    } catch (const std::exception& e) {
      throw AdaptiveFailure(std::string("adaptive step ") + std::to_string(step) + ": " + e.what(), mesh->to_json());
    }
    rec.newton_iterations = newton.iterations;
    rec.gradient_bound = report.gradient_bound;
    rec.energy_bound = report.energy_bound;
    rec.a_star = report.stability.a_star;
    rec.assumptions_hold = report.stability.assumptions_hold;

    const auto& rho = cfg.indicator == IndicatorKind::gradient ? report.indicators.rho_grad_k
                                                               : report.indicators.rho_energy_k;
    const bool last = mesh->num_nodes() >= cfg.max_dof || step + 1 >= cfg.max_steps;
    std::vector<std::size_t> marked;
    std::optional<RefineResult> refined;
    if (!last) {
      marked = mark(rho, cfg.dorfler_fraction);
      if (!marked.empty()) refined = refine(*mesh, marked);
      rec.marked = marked.size();
      if (refined) {
        rec.bisected = refined->bisected;
        rec.absorbed = refined->absorbed;
        rec.unrefined = refined->unrefined.size();
      }
    }
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    if (observer) observer(qc, *y, report, rec);
    run.steps.push_back(rec);
    if (log) *log << rec.to_json().dump() << '\n';

    if (last) {
      run.status = mesh->num_nodes() >= cfg.max_dof ? AdaptiveStatus::budget_reached : AdaptiveStatus::step_limit;
      break;
    }
    if (marked.empty()) {
      run.status = AdaptiveStatus::converged;
      break;
    }
    if (refined->mesh.hash() == mesh->hash()) {
      run.status = AdaptiveStatus::stalled;
      break;
    }
    auto next = std::make_shared<const Mesh>(std::move(refined->mesh));
    guess = cfg.warm_start ? interpolate_to_mesh(next, *y) : MeshFunction::affine(next, model.stretch());
    mesh = std::move(next);
  }
  return run;
}

}  // namespace qcadapt
