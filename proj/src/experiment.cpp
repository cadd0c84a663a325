#include "qcadapt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#ifndef QCADAPT_VERSION
#define QCADAPT_VERSION "unknown"
#endif

namespace qcadapt {

std::string version_string() { return QCADAPT_VERSION; }

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::apriori:
      return "apriori";
    case Strategy::adaptive_gradient:
      return "adaptive_gradient";
    default:
      return "adaptive_energy";
  }
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "apriori") return Strategy::apriori;
  if (name == "grad" || name == "gradient" || name == "adaptive_gradient") return Strategy::adaptive_gradient;
  if (name == "energy" || name == "adaptive_energy") return Strategy::adaptive_energy;
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

namespace {

double efficiency(double bound, double error) {
  if (error > 0.0) return bound / error;
  return bound == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json ExperimentRecord::to_json() const {
  return {{"strategy", to_string(strategy)},
          {"step", step},
          {"dof", dof},
          {"grad_error", grad_error},
          {"energy_error", energy_error},
          {"rel_grad_error", rel_grad_error},
          {"rel_energy_error", rel_energy_error},
          {"grad_bound", grad_bound},
          {"energy_bound", energy_bound},
          {"grad_efficiency", grad_efficiency},
          {"energy_efficiency", energy_efficiency},
          {"a_star", a_star},
          {"eta", eta},
          {"eta_f", eta_f},
          {"eta_q", eta_q},
          {"eta_hat_q", eta_hat_q},
          {"mu", mu},
          {"mu_f", mu_f},
          {"mu_q", mu_q},
          {"assumptions_hold", assumptions_hold},
          {"bounds_hold", bounds_hold()},
          {"mesh_hash", mesh_hash},
          {"wall_time_ms", wall_time_ms}};
}

ExperimentConfig::ExperimentConfig() {
  adapt.max_dof = 600;
  adapt.initial_continuum_nodes_per_half = 8;
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"model", {{"n_half", n_half}, {"stretch", stretch}, {"alpha", alpha}, {"force_amplitude", force_amplitude}}},
          {"adapt",
           {{"dorfler_fraction", adapt.dorfler_fraction},
            {"max_dof", adapt.max_dof},
            {"initial_atom_radius", adapt.initial_atom_radius},
            {"initial_continuum_nodes_per_half", adapt.initial_continuum_nodes_per_half},
            {"initial_spacing", adapt.initial_spacing == InitialSpacing::graded ? "graded" : "uniform"},
            {"warm_start", adapt.warm_start},
            {"singular_force_mode", adapt.estimator.singular_force_mode},
            {"indicator", indicator ? to_string(*indicator) : "both"}}},
          {"apriori", {{"radii", apriori_radii}}},
          {"output", {{"dir", out_dir.string()}, {"formats", formats}}}};
}

AtomisticModel make_model(const ExperimentConfig& cfg) {
  return AtomisticModel(std::make_shared<MorsePotential>(cfg.alpha), cfg.n_half, cfg.stretch,
                        std::make_shared<SingularDefectForce>(cfg.force_amplitude));
}

ReferenceSolution solve_reference(const AtomisticModel& model, const NewtonOptions& options) {
  NewtonReport rep;
  const auto affine = LatticeFunction::affine(model.n_half(), model.stretch());
  LatticeFunction y = model.solve(affine, options, &rep);
  const double phi_half = 0.5 * model.potential().inflection_point();
  if (model.min_strain(y) < phi_half)
    throw AssumptionViolation("atomistic solution has strains below r_*/2");
  const double e = model.energy(y);
  const double scale = sobolev_norms(y.displacement()).l2_of_gradient;
  return {y, e, scale, std::abs(e - model.energy(affine)), rep.iterations};
}

ExperimentRecord compare(const AtomisticModel& model, const ReferenceSolution& ref, const QcModel& qc,
                         const MeshFunction& y_qc, const EstimateReport& report) {
  ExperimentRecord r;
  r.dof = qc.mesh().num_nodes();
  r.mesh_hash = qc.mesh().hash();
  const LatticeFunction yl = interpolate_to_lattice(y_qc);
  std::vector<double> diff(yl.offsets().begin(), yl.offsets().end());
  const auto ya = ref.deformation.offsets();
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= ya[i];
  r.grad_error = sobolev_norms(LatticeFunction::from_offsets(model.n_half(), 0.0, std::move(diff))).l2_of_gradient;
  r.energy_error = std::abs(ref.energy - qc.energy(y_qc));
  r.rel_grad_error = ref.gradient_scale > 0.0 ? r.grad_error / ref.gradient_scale : r.grad_error;
  r.rel_energy_error = ref.energy_scale > 0.0 ? r.energy_error / ref.energy_scale : r.energy_error;
  r.grad_bound = report.gradient_bound;
  r.energy_bound = report.energy_bound;
  r.grad_efficiency = efficiency(r.grad_bound, r.grad_error);
  r.energy_efficiency = efficiency(r.energy_bound, r.energy_error);
  r.a_star = report.stability.a_star;
  r.eta = report.internal.eta;
  r.eta_f = report.external.eta_f;
  r.eta_q = report.external.eta_q;
  r.eta_hat_q = report.external.eta_hat_q;
  r.mu = report.energy.mu;
  r.mu_f = report.energy.mu_f;
  r.mu_q = report.energy.mu_q;
  r.assumptions_hold = report.stability.assumptions_hold;
  return r;
}

std::vector<int> default_apriori_radii(int n_half, std::size_t max_dof, const ExternalForce& force) {
  std::vector<int> out;
  for (int i = 0;; ++i) {
    const int m = static_cast<int>(std::lround(4.0 * std::pow(2.0, 0.5 * i)));
    if (m > n_half - 2) break;
    if (!out.empty() && m == out.back()) continue;
    out.push_back(m);
    if (generate_apriori(n_half, m, force).num_nodes() >= max_dof) break;
  }
  return out;
}

std::vector<ExperimentRecord> run_apriori(const AtomisticModel& model, const ReferenceSolution& ref,
                                          const ExperimentConfig& cfg, std::ostream* log) {
  using clock = std::chrono::steady_clock;
  const auto radii =
      cfg.apriori_radii.empty() ? default_apriori_radii(model.n_half(), cfg.adapt.max_dof, model.force())
                                : cfg.apriori_radii;
  std::vector<ExperimentRecord> out;
  std::optional<MeshFunction> previous;
  int step = 0;
  for (int m : radii) {
    const auto t0 = clock::now();
    auto mesh = std::make_shared<const Mesh>(generate_apriori(model.n_half(), m, model.force()));
    QcModel qc(model, mesh);
    const MeshFunction guess = cfg.adapt.warm_start && previous ? interpolate_to_mesh(mesh, *previous)
                                                                : MeshFunction::affine(mesh, model.stretch());
    MeshFunction y = qc.solve(guess, cfg.adapt.newton);
    const EstimateReport report = estimate(qc, y, cfg.adapt.estimator);
    ExperimentRecord r = compare(model, ref, qc, y, report);
    r.strategy = Strategy::apriori;
    r.step = step++;
    r.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t0).count();
    if (log) {
      auto j = r.to_json();
      j["atom_radius"] = m;
      *log << j.dump() << '\n';
    }
    out.push_back(r);
    previous = std::move(y);
  }
  return out;
}

std::vector<ExperimentRecord> run_adaptive_strategy(const AtomisticModel& model, const ReferenceSolution& ref,
                                                    const ExperimentConfig& cfg, IndicatorKind indicator,
                                                    std::ostream* log) {
  AdaptiveConfig acfg = cfg.adapt;
  acfg.indicator = indicator;
  const Strategy strategy =
      indicator == IndicatorKind::gradient ? Strategy::adaptive_gradient : Strategy::adaptive_energy;
  std::vector<ExperimentRecord> out;
  auto observer = [&](const QcModel& qc, const MeshFunction& y, const EstimateReport& report, AdaptiveStep& step) {
    ExperimentRecord r = compare(model, ref, qc, y, report);
    r.strategy = strategy;
    r.step = step.step;
    r.wall_time_ms = static_cast<std::int64_t>(step.wall_time_ms);
    step.extra = r.to_json();
    out.push_back(r);
  };
  run_adaptive(model, acfg, observer, log);
  return out;
}

double last_decade_slope(const std::vector<ExperimentRecord>& records, bool energy) {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t dmax = 0;
  for (const auto& r : records) dmax = std::max(dmax, r.dof);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& r : records) {
    const double v = energy ? r.rel_energy_error : r.rel_grad_error;
    if (10 * r.dof < dmax || !(v > 0.0)) continue;
    const double x = std::log(static_cast<double>(r.dof)), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

double error_at_dof(const std::vector<ExperimentRecord>& records, double dof) {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : records) pts.emplace_back(static_cast<double>(r.dof), r.rel_grad_error);
  std::sort(pts.begin(), pts.end());
  if (dof <= pts.front().first) return pts.front().second;
  if (dof >= pts.back().first) return pts.back().second;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].first >= dof) {
      const auto [x0, y0] = pts[i - 1];
      const auto [x1, y1] = pts[i];
      if (x1 == x0) return y1;
      const double t = std::log(dof / x0) / std::log(x1 / x0);
      return std::exp((1.0 - t) * std::log(y0) + t * std::log(y1));
    }
  }
  return pts.back().second;
}

void write_csv(const std::filesystem::path& path, const std::vector<ExperimentRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "strategy,step,dof,grad_error,energy_error,rel_grad_error,rel_energy_error,grad_bound,energy_bound,"
        "grad_efficiency,energy_efficiency,a_star,eta,eta_f,eta_q,eta_hat_q,mu,mu_f,mu_q,assumptions_hold,"
        "mesh_hash\n";
  for (const auto& r : records) {
    os << to_string(r.strategy) << ',' << r.step << ',' << r.dof << ',' << fmt(r.grad_error) << ','
       << fmt(r.energy_error) << ',' << fmt(r.rel_grad_error) << ',' << fmt(r.rel_energy_error) << ','
       << fmt(r.grad_bound) << ',' << fmt(r.energy_bound) << ',' << fmt(r.grad_efficiency) << ','
       << fmt(r.energy_efficiency) << ',' << fmt(r.a_star) << ',' << fmt(r.eta) << ',' << fmt(r.eta_f) << ','
       << fmt(r.eta_q) << ',' << fmt(r.eta_hat_q) << ',' << fmt(r.mu) << ',' << fmt(r.mu_f) << ',' << fmt(r.mu_q)
       << ',' << (r.assumptions_hold ? 1 : 0) << ',' << r.mesh_hash << '\n';
  }
}

namespace {

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("QCADAPT_THREADS")) n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::vector<Strategy>& strategies) {
  cfg.adapt.validate();
  const AtomisticModel model = make_model(cfg);
  ExperimentResult result{solve_reference(model, cfg.adapt.newton), {}, {}};
  std::filesystem::create_directories(cfg.out_dir);
  const bool want_csv = std::find(cfg.formats.begin(), cfg.formats.end(), "csv") != cfg.formats.end();
  const bool want_json = std::find(cfg.formats.begin(), cfg.formats.end(), "json") != cfg.formats.end();

  result.strategies.resize(strategies.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < strategies.size(); i = next++) {
      StrategyResult& sr = result.strategies[i];
      sr.strategy = strategies[i];
      const std::string name = to_string(sr.strategy);
      std::ofstream log;
      if (want_json) log.open(cfg.out_dir / (name + ".jsonl"), std::ios::binary);
      std::ostream* lp = want_json ? &log : nullptr;
      try {
        switch (sr.strategy) {
          case Strategy::apriori:
            sr.records = run_apriori(model, result.reference, cfg, lp);
            break;
          case Strategy::adaptive_gradient:
            sr.records = run_adaptive_strategy(model, result.reference, cfg, IndicatorKind::gradient, lp);
            break;
          case Strategy::adaptive_energy:
            sr.records = run_adaptive_strategy(model, result.reference, cfg, IndicatorKind::energy, lp);
            break;
        }
      } catch (const AdaptiveFailure& e) {
        sr.error = e.what();
        if (lp) *lp << nlohmann::json{{"error", e.what()}, {"mesh", e.mesh()}}.dump() << '\n';
      } catch (const std::exception& e) {
        sr.error = e.what();
        if (lp) *lp << nlohmann::json{{"error", e.what()}}.dump() << '\n';
      }
      if (want_csv) write_csv(cfg.out_dir / (name + ".csv"), sr.records);
    }
  };
  const unsigned workers = worker_count(cfg.threads, strategies.size());
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  nlohmann::json summary{{"version", version_string()},
                         {"config", cfg.to_json()},
                         {"reference",
                          {{"energy", result.reference.energy},
                           {"gradient_scale", result.reference.gradient_scale},
                           {"energy_scale", result.reference.energy_scale},
                           {"newton_iterations", result.reference.newton_iterations}}}};
  double common_dof = std::numeric_limits<double>::infinity();
  for (const auto& sr : result.strategies) {
    nlohmann::json s{{"steps", sr.records.size()},
                     {"grad_slope", last_decade_slope(sr.records, false)},
                     {"energy_slope", last_decade_slope(sr.records, true)}};
    if (!sr.error.empty()) s["error"] = sr.error;
    std::size_t violations = 0;
    for (const auto& r : sr.records) violations += r.bounds_hold() ? 0 : 1;
    s["bound_violations"] = violations;
    if (!sr.records.empty()) {
      const auto& last = sr.records.back();
      s["final"] = last.to_json();
      common_dof = std::min(common_dof, static_cast<double>(last.dof));
    }
    summary["strategies"][to_string(sr.strategy)] = s;
  }
  if (std::isfinite(common_dof)) {
    nlohmann::json matched{{"dof", common_dof}};
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& sr : result.strategies) {
      const double e = error_at_dof(sr.records, common_dof);
      matched["rel_grad_error"][to_string(sr.strategy)] = e;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    matched["max_ratio"] = hi / lo;
    summary["matched"] = matched;
  }
  result.summary = summary;
  if (want_json) {
    std::ofstream os(cfg.out_dir / "summary.json", std::ios::binary);
    os << summary.dump(2) << '\n';
  }
  return result;
}

}  // namespace qcadapt
