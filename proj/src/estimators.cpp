#include "qcadapt/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qcadapt {

namespace {

std::int64_t wrap(std::int64_t k, std::size_t n) {
  const auto m = static_cast<std::int64_t>(n);
  const std::int64_t r = k % m;
  return r < 0 ? r + m : r;
}

bool same_mod(double a, double b, double period) {
  const double d = (a - b) / period;
  return std::abs(d - std::round(d)) * period <= 1e-9;
}

double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Lattice strain (y(ell) - y(ell-1)) / eps of the interpolant I_eps y.
double cell_strain(const MeshFunction& y, std::int64_t ell) {
  const auto t = static_cast<double>(ell);
  return y.difference(t - 1.0, t);
}

double bond_slope(const MeshFunction& y, double left, int range) {
  return y.difference(left, left + range);
}

}  // namespace

std::vector<bool> extended_continuum_elements(const Mesh& mesh) {
  const std::size_t n = mesh.num_elements();
  std::vector<bool> out(n, false);
  const double left = mesh.atom_left_site(), right = mesh.atom_right_site(), p = mesh.period();
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<std::int64_t>(k);
    if (!mesh.is_atomistic_element(kk)) {
      out[k] = true;
      continue;
    }
    const double a = mesh.site(kk - 1), b = mesh.site(kk);
    // Atomistic elements inside the lattice cell cut by an off-lattice interface.
    if (right != std::floor(right) && same_mod(b, right, p) && b - a <= b - std::floor(b) + 1e-12) out[k] = true;
    if (left != std::floor(left) && same_mod(a, left, p) && b - a <= std::ceil(a) - a + 1e-12) out[k] = true;
  }
  return out;
}

std::vector<Bond> bonds_containing(double t) {
  const double fl = std::floor(t);
  const auto ell = static_cast<std::int64_t>(fl);
  if (t == fl) return {{ell - 1, 2}};
  return {{ell, 1}, {ell - 1, 2}, {ell, 2}};
}

InternalResidual internal_residual(const QcModel& model, const MeshFunction& y) {
  const Mesh& mesh = model.mesh();
  const auto& phi = model.atomistic().potential();
  const double eps = mesh.epsilon();
  InternalResidual out;
  out.eta_k.assign(mesh.num_nodes(), 0.0);
  double total = 0.0;
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(mesh.num_nodes()); ++k) {
    if (!mesh.is_continuum_node(k)) continue;
    double sq = 0.0;
    for (const Bond& b : bonds_containing(mesh.site(k))) {
      const auto left = static_cast<double>(b.left_index);
      const double r = b.range;
      const auto split = split_sites(mesh, left, left + r);
      const double flux = phi.eval(r * bond_slope(y, left, b.range), 1);
      if (split.atom_part) {
        const double len = split.atom_part->length();
        const double d = y.difference(split.atom_part->left, split.atom_part->right);
        const double diff = flux - phi.eval(r * d, 1);
        sq += len * eps * diff * diff;
      }
      for (const auto& part : split.continuum_parts) {
        const double diff = flux - phi.eval(r * y.element_slope(static_cast<std::int64_t>(part.element)), 1);
        sq += part.part.length() * eps * diff * diff;
      }
    }
    out.eta_k[static_cast<std::size_t>(k)] = std::sqrt(sq);
    total += sq;
  }
  out.eta = std::sqrt(3.0 * total);
  return out;
}

double poincare_weight(double x) {
  const double t = std::abs(reduce_to_cell(x));
  const double l = std::log(t);
  return t * l * l;
}

ExternalResidual external_residual(const Mesh& mesh, const ExternalForce& force) {
  const std::size_t n = mesh.num_elements();
  ExternalResidual out;
  out.eta_f_k.assign(n, 0.0);
  out.eta_q_k.assign(n, 0.0);
  out.eta_hat_q_k.assign(n, 0.0);
  if (force.identically_zero()) return out;
  const double eps = mesh.epsilon();
  const double eps4 = std::pow(eps, 4);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double ln2sq = std::numbers::ln2 * std::numbers::ln2;
  const auto region = extended_continuum_elements(mesh);
  for (std::size_t k = 0; k < n; ++k) {
    if (!region[k]) continue;
    const Interval e = mesh.element(static_cast<std::int64_t>(k));
    const double h = e.length();
    const double c = eps4 + std::pow(h, 4);
    const double f0 = force_l2_squared(force, 0, e.left, e.right);
    const double f1 = force_l2_squared(force, 1, e.left, e.right);
    const double f2 = force_l2_squared(force, 2, e.left, e.right);
    const double w2 = force_weighted_l2_squared(force, 2, e.left, e.right, poincare_weight);
    out.eta_f_k[k] = std::sqrt(h * h / pi2 * f0);
    out.eta_q_k[k] = std::sqrt(c * f1 + c / (4.0 * pi2) * f2);
    out.eta_hat_q_k[k] = std::sqrt(c * f1 + c / ln2sq * w2);
  }
  out.eta_f = std::sqrt(sum_squares(out.eta_f_k));
  out.eta_q = std::sqrt(sum_squares(out.eta_q_k));
  out.eta_hat_q = std::sqrt(sum_squares(out.eta_hat_q_k));
  return out;
}

double site_stability(const PairPotential& phi, const LatticeFunction& y, std::int64_t ell) {
  const double dm = first_difference(y, ell - 1), d0 = first_difference(y, ell), dp = first_difference(y, ell + 1);
  return phi.eval(d0, 2) + 2.0 * phi.eval(dm + d0, 2) + 2.0 * phi.eval(d0 + dp, 2);
}

StabilityResult stability(const QcModel& model, const MeshFunction& y, bool strict) {
  const Mesh& mesh = model.mesh();
  const auto& phi = model.atomistic().potential();
  StabilityResult out;
  out.a_star = out.b_min = out.min_strain = std::numeric_limits<double>::infinity();
  // Sites with dist(l - 1/2, nodes) < 3/2 see more than one element slope.
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(mesh.num_nodes()); ++k) {
    const double t = mesh.site(k);
    for (auto ell = static_cast<std::int64_t>(std::floor(t - 1.0)) + 1; static_cast<double>(ell) < t + 2.0; ++ell) {
      const double dm = cell_strain(y, ell - 1), d0 = cell_strain(y, ell), dp = cell_strain(y, ell + 1);
      out.a_star =
          std::min(out.a_star, phi.eval(d0, 2) + 2.0 * phi.eval(dm + d0, 2) + 2.0 * phi.eval(d0 + dp, 2));
      out.b_min = std::min(out.b_min, -phi.eval(d0 + dp, 2));
      out.min_strain = std::min({out.min_strain, dm, d0, dp});
    }
  }
  // Remaining sites: three consecutive cells inside one element.
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(mesh.num_elements()); ++k) {
    const double a = mesh.site(k - 1), b = mesh.site(k);
    if (std::ceil(a) + 3.0 > std::floor(b)) continue;
    const double s = y.element_slope(k);
    out.a_star = std::min(out.a_star, phi.eval(s, 2) + 4.0 * phi.eval(2.0 * s, 2));
    out.b_min = std::min(out.b_min, -phi.eval(2.0 * s, 2));
    out.min_strain = std::min(out.min_strain, s);
  }
  out.assumptions_hold = out.min_strain >= 0.5 * phi.inflection_point() && out.b_min >= 0.0;
  if (strict && !out.assumptions_hold)
    throw AssumptionViolation("stability assumptions violated: min strain " + std::to_string(out.min_strain) +
                              ", min B " + std::to_string(out.b_min));
  return out;
}

LipschitzConstants lipschitz_constants(const PairPotential& phi, double mu) {
  if (!(mu > 0.0)) throw std::domain_error("strain lower bound must be positive");
  return {phi.derivative_bound(2, mu) + 4.0 * phi.derivative_bound(2, 2.0 * mu),
          phi.derivative_bound(3, mu) + 8.0 * phi.derivative_bound(3, 2.0 * mu)};
}

double gradient_error_bound(double a_star, double eta, double eta_f, double eta_q) {
  if (!(a_star > 0.0)) throw std::invalid_argument("gradient bound needs A_* > 0");
  return 2.0 / a_star * (eta + eta_f + eta_q);
}

double energy_error_bound(double a_star, double c_h, double eta, double eta_f, double eta_q, double mu,
                          double mu_f, double mu_q) {
  if (!(a_star > 0.0)) throw std::invalid_argument("energy bound needs A_* > 0");
  return 4.0 * c_h / (a_star * a_star) * (eta * eta + eta_f * eta_f + eta_q * eta_q) + mu + mu_f + mu_q;
}

EnergyEstimators energy_estimators(const QcModel& model, const MeshFunction& y) {
  const Mesh& mesh = model.mesh();
  const auto& phi = model.atomistic().potential();
  const auto& force = model.atomistic().force();
  const double eps = mesh.epsilon();
  const double stretch = y.macroscopic_slope();
  const auto n = static_cast<std::int64_t>(mesh.num_nodes());
  EnergyEstimators out;
  out.mu_k.assign(mesh.num_nodes(), 0.0);
  out.mu_k_signed.assign(mesh.num_nodes(), 0.0);
  out.mu_f_k.assign(mesh.num_nodes(), 0.0);
  out.mu_q_k.assign(mesh.num_elements(), 0.0);

  for (std::int64_t k = 0; k < n; ++k) {
    if (!mesh.is_continuum_node(k)) continue;
    const double t = mesh.site(k);
    double s = 0.0;
    for (const Bond& b : bonds_containing(t)) {
      const auto left = static_cast<double>(b.left_index);
      const double r = b.range;
      const auto split = split_sites(mesh, left, left + r);
      const double eb = phi.eval(r * bond_slope(y, left, b.range), 0);
      if (split.atom_part) {
        const double len = split.atom_part->length();
        const double d = y.difference(split.atom_part->left, split.atom_part->right);
        s += len * eps / r * (eb - phi.eval(r * d, 0));
      }
      for (const auto& part : split.continuum_parts)
        s += part.part.length() * eps / r *
             (eb - phi.eval(r * y.element_slope(static_cast<std::int64_t>(part.element)), 0));
    }
    out.mu_k_signed[static_cast<std::size_t>(k)] = s;
    out.mu_k[static_cast<std::size_t>(k)] = std::abs(s);

    if (t != std::floor(t) && !force.identically_zero()) {
      const double jump = y.element_slope(k + 1) - y.element_slope(k);
      out.mu_f_k[static_cast<std::size_t>(k)] =
          0.5 * eps * force_l1(force, std::floor(t) * eps, std::ceil(t) * eps) * std::abs(jump);
    }
  }

  if (!force.identically_zero()) {
    // u = y - F x in lattice coordinates.
    auto u_at = [&](double t) { return y.offset_at_site(t) + (y.macroscopic_slope() - stretch) * t * eps; };
    const auto region = extended_continuum_elements(mesh);
    for (std::int64_t k = 0; k < n; ++k) {
      if (!region[static_cast<std::size_t>(k)]) continue;
      const double a = mesh.site(k - 1), b = mesh.site(k);
      const double h = (b - a) * eps;
      const double slope = y.element_slope(k) - stretch;
      // (f I_eps u)'' piecewise: end cells cut by off-lattice nodes, affine middle.
      double lattice_part = 0.0;
      const double ca = std::ceil(a), fb = std::floor(b);
      if (a < ca) {
        const double cell_slope = (u_at(ca) - u_at(ca - 1.0)) / eps;
        const double va = u_at(ca - 1.0) + cell_slope * (a - (ca - 1.0)) * eps;
        lattice_part += force_times_affine_second_derivative_l1(force, a * eps, std::min(ca, b) * eps, va, cell_slope);
      }
      if (fb > ca)
        lattice_part += force_times_affine_second_derivative_l1(force, ca * eps, fb * eps, u_at(ca), slope);
      if (fb < b && fb >= ca) {
        const double cell_slope = (u_at(fb + 1.0) - u_at(fb)) / eps;
        lattice_part += force_times_affine_second_derivative_l1(force, fb * eps, b * eps, u_at(fb), cell_slope);
      }
      const double mesh_part = force_times_affine_second_derivative_l1(force, a * eps, b * eps, u_at(a), slope);
      out.mu_q_k[static_cast<std::size_t>(k)] = 0.25 * eps * eps * lattice_part + 0.25 * h * h * mesh_part;
    }
  }
  out.mu = sum(out.mu_k);
  out.mu_f = sum(out.mu_f_k);
  out.mu_q = sum(out.mu_q_k);
  return out;
}

Indicators indicators(const EstimateReport& report, const Mesh& mesh) {
  const double a_star = report.stability.a_star;
  const bool stable = a_star > 0.0;
  const std::size_t n = mesh.num_elements();
  const auto& eta = report.internal.eta_k;
  const auto& eta_f = report.external.eta_f_k;
  const auto& mu = report.energy.mu_k;
  const auto& mu_f = report.energy.mu_f_k;
  const auto& mu_q = report.energy.mu_q_k;
  auto at = [n](const std::vector<double>& v, std::int64_t k) { return v[static_cast<std::size_t>(wrap(k, n))]; };
  const double c_energy = 4.0 * report.lipschitz.c_h / (a_star * a_star);

  Indicators out;
  out.rho_grad_k.assign(n, 0.0);
  out.rho_energy_k.assign(n, 0.0);
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(n); ++k) {
    if (mesh.is_atomistic_element(k)) continue;
    const bool after_right = same_mod(mesh.site(k - 1), mesh.atom_right_site(), mesh.period());
    const bool before_left = same_mod(mesh.site(k), mesh.atom_left_site(), mesh.period());
    const double el = at(eta, k - 1), er = at(eta, k), fk = at(eta_f, k);
    double braced = (after_right ? 3.0 : 1.5) * el * el + (before_left ? 3.0 : 1.5) * er * er + fk * fk;
    if (after_right) braced += at(eta_f, k - 1) * at(eta_f, k - 1);
    if (before_left) braced += at(eta_f, k + 1) * at(eta_f, k + 1);
    out.rho_grad_k[static_cast<std::size_t>(k)] = std::sqrt(stable ? 4.0 / a_star * braced : braced);
    if (!stable) {
      out.rho_energy_k[static_cast<std::size_t>(k)] = out.rho_grad_k[static_cast<std::size_t>(k)];
      continue;
    }

    const double wl = after_right ? 1.0 : 0.5, wr = before_left ? 1.0 : 0.5;
    double local = wl * (at(mu, k - 1) + at(mu_f, k - 1)) + wr * (at(mu, k) + at(mu_f, k)) + at(mu_q, k);
    if (after_right) local += at(mu_q, k - 1);
    if (before_left) local += at(mu_q, k + 1);
    out.rho_energy_k[static_cast<std::size_t>(k)] = c_energy * braced + local;
  }
  return out;
}

EstimateReport estimate(const QcModel& model, const MeshFunction& y, const EstimatorOptions& options) {
  EstimateReport rep;
  rep.singular_force_mode = options.singular_force_mode;
  rep.internal = internal_residual(model, y);
  rep.external = external_residual(model.mesh(), model.atomistic().force());
  rep.energy = energy_estimators(model, y);
  rep.stability = stability(model, y, false);
  const auto& phi = model.atomistic().potential();
  rep.strain_lower_bound = std::min(rep.stability.min_strain, 0.5 * phi.inflection_point());
  rep.lipschitz = lipschitz_constants(phi, rep.strain_lower_bound);
  const double q = options.singular_force_mode ? rep.external.eta_hat_q : rep.external.eta_q;
  if (rep.stability.a_star > 0.0) {
    rep.gradient_bound = gradient_error_bound(rep.stability.a_star, rep.internal.eta, rep.external.eta_f, q);
    rep.energy_bound = energy_error_bound(rep.stability.a_star, rep.lipschitz.c_h, rep.internal.eta,
                                          rep.external.eta_f, q, rep.energy.mu, rep.energy.mu_f, rep.energy.mu_q);
  } else {
    rep.gradient_bound = rep.energy_bound = std::numeric_limits<double>::infinity();
  }
  rep.indicators = indicators(rep, model.mesh());
  return rep;
}

nlohmann::json EstimateReport::to_json() const {
  return {{"eta_k", internal.eta_k},
          {"eta", internal.eta},
          {"eta_f_k", external.eta_f_k},
          {"eta_q_k", external.eta_q_k},
          {"eta_hat_q_k", external.eta_hat_q_k},
          {"eta_f", external.eta_f},
          {"eta_q", external.eta_q},
          {"eta_hat_q", external.eta_hat_q},
          {"mu_k", energy.mu_k},
          {"mu_f_k", energy.mu_f_k},
          {"mu_q_k", energy.mu_q_k},
          {"mu", energy.mu},
          {"mu_f", energy.mu_f},
          {"mu_q", energy.mu_q},
          {"a_star", stability.a_star},
          {"b_min", stability.b_min},
          {"min_strain", stability.min_strain},
          {"assumptions_hold", stability.assumptions_hold},
          {"strain_lower_bound", strain_lower_bound},
          {"c_h", lipschitz.c_h},
          {"c_lip", lipschitz.c_lip},
          {"singular_force_mode", singular_force_mode},
          {"gradient_bound", gradient_bound},
          {"energy_bound", energy_bound},
          {"rho_grad_k", indicators.rho_grad_k},
          {"rho_energy_k", indicators.rho_energy_k}};
}

}  // namespace qcadapt
