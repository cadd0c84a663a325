#include "qcadapt/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

namespace qcadapt {

namespace oracle {

double atomistic_stored_energy(const PairPotential& phi, const LatticeFunction& y) {
  const double eps = y.epsilon();
  double sum = 0.0;
  for (const Bond& b : bond_set(y.n_half())) {
    sum += eps * phi.eval(y.difference(b.left_index + b.range, b.range), 0);
  }
  return sum;
}

double a_star(const PairPotential& phi, const MeshFunction& y) {
  const LatticeFunction yl = interpolate_to_lattice(y);
  const int n = yl.n_half();
  std::vector<double> d(static_cast<std::size_t>(2 * n + 2));
  for (std::int64_t i = 0; i < 2 * n + 2; ++i) d[static_cast<std::size_t>(i)] = first_difference(yl, i - n);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < d.size(); ++i)
    best = std::min(best, phi.eval(d[i], 2) + 2.0 * phi.eval(d[i - 1] + d[i], 2) + 2.0 * phi.eval(d[i] + d[i + 1], 2));
  return best;
}

double internal_residual_dual_norm(const QcModel& model, const MeshFunction& y, double* magnitude) {
  const Mesh& mesh = model.mesh();
  const int n = mesh.n_half();
  const auto p = 2 * n;
  const double eps = mesh.epsilon();
  const LatticeFunction ga = model.atomistic().stored_gradient(interpolate_to_lattice(y));
  const std::vector<double> gq = model.stored_gradient(y);

  // r_j for the lattice hat at site j (window slot j + N - 1).
  Eigen::VectorXd r(p), r_abs(p);
  for (int s = 0; s < p; ++s) {
    const int j = s - n + 1;
    double v = ga.offsets()[static_cast<std::size_t>(s)];
    double v_abs = std::abs(v);
    for (std::size_t k = 0; k < mesh.num_nodes(); ++k) {
      double dist = std::fmod(std::abs(mesh.sites()[k] - j), static_cast<double>(p));
      dist = std::min(dist, p - dist);
      if (dist < 1.0) {
        v -= gq[k] * (1.0 - dist);
        v_abs += std::abs(gq[k]) * (1.0 - dist);
      }
    }
    r[s] = v;
    r_abs[s] = v_abs;
  }
  // ||v'||^2 = (1/eps) sum (v_l - v_{l-1})^2, pinned slot removed.
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(p, p);
  for (int s = 0; s < p; ++s) {
    const int t = (s + 1) % p;
    lap(s, s) += 1.0 / eps;
    lap(t, t) += 1.0 / eps;
    lap(s, t) -= 1.0 / eps;
    lap(t, s) -= 1.0 / eps;
  }
  const int pin = n - 1;
  Eigen::MatrixXd red(p - 1, p - 1);
  Eigen::VectorXd rr(p - 1), rr_abs(p - 1);
  for (int a = 0, ia = 0; a < p; ++a) {
    if (a == pin) continue;
    rr[ia] = r[a];
    rr_abs[ia] = r_abs[a];
    for (int b = 0, ib = 0; b < p; ++b) {
      if (b == pin) continue;
      red(ia, ib++) = lap(a, b);
    }
    ++ia;
  }
  const auto ldlt = red.ldlt();
  const Eigen::VectorXd z = ldlt.solve(rr);
  if (magnitude) *magnitude = std::sqrt(std::max(0.0, rr_abs.dot(ldlt.solve(rr_abs))));
  return std::sqrt(std::max(0.0, rr.dot(z)));
}

double external_residual(const QcModel& model, const LatticeFunction& v) {
  const MeshFunction vh = interpolate_to_mesh(model.mesh_ptr(), v);
  return model.atomistic().load(v) - model.load(vh);
}

double weighted_norm(const Mesh& mesh, const LatticeFunction& v) {
  const double eps = mesh.epsilon();
  const auto region = extended_continuum_elements(mesh);
  double total = 0.0;
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    if (!region[k]) continue;
    const auto kk = static_cast<std::int64_t>(k);
    const double a = mesh.site(kk - 1), b = mesh.site(kk);
    for (double c = std::floor(a); c < b; c += 1.0) {
      const double lo = std::max(a, c), hi = std::min(b, c + 1.0);
      if (!(hi > lo)) continue;
      // v is affine on the cell and w is smooth away from 0.
      const double v0 = v.value_at(lo * eps), v1 = v.value_at(hi * eps);
      total += boost::math::quadrature::gauss<double, 30>::integrate(
          [&](double x) {
            const double s = (x - lo * eps) / ((hi - lo) * eps);
            const double val = ((1.0 - s) * v0 + s * v1) / poincare_weight(x);
            return val * val;
          },
          lo * eps, hi * eps);
    }
  }
  return std::sqrt(total);
}

}  // namespace oracle

namespace {

std::vector<double> continuum_sites(double from, double to, std::mt19937_64& rng, bool minimal, bool lattice) {
  // Nodes strictly between `from` and `to`, all gaps >= 2.
  std::vector<double> out;
  std::uniform_real_distribution<double> gap(0.0, 3.0);
  double x = from;
  while (true) {
    double next = x + 2.0 + (minimal ? 0.0 : gap(rng));
    if (lattice) next = std::floor(next);
    if (to - next < 2.0) break;
    out.push_back(next);
    x = next;
  }
  return out;
}

}  // namespace

Mesh random_mesh(int n_half, std::mt19937_64& rng, bool minimal) {
  if (n_half < 4) throw std::invalid_argument("random meshes need N >= 4");
  std::uniform_int_distribution<int> right_d(1, n_half - 2), left_d(-(n_half - 2), -1);
  const int right = right_d(rng), left = left_d(rng);
  const bool lattice = std::bernoulli_distribution(0.5)(rng);
  std::vector<double> sites;
  const auto lower = continuum_sites(-n_half, left, rng, minimal, lattice);
  for (double t : lower) sites.push_back(t);
  for (int ell = left; ell <= right; ++ell) sites.push_back(ell);
  const auto upper = continuum_sites(right, n_half, rng, minimal, lattice);
  sites.insert(sites.end(), upper.begin(), upper.end());
  sites.push_back(n_half);
  return Mesh(n_half, std::move(sites), left, right);
}

Mesh fully_atomistic_mesh(int n_half) {
  std::vector<double> sites;
  for (int ell = -n_half + 1; ell <= n_half; ++ell) sites.push_back(ell);
  return Mesh(n_half, std::move(sites), -n_half, n_half);
}

MeshFunction random_deformation(std::shared_ptr<const Mesh> mesh, double stretch, double amplitude,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  const std::size_t pin = mesh->pinned_node();
  std::vector<double> values(mesh->num_nodes());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double x = mesh->node(static_cast<std::int64_t>(k));
    values[k] = k == pin ? 0.0 : stretch * x + u(rng) * mesh->epsilon();
  }
  return MeshFunction(std::move(mesh), stretch, std::move(values));
}

LatticeFunction random_lattice_displacement(int n_half, double amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  LatticeFunction v(n_half, 0.0);
  for (std::int64_t ell = -n_half + 1; ell <= n_half; ++ell) v.set(ell, ell == 0 ? 0.0 : u(rng));
  return v;
}

std::shared_ptr<const ExternalForce> random_force(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0:
      return std::make_shared<ZeroForce>();
    case 1:
      return std::make_shared<ConstantForce>(u(rng));
    case 2:
      return std::make_shared<TrigonometricForce>(u(rng), u(rng), 0.5 * u(rng));
    default:
      return std::make_shared<SingularDefectForce>(0.1 + 0.4 * std::abs(u(rng)));
  }
}

bool OracleReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const OracleCheck& c) { return c.violations == 0; });
}

nlohmann::json OracleReport::to_json() const {
  nlohmann::json j{{"seed", seed}, {"instances", instances}, {"passed", passed()}};
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"cases", c.cases},
                           {"violations", c.violations},
                           {"worst", c.worst},
                           {"first_failure", c.first_failure}});
  }
  return j;
}

namespace {

// Round-off allowance for inequalities between independently assembled sums.
constexpr double kRelSlack = 1e-12;
constexpr double kAbsSlack = 1e-14;

struct Recorder {
  OracleCheck check;
  explicit Recorder(std::string name) { check.name = std::move(name); }

  // `scale` is the size of the terms cancelling inside lhs; round-off is
  // allowed relative to it.
  void le(double lhs, double rhs, const std::string& where, double scale = 0.0) {
    ++check.cases;
    if (rhs > 0.0) check.worst = std::max(check.worst, lhs / rhs);
    if (!(lhs <= rhs * (1.0 + kRelSlack) + kAbsSlack + kRelSlack * scale)) fail(where, lhs, rhs);
  }

  void close(double a, double b, double rel, const std::string& where) {
    ++check.cases;
    const double d = std::abs(a - b) / std::max(1.0, std::abs(b));
    check.worst = std::max(check.worst, d);
    if (!(d <= rel)) fail(where, a, b);
  }

  void fail(const std::string& where, double a, double b) {
    if (check.violations++ == 0) {
      std::ostringstream os;
      os.precision(17);
      os << where << ": " << a << " vs " << b;
      check.first_failure = os.str();
    }
  }
};

}  // namespace

OracleReport oracle_suite(std::uint64_t seed, const std::vector<int>& sizes, int cases_per_size, int test_functions) {
  OracleReport rep;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  Recorder energy_forms("qc_energy_forms_agree"), a_star("a_star_fast_equals_brute_force"),
      dual("eta_dominates_internal_dual_norm"), mu("mu_bounds_internal_energy_difference"),
      ext_energy("mu_f_plus_mu_q_bound_external_energy_difference"),
      ext_res("eta_f_plus_eta_q_bound_external_residual"), full("fully_atomistic_estimators_vanish");
  auto phi = std::make_shared<MorsePotential>(5.0);
  std::uniform_real_distribution<double> stretch_d(0.8, 1.2);

  for (int n : sizes) {
    for (int c = 0; c < cases_per_size; ++c) {
      const bool fully = c % 10 == 1;
      auto mesh = std::make_shared<const Mesh>(fully ? fully_atomistic_mesh(n) : random_mesh(n, rng, c % 10 == 0));
      const double stretch = stretch_d(rng);
      const auto force = random_force(rng);
      const AtomisticModel model(phi, n, stretch, force);
      const QcModel qc(model, mesh);
      const MeshFunction y = random_deformation(mesh, stretch, 0.1, rng);
      std::ostringstream where_os;
      where_os << "N=" << n << " case=" << c << " force=" << force->describe();
      const std::string where = where_os.str();
      ++rep.instances;

      const double e_bond = qc.bond_sum_stored_energy(y), e_cb = qc.stored_energy(y);
      energy_forms.close(e_cb, e_bond, 1e-12, where);

      const auto st = stability(qc, y, false);
      a_star.close(st.a_star, oracle::a_star(*phi, y), 0.0, where);

      const EstimateReport r = estimate(qc, y, {false});
      double dual_scale = 0.0;
      const double dual_norm = oracle::internal_residual_dual_norm(qc, y, &dual_scale);
      dual.le(dual_norm, r.internal.eta, where, dual_scale);

      const double ea = oracle::atomistic_stored_energy(*phi, interpolate_to_lattice(y));
      mu.le(std::abs(ea - e_cb), r.energy.mu, where);

      const MeshFunction u = interpolate_to_mesh(mesh, 0.0, [&](double x) { return y(x) - stretch * x; });
      const double ext_diff = std::abs(qc.load(u) - model.load(interpolate_to_lattice(u)));
      ext_energy.le(ext_diff, r.energy.mu_f + r.energy.mu_q, where);

      for (int t = 0; t < test_functions; ++t) {
        const LatticeFunction v = random_lattice_displacement(n, 1.0, rng);
        const double lhs = std::abs(oracle::external_residual(qc, v));
        ext_res.le(lhs, (r.external.eta_f + r.external.eta_q) * sobolev_norms(v).l2_of_gradient, where);
      }

      if (fully) {
        const double total = r.internal.eta + r.external.eta_f + r.external.eta_q + r.external.eta_hat_q +
                             r.energy.mu + r.energy.mu_f + r.energy.mu_q;
        full.le(total, 0.0, where);
      }
    }
  }
  rep.checks = {energy_forms.check, a_star.check, dual.check, mu.check, ext_energy.check, ext_res.check, full.check};
  return rep;
}

}  // namespace qcadapt
