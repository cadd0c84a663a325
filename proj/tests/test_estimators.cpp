#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qcadapt/estimators.hpp"
#include "qcadapt/oracles.hpp"

using namespace qcadapt;

namespace {

std::shared_ptr<const PairPotential> morse() { return std::make_shared<MorsePotential>(5.0); }

AtomisticModel chain(int n, double stretch, std::shared_ptr<const ExternalForce> f = std::make_shared<ZeroForce>()) {
  return AtomisticModel(morse(), n, stretch, std::move(f));
}

std::shared_ptr<const Mesh> hand_mesh() {
  return std::make_shared<const Mesh>(
      16, std::vector<double>{-12, -8, -5, -3, -2, -1, 0, 1, 2, 3, 5, 8, 12, 16}, -3.0, 3.0);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

TEST_CASE("uniform state without load has vanishing estimators") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10 + 2 * trial;
    const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng, trial % 4 == 0));
    for (double stretch : {0.8, 1.0, 1.2}) {
      const QcModel qc(chain(n, stretch), mesh);
      const EstimateReport r = estimate(qc, MeshFunction::affine(mesh, stretch));
      CHECK(r.internal.eta <= 1e-12);
      CHECK(r.external.eta_f == 0.0);
      CHECK(r.external.eta_q == 0.0);
      CHECK(r.external.eta_hat_q == 0.0);
      CHECK(r.energy.mu <= 1e-12);
      CHECK(r.energy.mu_f == 0.0);
      CHECK(r.energy.mu_q == 0.0);
      CHECK(max_abs(r.indicators.rho_grad_k) <= 1e-12);
      CHECK(max_abs(r.indicators.rho_energy_k) <= 1e-12);
      // Past the inflection point A_* < 0 and no bound is available.
      if (stretch < 1.1) {
        CHECK(r.gradient_bound <= 1e-12);
        CHECK(r.energy_bound <= 1e-12);
      } else {
        CHECK(r.stability.a_star < 0.0);
        CHECK(std::isinf(r.gradient_bound));
      }
    }
  }
}

TEST_CASE("fully atomistic mesh") {
  std::mt19937_64 rng(32);
  const auto mesh = std::make_shared<const Mesh>(fully_atomistic_mesh(10));
  const QcModel qc(chain(10, 1.0, std::make_shared<SingularDefectForce>(0.4)), mesh);
  const MeshFunction y = random_deformation(mesh, 1.0, 0.2, rng);
  const EstimateReport r = estimate(qc, y);
  CHECK(r.internal.eta == 0.0);
  CHECK(r.external.eta_f == 0.0);
  CHECK(r.external.eta_hat_q == 0.0);
  CHECK(r.energy.mu == 0.0);
  CHECK(r.energy.mu_f == 0.0);
  CHECK(r.energy.mu_q == 0.0);
}

TEST_CASE("estimator entries are nonnegative and vanish inside the atomistic region") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 8 + trial % 9;
    const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng, trial % 3 == 0));
    const QcModel qc(chain(n, 1.0, random_force(rng)), mesh);
    const MeshFunction y = random_deformation(mesh, 1.0, 0.1, rng);
    const EstimateReport r = estimate(qc, y, {false});
    for (std::size_t k = 0; k < mesh->num_nodes(); ++k) {
      CHECK(r.internal.eta_k[k] >= 0.0);
      CHECK(r.energy.mu_k[k] >= 0.0);
      CHECK(r.energy.mu_f_k[k] >= 0.0);
      if (!mesh->is_continuum_node(static_cast<std::int64_t>(k))) CHECK(r.internal.eta_k[k] == 0.0);
    }
    for (std::size_t k = 0; k < mesh->num_elements(); ++k) {
      CHECK(r.external.eta_f_k[k] >= 0.0);
      CHECK(r.external.eta_q_k[k] >= 0.0);
      CHECK(r.energy.mu_q_k[k] >= 0.0);
      CHECK(r.indicators.rho_grad_k[k] >= 0.0);
      CHECK(r.indicators.rho_energy_k[k] >= 0.0);
      if (mesh->is_atomistic_element(static_cast<std::int64_t>(k))) {
        CHECK(r.indicators.rho_grad_k[k] == 0.0);
        CHECK(r.indicators.rho_energy_k[k] == 0.0);
      }
    }
    CHECK(r.internal.eta == doctest::Approx(std::sqrt(3.0 * sum_squares(r.internal.eta_k))));
    CHECK(r.external.eta_f == doctest::Approx(std::sqrt(sum_squares(r.external.eta_f_k))));
  }
}

TEST_CASE("bonds containing a point") {
  CHECK(bonds_containing(3.0).size() == 1);
  CHECK(bonds_containing(3.0)[0].left_index == 2);
  const auto b = bonds_containing(3.5);
  CHECK(b.size() == 3);
  for (const Bond& bond : b) {
    CHECK(static_cast<double>(bond.left_index) < 3.5);
    CHECK(static_cast<double>(bond.left_index + bond.range) > 3.5);
  }
}

TEST_CASE("internal residual bounds the exact dual norm") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 8 + 4 * (trial % 3);
    const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng, trial % 2 == 0));
    const QcModel qc(chain(n, 1.0), mesh);
    const MeshFunction y = random_deformation(mesh, 1.0, 0.15, rng);
    double scale = 0.0;
    const double dual = oracle::internal_residual_dual_norm(qc, y, &scale);
    CHECK(dual <= internal_residual(qc, y).eta + 1e-13 * scale);
  }
}

TEST_CASE("external residual with a constant load") {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const Mesh mesh = random_mesh(20, rng);
    const double c = 0.7;
    const ExternalResidual r = external_residual(mesh, ConstantForce(c));
    const auto region = extended_continuum_elements(mesh);
    double expected = 0.0;
    for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
      if (!region[k]) continue;
      const double h = mesh.element_length(static_cast<std::int64_t>(k));
      expected += h * h * c * c * h / (std::numbers::pi * std::numbers::pi);
    }
    CHECK(r.eta_f * r.eta_f == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.eta_q == 0.0);
    CHECK(r.eta_hat_q == 0.0);
  }
  const ExternalResidual zero = external_residual(*hand_mesh(), ZeroForce());
  CHECK(zero.eta_f == 0.0);
  CHECK(zero.eta_q == 0.0);
}

TEST_CASE("external residual bound on random test functions") {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 8 + 4 * (trial % 3);
    const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng));
    const auto f = std::make_shared<TrigonometricForce>(0.5, -0.3, 0.2);
    const QcModel qc(chain(n, 1.0, f), mesh);
    const ExternalResidual r = external_residual(*mesh, *f);
    for (int i = 0; i < 100; ++i) {
      const LatticeFunction v = random_lattice_displacement(n, 0.1, rng);
      CHECK(std::abs(oracle::external_residual(qc, v)) <= (r.eta_f + r.eta_q) * sobolev_norms(v).l2_of_gradient + 1e-14);
    }
  }
}

TEST_CASE("weighted quadrature term near the defect") {
  const auto f = SingularDefectForce(0.4);
  const Mesh mesh = generate_apriori(2500, 16, f);
  const ExternalResidual r = external_residual(mesh, f);
  CHECK(r.eta_hat_q > 0.0);
  // The element touching the right interface sees the largest f''.
  std::size_t k = 0;
  while (mesh.site(static_cast<std::int64_t>(k) - 1) != mesh.atom_right_site()) ++k;
  CHECK(r.eta_hat_q_k[k] <= r.eta_q_k[k]);
}

TEST_CASE("Poincare weight") {
  CHECK(poincare_weight(0.25) == doctest::Approx(0.25 * std::log(0.25) * std::log(0.25)));
  CHECK(poincare_weight(-0.25) == poincare_weight(0.25));
  CHECK(poincare_weight(1.25) == doctest::Approx(poincare_weight(0.25)));
}

TEST_CASE("weighted Poincare inequality") {
  std::mt19937_64 rng(37);
  const auto f = SingularDefectForce(0.4);
  for (int radius : {4, 16}) {
    const Mesh mesh = generate_apriori(200, radius, f);
    for (int i = 0; i < 10; ++i) {
      const LatticeFunction v = random_lattice_displacement(200, 0.01, rng);
      CHECK(oracle::weighted_norm(mesh, v) <= sobolev_norms(v).l2_of_gradient / std::log(2.0));
    }
  }
}

TEST_CASE("stability constant") {
  const MorsePotential phi(5.0);
  SUBCASE("uniform state closed form") {
    const double alpha = 5.0;
    const double d2_at_2 = 2 * alpha * alpha * (2 * std::exp(-2 * alpha) - std::exp(-alpha));
    const auto mesh = hand_mesh();
    const QcModel qc(chain(16, 1.0), mesh);
    const auto st = stability(qc, MeshFunction::affine(mesh, 1.0));
    CHECK(st.a_star == doctest::Approx(50.0 + 4.0 * d2_at_2).epsilon(1e-14));
    CHECK(st.assumptions_hold);
    const LatticeFunction y = LatticeFunction::affine(16, 1.0);
    for (std::int64_t ell = -15; ell <= 16; ++ell) CHECK(site_stability(phi, y, ell) == site_stability(phi, y, 1));
  }
  SUBCASE("fast evaluation equals the site-by-site minimum") {
    std::mt19937_64 rng(38);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 8 + trial % 20;
      const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng, trial % 3 == 0));
      const QcModel qc(chain(n, 1.0), mesh);
      const MeshFunction y = random_deformation(mesh, 0.95 + 0.002 * trial, 0.1, rng);
      CHECK(stability(qc, y, false).a_star == oracle::a_star(phi, y));
    }
  }
  SUBCASE("compressed element violates the assumptions") {
    const auto mesh = hand_mesh();
    const QcModel qc(chain(16, 1.0), mesh);
    std::vector<double> values(mesh->num_nodes());
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = mesh->node(static_cast<std::int64_t>(k));
    values[11] = values[10] + 0.5 * 3 * mesh->epsilon();
    const MeshFunction y(mesh, 1.0, values);
    CHECK_THROWS_AS(stability(qc, y), AssumptionViolation);
    const auto st = stability(qc, y, false);
    CHECK_FALSE(st.assumptions_hold);
    CHECK(st.min_strain == doctest::Approx(0.5));
  }
}

TEST_CASE("Lipschitz constants") {
  const MorsePotential phi(5.0);
  const double tail = 1.0 + std::log(4.0) / 5.0 + 0.05;
  const auto c = lipschitz_constants(phi, tail);
  CHECK(c.c_h == doctest::Approx(std::abs(phi.eval(tail, 2)) + 4 * std::abs(phi.eval(2 * tail, 2))));

  const double mu = 0.5 * phi.inflection_point();
  double m2 = 0.0, m2_double = 0.0;
  for (int i = 0; i <= 400000; ++i) {
    const double s = mu + 20.0 * i / 400000.0;
    m2 = std::max(m2, std::abs(phi.eval(s, 2)));
    if (s >= 2 * mu) m2_double = std::max(m2_double, std::abs(phi.eval(s, 2)));
  }
  m2_double = std::max(m2_double, std::abs(phi.eval(2 * mu, 2)));
  CHECK(lipschitz_constants(phi, mu).c_h == doctest::Approx(m2 + 4 * m2_double).epsilon(1e-6));

  double prev = lipschitz_constants(phi, 0.4).c_h;
  for (int i = 1; i <= 100; ++i) {
    const double next = lipschitz_constants(phi, 0.4 + 0.02 * i).c_h;
    CHECK(next <= prev);
    prev = next;
  }
  CHECK_THROWS_AS(lipschitz_constants(phi, 0.0), std::domain_error);
}

TEST_CASE("error bound formulas") {
  CHECK(gradient_error_bound(2.0, 1.0, 2.0, 3.0) == doctest::Approx(6.0));
  CHECK(energy_error_bound(2.0, 3.0, 1.0, 2.0, 3.0, 0.1, 0.2, 0.3) == doctest::Approx(3.0 * 14.0 + 0.6));
  CHECK_THROWS_AS(gradient_error_bound(0.0, 1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(energy_error_bound(-1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("energy estimators bound the energy differences") {
  std::mt19937_64 rng(39);
  const MorsePotential phi(5.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 8 + 4 * (trial % 3);
    const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng, trial % 5 == 0));
    const auto f = std::make_shared<TrigonometricForce>(0.4, 0.1, -0.2);
    const QcModel qc(chain(n, 1.0, f), mesh);
    const MeshFunction y = random_deformation(mesh, 1.0, 0.15, rng);
    const EnergyEstimators e = energy_estimators(qc, y);
    const double ea = oracle::atomistic_stored_energy(phi, interpolate_to_lattice(y));
    CHECK(std::abs(ea - qc.stored_energy(y)) <= e.mu * (1 + 1e-12) + 1e-15);

    const MeshFunction u = interpolate_to_mesh(mesh, 0.0, [&](double x) { return y(x) - x; });
    const double diff = qc.load(u) - qc.atomistic().load(interpolate_to_lattice(u));
    CHECK(std::abs(diff) <= (e.mu_f + e.mu_q) * (1 + 1e-12) + 1e-15);
  }
}

TEST_CASE("element indicators") {
  std::mt19937_64 rng(40);
  const auto mesh = hand_mesh();
  const auto f = std::make_shared<TrigonometricForce>(0.3, 0.2, 0.1);
  const QcModel qc(chain(16, 1.0, f), mesh);
  const MeshFunction y = random_deformation(mesh, 1.0, 0.1, rng);
  const EstimateReport r = estimate(qc, y, {false});
  const double a = r.stability.a_star;
  const auto& eta = r.internal.eta_k;
  const auto& ef = r.external.eta_f_k;
  const auto& en = r.energy;

  SUBCASE("element after the right interface") {
    // Element 10 = [3, 5]: node 9 is the interface, node 10 is interior.
    const double braced = 3 * eta[9] * eta[9] + 1.5 * eta[10] * eta[10] + ef[9] * ef[9] + ef[10] * ef[10];
    CHECK(r.indicators.rho_grad_k[10] == doctest::Approx(std::sqrt(4 / a * braced)).epsilon(1e-13));
    const double local = en.mu_k[9] + en.mu_f_k[9] + 0.5 * (en.mu_k[10] + en.mu_f_k[10]) + en.mu_q_k[10] + en.mu_q_k[9];
    CHECK(r.indicators.rho_energy_k[10] ==
          doctest::Approx(4 * r.lipschitz.c_h / (a * a) * braced + local).epsilon(1e-13));
  }
  SUBCASE("element before the left interface") {
    // Element 3 = [-5, -3]: node 3 is the interface.
    const double braced = 1.5 * eta[2] * eta[2] + 3 * eta[3] * eta[3] + ef[3] * ef[3] + ef[4] * ef[4];
    CHECK(r.indicators.rho_grad_k[3] == doctest::Approx(std::sqrt(4 / a * braced)).epsilon(1e-13));
  }
  SUBCASE("interior element") {
    const double braced = 1.5 * eta[11] * eta[11] + 1.5 * eta[12] * eta[12] + ef[12] * ef[12];
    CHECK(r.indicators.rho_grad_k[12] == doctest::Approx(std::sqrt(4 / a * braced)).epsilon(1e-13));
  }
  SUBCASE("recombination") {
    double total = 0.0;
    for (double rho : r.indicators.rho_grad_k) total += rho * rho;
    const double expected = 3 * sum_squares(eta) + sum_squares(ef) + ef[9] * ef[9] + ef[4] * ef[4];
    CHECK(total == doctest::Approx(4 / a * expected).epsilon(1e-12));
  }
}

TEST_CASE("report serialization") {
  std::mt19937_64 rng(41);
  const auto mesh = hand_mesh();
  const QcModel qc(chain(16, 1.0, std::make_shared<SingularDefectForce>(0.4)), mesh);
  const auto j = estimate(qc, random_deformation(mesh, 1.0, 0.1, rng)).to_json();
  for (const char* key : {"eta_k", "eta_f_k", "mu_k", "mu_q_k", "a_star", "c_h", "c_lip", "gradient_bound", "energy_bound",
                          "rho_grad_k", "rho_energy_k"})
    CHECK(j.contains(key));
  CHECK(j["eta_k"].size() == mesh->num_nodes());
}
