#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/SparseCore>

#include "qcadapt/oracles.hpp"
#include "qcadapt/qc.hpp"

using namespace qcadapt;

namespace {

std::shared_ptr<const PairPotential> morse() { return std::make_shared<MorsePotential>(5.0); }

AtomisticModel chain(int n, double stretch, std::shared_ptr<const ExternalForce> f = std::make_shared<ZeroForce>()) {
  return AtomisticModel(morse(), n, stretch, std::move(f));
}

// N = 16, atomistic region (-3, 3), continuum elements of length 2 to 4.
std::shared_ptr<const Mesh> hand_mesh() {
  return std::make_shared<const Mesh>(
      16, std::vector<double>{-12, -8, -5, -3, -2, -1, 0, 1, 2, 3, 5, 8, 12, 16}, -3.0, 3.0);
}

MeshFunction with_offsets(const MeshFunction& y, std::span<const double> dir, double t) {
  std::vector<double> o(y.offsets().begin(), y.offsets().end());
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += t * dir[k];
  return MeshFunction::from_offsets(y.mesh_ptr(), y.macroscopic_slope(), std::move(o));
}

std::vector<double> random_direction(const Mesh& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> d(mesh.num_nodes());
  for (double& x : d) x = u(rng) * mesh.epsilon();
  d[mesh.pinned_node()] = 0.0;
  return d;
}

double partition_length(const BondSplit& s) {
  double len = s.atom_part ? s.atom_part->length() : 0.0;
  for (const auto& p : s.continuum_parts) len += p.part.length();
  return len;
}

}  // namespace

TEST_CASE("bond splitting") {
  const auto mesh = hand_mesh();
  REQUIRE(validate(*mesh).empty());
  const double eps = mesh->epsilon();

  SUBCASE("inside the atomistic region") {
    const auto s = split_bond({-2, 2}, *mesh);
    REQUIRE(s.atom_part);
    CHECK(s.atom_part->left == doctest::Approx(-2 * eps));
    CHECK(s.atom_part->right == doctest::Approx(0.0));
    CHECK(s.continuum_parts.empty());
  }
  SUBCASE("inside one continuum element") {
    const auto s = split_bond({9, 2}, *mesh);
    CHECK_FALSE(s.atom_part);
    REQUIRE(s.continuum_parts.size() == 1);
    CHECK(s.continuum_parts[0].element == 12);
    CHECK(s.continuum_parts[0].part.length() == doctest::Approx(2 * eps));
  }
  SUBCASE("straddling the right interface") {
    const auto s = split_bond({2, 2}, *mesh);
    REQUIRE(s.atom_part);
    CHECK(s.atom_part->left == doctest::Approx(2 * eps));
    CHECK(s.atom_part->right == doctest::Approx(3 * eps));
    REQUIRE(s.continuum_parts.size() == 1);
    CHECK(s.continuum_parts[0].element == 10);
    CHECK(s.continuum_parts[0].part.left == doctest::Approx(3 * eps));
    CHECK(s.continuum_parts[0].part.right == doctest::Approx(4 * eps));
  }
  SUBCASE("straddling the left interface") {
    const auto s = split_bond({-4, 2}, *mesh);
    REQUIRE(s.atom_part);
    CHECK(s.atom_part->length() == doctest::Approx(eps));
    REQUIRE(s.continuum_parts.size() == 1);
    CHECK(s.continuum_parts[0].element == 3);
  }
  SUBCASE("across the period seam") {
    const auto s = split_bond({15, 2}, *mesh);
    CHECK_FALSE(s.atom_part);
    REQUIRE(s.continuum_parts.size() == 2);
    CHECK(s.continuum_parts[0].element == 13);
    CHECK(s.continuum_parts[1].element == 0);
  }
  SUBCASE("every bond is partitioned") {
    for (const Bond& b : bond_set(16)) CHECK(partition_length(split_bond(b, *mesh)) == doctest::Approx(b.range * eps).epsilon(1e-14));
  }
}

TEST_CASE("bond partition on random meshes") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 8 + trial % 9;
    const Mesh mesh = random_mesh(n, rng, trial % 3 == 0);
    for (const Bond& b : bond_set(n)) {
      const auto s = split_bond(b, mesh);
      CHECK(partition_length(s) == doctest::Approx(b.range * mesh.epsilon()).epsilon(1e-13));
      for (const auto& p : s.continuum_parts) CHECK_FALSE(mesh.is_atomistic_element(static_cast<std::int64_t>(p.element)));
    }
  }
}

TEST_CASE("Cauchy-Born stored energy function") {
  const QcModel qc(chain(16, 1.0), hand_mesh());
  const auto& phi = qc.atomistic().potential();
  for (double r : {0.8, 1.0, 1.3})
    for (int order = 0; order <= 2; ++order)
      CHECK(qc.cauchy_born(r, order) == doctest::Approx(phi.eval(r, order) + std::pow(2.0, order) * phi.eval(2 * r, order)));
}

TEST_CASE("the two energy forms agree") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 8 + trial % 12;
    const double stretch = 0.9 + 0.005 * trial;
    const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng, trial % 4 == 0));
    const QcModel qc(chain(n, stretch), mesh);
    const MeshFunction y = random_deformation(mesh, stretch, 0.2, rng);
    CHECK(qc.stored_energy(y) == doctest::Approx(qc.bond_sum_stored_energy(y)).epsilon(1e-12));
  }
}

TEST_CASE("uniform state has the atomistic energy") {
  std::mt19937_64 rng(23);
  for (double stretch : {0.8, 1.0, 1.2}) {
    const auto mesh = std::make_shared<const Mesh>(random_mesh(12, rng));
    const auto f = std::make_shared<SingularDefectForce>(0.4);
    const QcModel qc(chain(12, stretch, f), mesh);
    CHECK(qc.energy(MeshFunction::affine(mesh, stretch)) ==
          doctest::Approx(qc.atomistic().energy(LatticeFunction::affine(12, stretch))).epsilon(1e-13));
  }
}

TEST_CASE("fully atomistic mesh reproduces the atomistic model") {
  std::mt19937_64 rng(24);
  for (int n : {6, 9, 14}) {
    const auto mesh = std::make_shared<const Mesh>(fully_atomistic_mesh(n));
    const auto f = std::make_shared<TrigonometricForce>(0.3, -0.1, 0.05);
    const QcModel qc(chain(n, 1.05, f), mesh);
    const MeshFunction y = random_deformation(mesh, 1.05, 0.2, rng);
    const LatticeFunction yl = interpolate_to_lattice(y);
    CHECK(qc.stored_energy(y) == doctest::Approx(qc.atomistic().stored_energy(yl)).epsilon(1e-12));
    CHECK(qc.energy(y) == doctest::Approx(qc.atomistic().energy(yl)).epsilon(1e-12));

    const auto g = qc.gradient(y);
    const LatticeFunction ga = qc.atomistic().gradient(yl);
    for (std::size_t k = 0; k < g.size(); ++k)
      CHECK(g[k] == doctest::Approx(ga[static_cast<std::int64_t>(std::lround(mesh->site(static_cast<std::int64_t>(k))))]).scale(1e-12));
  }
}

TEST_CASE("load functional") {
  std::mt19937_64 rng(25);
  SUBCASE("zero displacement") {
    const auto mesh = std::make_shared<const Mesh>(random_mesh(10, rng));
    const QcModel qc(chain(10, 1.0, std::make_shared<SingularDefectForce>(0.4)), mesh);
    CHECK(qc.load(MeshFunction::affine(mesh, 0.0)) == 0.0);
  }
  SUBCASE("fully atomistic mesh gives the lattice load") {
    const auto mesh = std::make_shared<const Mesh>(fully_atomistic_mesh(11));
    const QcModel qc(chain(11, 1.0, std::make_shared<SingularDefectForce>(0.4)), mesh);
    const MeshFunction u = random_deformation(mesh, 0.0, 1.0, rng);
    CHECK(qc.load(u) == doctest::Approx(qc.atomistic().load(interpolate_to_lattice(u))).epsilon(1e-13));
  }
  SUBCASE("unit force integrates the displacement") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto mesh = std::make_shared<const Mesh>(random_mesh(13, rng));
      const QcModel qc(chain(13, 1.0, std::make_shared<ConstantForce>(1.0)), mesh);
      const MeshFunction u = random_deformation(mesh, 0.0, 1.0, rng);
      // Midpoint rule is exact on each affine piece.
      double integral = 0.0;
      for (std::size_t k = 0; k < mesh->num_elements(); ++k) {
        const Interval e = mesh->element(static_cast<std::int64_t>(k));
        integral += e.length() * u(0.5 * (e.left + e.right));
      }
      CHECK(qc.load(u) == doctest::Approx(integral).epsilon(1e-13).scale(1e-15));
    }
  }
}

TEST_CASE("patch test") {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10 + 3 * trial;
    const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng, trial % 5 == 0));
    for (double stretch : {0.8, 1.0, 1.2}) {
      const QcModel qc(chain(n, stretch), mesh);
      for (double g : qc.gradient(MeshFunction::affine(mesh, stretch))) CHECK(std::abs(g) <= 1e-12);
    }
  }
  const auto f = SingularDefectForce(0.4);
  for (int radius : {4, 8, 16}) {
    const auto mesh = std::make_shared<const Mesh>(generate_apriori(500, radius, f));
    const QcModel qc(chain(500, 1.1), mesh);
    for (double g : qc.gradient(MeshFunction::affine(mesh, 1.1))) CHECK(std::abs(g) <= 1e-12);
  }
}

TEST_CASE("gradient and Hessian against finite differences") {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 8 + trial % 10;
    const double stretch = 0.9 + 0.004 * trial;
    const auto mesh = std::make_shared<const Mesh>(random_mesh(n, rng, trial % 4 == 0));
    const QcModel qc(chain(n, stretch, std::make_shared<SingularDefectForce>(0.4)), mesh);
    const MeshFunction y = random_deformation(mesh, stretch, 0.2, rng);
    const auto dir = random_direction(*mesh, rng);

    const double h = 1e-7;
    const double fd = (qc.energy(with_offsets(y, dir, h)) - qc.energy(with_offsets(y, dir, -h))) / (2 * h);
    const auto g = qc.gradient(y);
    double exact = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) exact += g[k] * dir[k];
    CHECK(std::abs(fd - exact) <= 1e-5 * std::max(1.0, std::abs(exact)));

    const double hh = 1e-6;
    const auto gp = qc.stored_gradient(with_offsets(y, dir, hh));
    const auto gm = qc.stored_gradient(with_offsets(y, dir, -hh));
    const Eigen::SparseMatrix<double> hess = qc.hessian(y);
    const Eigen::VectorXd hv = hess * Eigen::Map<const Eigen::VectorXd>(dir.data(), static_cast<Eigen::Index>(dir.size()));
    double worst = 0.0;
    for (std::size_t k = 0; k < gp.size(); ++k)
      worst = std::max(worst, std::abs((gp[k] - gm[k]) / (2 * hh) - hv[static_cast<Eigen::Index>(k)]));
    CHECK(worst <= 1e-5 * std::max(1.0, hv.lpNorm<Eigen::Infinity>()));

    const Eigen::SparseMatrix<double> asym = hess - Eigen::SparseMatrix<double>(hess.transpose());
    CHECK(asym.norm() <= 1e-13 * std::max(1.0, hess.norm()));
  }
}

TEST_CASE("reduced Hessian drops the pinned node") {
  const auto mesh = hand_mesh();
  const QcModel qc(chain(16, 1.0), mesh);
  const auto y = MeshFunction::affine(mesh, 1.0);
  const auto full = qc.hessian(y), reduced = qc.reduced_hessian(y);
  const auto k = static_cast<Eigen::Index>(mesh->num_nodes());
  CHECK(full.rows() == k);
  CHECK(reduced.rows() == k - 1);
  CHECK(reduced.cols() == k - 1);
}

TEST_CASE("QC solve") {
  SUBCASE("zero force returns F x") {
    std::mt19937_64 rng(28);
    const auto mesh = std::make_shared<const Mesh>(random_mesh(40, rng));
    const QcModel qc(chain(40, 1.1), mesh);
    NewtonReport rep;
    const MeshFunction y = qc.solve(MeshFunction::affine(mesh, 1.1), {}, &rep);
    CHECK(rep.iterations <= 1);
    for (double o : y.offsets()) CHECK(std::abs(o) <= 1e-14);
  }
  SUBCASE("defect force on an a priori mesh") {
    const auto f = std::make_shared<SingularDefectForce>(0.4);
    const auto mesh = std::make_shared<const Mesh>(generate_apriori(400, 8, *f));
    const QcModel qc(chain(400, 1.0, f), mesh);
    NewtonReport rep;
    const MeshFunction y = qc.solve(MeshFunction::affine(mesh, 1.0), {}, &rep);
    double gmax = 0.0;
    for (double g : qc.gradient(y)) gmax = std::max(gmax, std::abs(g));
    CHECK(gmax <= 1e-10 * std::max(1.0, std::abs(rep.energy)));
    CHECK(qc.min_strain(y) >= 0.5 * qc.atomistic().potential().inflection_point());
    CHECK(y.nodal(static_cast<std::int64_t>(mesh->pinned_node())) == 0.0);
  }
}

TEST_CASE("QC model errors") {
  CHECK_THROWS_AS(QcModel(chain(12, 1.0), hand_mesh()), std::invalid_argument);
  CHECK_THROWS_AS(QcModel(chain(16, 1.0), nullptr), std::invalid_argument);
  const auto mesh = hand_mesh();
  const QcModel qc(chain(16, 1.0), mesh);
  std::vector<double> values(mesh->num_nodes());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = mesh->node(static_cast<std::int64_t>(k));
  values[11] = values[10] - 0.001;
  const MeshFunction folded(mesh, 1.0, values);
  CHECK_THROWS_AS(qc.stored_energy(folded), std::domain_error);
  CHECK_THROWS_AS(qc.gradient(folded), std::domain_error);
}
