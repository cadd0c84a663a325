#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qcadapt/force.hpp"
#include "qcadapt/mesh.hpp"
#include "qcadapt/oracles.hpp"

using namespace qcadapt;

namespace {

std::vector<double> with_atoms(std::vector<double> left, int radius, std::vector<double> right) {
  for (int ell = -radius; ell <= radius; ++ell) left.push_back(ell);
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

bool has_violation(const Mesh& m, const std::string& property) {
  const auto v = validate(m);
  return std::any_of(v.begin(), v.end(), [&](const MeshViolation& x) { return x.property == property; });
}

}  // namespace

TEST_CASE("constructed counterexamples for (T2)-(T4)") {
  const Mesh ok(20, with_atoms({-16, -10}, 3, {8, 14, 20}), -3, 3);
  CHECK(validate(ok).empty());

  const Mesh short_element(20, with_atoms({-16, -10}, 3, {4.5, 10, 20}), -3, 3);
  const auto v = validate(short_element);
  REQUIRE(v.size() == 1);
  CHECK(v[0].property == "T4");
  CHECK(v[0].index == 9);

  std::vector<double> off = with_atoms({-16, -10}, 3, {8, 14, 20});
  off.insert(std::find(off.begin(), off.end(), 2.0), 1.5);
  CHECK(has_violation(Mesh(20, off, -3, 3), "T2"));

  std::vector<double> gap = with_atoms({-16, -10}, 3, {8, 14, 20});
  gap.erase(std::find(gap.begin(), gap.end(), 2.0));
  CHECK(has_violation(Mesh(20, gap, -3, 3), "T2"));

  CHECK(has_violation(Mesh(20, with_atoms({-16, -10}, 3, {8, 14, 20}), -3, 3.5), "T3"));
}

TEST_CASE("constructor rejects malformed input") {
  CHECK_THROWS_AS(Mesh(20, {-3, -2, 0, -1, 20}, -3, 3), std::invalid_argument);
  CHECK_THROWS_AS(Mesh(20, {-3, 0, 3, 21}, -3, 3), std::invalid_argument);
  CHECK_THROWS_AS(Mesh(20, {}, -3, 3), std::invalid_argument);
  CHECK_THROWS_AS(Mesh(20, {-3, 0, 3, 20}, 3, -3), std::invalid_argument);
  CHECK_THROWS(Mesh(20, {-3, 1, 3, 20}, -3, 3).pinned_node());
}

TEST_CASE("periodic indexing and location") {
  const Mesh m(20, with_atoms({-16, -10}, 3, {8, 14, 20}), -3, 3);
  const auto k = static_cast<std::int64_t>(m.num_nodes());
  CHECK(m.site(-1) == 20.0 - 40.0);
  CHECK(m.site(k) == -16.0 + 40.0);
  CHECK(m.element_length_sites(0) == doctest::Approx(4.0));
  const auto loc = m.locate(9.0);
  CHECK(m.site(static_cast<std::int64_t>(loc.element) - 1) <= 9.0);
  CHECK(9.0 < m.site(static_cast<std::int64_t>(loc.element)));
  const auto wrapped = m.locate(9.0 + 80.0);
  CHECK(wrapped.element == loc.element);
  CHECK(wrapped.periods == 2);
  CHECK(m.locate(8.0).element == loc.element);  // half-open on the right
  CHECK(m.in_atomistic_region(2.5));
  CHECK(!m.in_atomistic_region(3.0));
  CHECK(m.in_atomistic_region(2.5 - 40.0));
  CHECK(m.find_node(14.0 + 40.0).has_value());
  CHECK(!m.find_node(13.0).has_value());
}

TEST_CASE("JSON round trip and hash") {
  const Mesh m(20, with_atoms({-16, -10.5}, 3, {8.25, 14, 20}), -3, 3);
  const Mesh back = Mesh::from_json(m.to_json());
  CHECK(back.hash() == m.hash());
  CHECK(std::equal(back.sites().begin(), back.sites().end(), m.sites().begin(), m.sites().end()));
  CHECK(back.atom_left_site() == m.atom_left_site());
  const Mesh other(20, with_atoms({-16, -10.5}, 3, {8.5, 14, 20}), -3, 3);
  CHECK(other.hash() != m.hash());
}

TEST_CASE("interpolation onto a mesh") {
  std::mt19937_64 rng(17);
  auto mesh = std::make_shared<const Mesh>(random_mesh(24, rng));
  const MeshFunction y = interpolate_to_mesh(mesh, 1.1, [](double x) { return 1.1 * x; });
  for (std::int64_t k = -3; k < 30; ++k) CHECK(y.nodal(k) == doctest::Approx(1.1 * mesh->node(k)));

  const MeshFunction g = interpolate_to_mesh(mesh, 0.0, [](double x) { return std::sin(2 * M_PI * x) * x; });
  const MeshFunction gg = interpolate_to_mesh(mesh, g);
  for (std::size_t k = 0; k < mesh->num_nodes(); ++k) CHECK(gg.offsets()[k] == g.offsets()[k]);

  const LatticeFunction v = random_lattice_displacement(24, 0.3, rng);
  const MeshFunction vh = interpolate_to_mesh(mesh, v);
  for (std::int64_t ell = -23; ell <= 24; ++ell)
    if (mesh->in_atomistic_region(static_cast<double>(ell))) CHECK(vh.at_site(static_cast<double>(ell)) == v[ell]);

  // I_eps of a mesh function is exact at nodes that are lattice sites.
  const LatticeFunction back = interpolate_to_lattice(vh);
  for (std::size_t k = 0; k < mesh->num_nodes(); ++k)
    if (mesh->is_lattice_site(static_cast<std::int64_t>(k))) {
      const auto ell = static_cast<std::int64_t>(mesh->sites()[k]);
      CHECK(back[ell] == doctest::Approx(v[ell]).epsilon(1e-14));
    }
}

TEST_CASE("mesh functions carry the macroscopic slope") {
  const auto mesh = std::make_shared<const Mesh>(Mesh(20, with_atoms({-16, -10}, 3, {8, 14, 20}), -3, 3));
  std::vector<double> values;
  for (double t : mesh->sites()) values.push_back(0.9 * t * mesh->epsilon() + (t == 0 ? 0.0 : 1e-3 * t));
  const MeshFunction y(mesh, 0.9, values);
  const auto k = static_cast<std::int64_t>(mesh->num_nodes());
  CHECK(y.nodal(k + 2) == doctest::Approx(y.nodal(2) + 0.9));
  CHECK(y.at_site(11.0) == doctest::Approx(0.5 * (y.nodal(9) + y.nodal(10))));
  CHECK(y.element_slope(10) == doctest::Approx((y.nodal(10) - y.nodal(9)) / mesh->element_length(10)));
  CHECK(y.difference(5.0, 11.0) == doctest::Approx((y.at_site(11.0) - y.at_site(5.0)) / (6 * mesh->epsilon())));
  CHECK(y.nodal_difference(9, k + 1) ==
        doctest::Approx((y.nodal(k + 1) - y.nodal(9)) / (mesh->node(k + 1) - mesh->node(9))));
  CHECK_THROWS_AS(MeshFunction(mesh, 0.9, std::vector<double>(values.size(), 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(MeshFunction(mesh, 0.9, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("a priori mesh") {
  const SingularDefectForce f(0.4);
  const int n = 2500, m = 16;
  const double eps = 0.5 / n;
  CHECK(apriori_mesh_size(m * eps, n, m, f) == doctest::Approx(2 * eps).epsilon(1e-14));

  const Mesh mesh = generate_apriori(n, m, f);
  CHECK(validate(mesh).empty());
  CHECK(mesh.atom_left_site() == -m);
  CHECK(mesh.atom_right_site() == m);
  for (int ell = -m; ell <= m; ++ell) CHECK(mesh.find_node(ell).has_value());
  CHECK(mesh.find_node(n).has_value());

  // Symmetric about 0.
  const auto sites = mesh.sites();
  for (double t : sites)
    if (t != n) CHECK(mesh.find_node(-t).has_value());

  // Element sizes nondecreasing away from the origin on the right half.
  double prev = 0.0;
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(mesh.num_nodes()); ++k) {
    if (mesh.site(k - 1) < 0) continue;
    const double h = mesh.element_length_sites(k);
    CHECK(h >= prev - 1e-9);
    prev = h;
  }
  CHECK(mesh.num_nodes() < 200);

  CHECK_THROWS_AS(generate_apriori(n, 2, f), std::invalid_argument);
  CHECK_THROWS_AS(generate_apriori(20, 19, f), std::invalid_argument);
}

TEST_CASE("initial adaptive meshes are valid") {
  for (auto spacing : {InitialSpacing::graded, InitialSpacing::uniform}) {
    for (int extra : {0, 1, 8, 20}) {
      const Mesh m = initial_adaptive_mesh(2500, 3, extra, spacing);
      CHECK(validate(m).empty());
      CHECK(m.atom_left_site() == -3);
      CHECK(m.atom_right_site() == 3);
      // Graded nodes closer than 2 eps to a neighbour are dropped.
      CHECK(m.num_nodes() <= 8 + 2 * static_cast<std::size_t>(extra));
      if (extra <= 8) CHECK(m.num_nodes() == 8 + 2 * static_cast<std::size_t>(extra));
    }
  }
  const Mesh bare = initial_adaptive_mesh(2500, 3, 0);
  CHECK(bare.num_nodes() == 8);
}

TEST_CASE("bisection examples") {
  const Mesh wide(20, with_atoms({-16, -8}, 3, {8, 16, 20}), -3, 3);
  const auto r1 = bisect(wide, 10);
  CHECK(r1.bisected == 1);
  CHECK(r1.mesh.find_node(12.0).has_value());
  CHECK(r1.mesh.element_length_sites(10) == 4.0);
  CHECK(r1.mesh.element_length_sites(11) == 4.0);

  const Mesh near(20, with_atoms({-16, -8}, 3, {6, 12, 20}), -3, 3);
  const auto r2 = bisect(near, 9);
  CHECK(r2.absorbed == 1);
  CHECK(validate(r2.mesh).empty());
  CHECK(r2.mesh.atom_right_site() == 6.0);
  CHECK(r2.mesh.find_node(4.0).has_value());
  CHECK(r2.mesh.find_node(5.0).has_value());

  const Mesh stuck(20, with_atoms({-16, -8}, 3, {8, 11.5, 20}), -3, 3);
  const auto r3 = bisect(stuck, 10);
  REQUIRE(r3.unrefined.size() == 1);
  CHECK(r3.unrefined[0] == 10);
  CHECK(r3.mesh.hash() == stuck.hash());

  // Off-lattice element of exactly 4 eps: plain midpoint.
  const Mesh off(20, with_atoms({-16, -8}, 3, {7.5, 11.5, 20}), -3, 3);
  const auto r4 = bisect(off, 10);
  CHECK(r4.unrefined.empty());
  CHECK(validate(r4.mesh).empty());
  CHECK(r4.mesh.find_node(9.5).has_value());

  CHECK_THROWS(bisect(wide, 5));
  CHECK_THROWS(bisect(wide, 99));
}

TEST_CASE("refinement keeps (T1)-(T4) and is monotone") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 12 + static_cast<int>(rng() % 40);
    Mesh mesh = random_mesh(n, rng, trial % 3 == 0);
    REQUIRE(validate(mesh).empty());
    for (int round = 0; round < 4; ++round) {
      std::vector<std::size_t> targets;
      for (std::size_t k = 0; k < mesh.num_elements(); ++k)
        if (!mesh.is_atomistic_element(static_cast<std::int64_t>(k)) && rng() % 3 == 0) targets.push_back(k);
      const auto r = refine(mesh, targets);
      CHECK(validate(r.mesh).empty());
      // Atomistic region grows; every old node survives or is swallowed by it.
      CHECK(r.mesh.atom_left_site() <= mesh.atom_left_site());
      CHECK(r.mesh.atom_right_site() >= mesh.atom_right_site());
      for (double t : mesh.sites())
        CHECK((r.mesh.find_node(t).has_value() || r.mesh.in_atomistic_region(t)));
      CHECK(r.mesh.num_nodes() >= mesh.num_nodes());
      mesh = r.mesh;
    }
  }
}
