#include "qcadapt/qc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qcadapt {

namespace {

std::int64_t wrap(std::int64_t k, std::size_t n) {
  const auto m = static_cast<std::int64_t>(n);
  const std::int64_t r = k % m;
  return r < 0 ? r + m : r;
}

// Unwrapped index of the node at lattice coordinate t; throws if t is not a node.
std::int64_t node_index(const Mesh& mesh, double t) {
  const auto loc = mesh.locate(t);
  const auto k = static_cast<std::int64_t>(loc.element) - 1 +
                 loc.periods * static_cast<std::int64_t>(mesh.num_nodes());
  if (std::abs(mesh.site(k) - t) > 1e-9) throw std::logic_error("expected a mesh node");
  return k;
}

}  // namespace

BondSplit split_sites(const Mesh& mesh, double left, double right) {
  BondSplit out{{static_cast<std::int64_t>(std::floor(left)), static_cast<int>(std::lround(right - left))},
                std::nullopt, {}};
  const auto loc = mesh.locate(left);
  const auto num = static_cast<std::int64_t>(mesh.num_nodes());
  bool continuum_after_atoms = false;
  for (std::int64_t e = static_cast<std::int64_t>(loc.element) + loc.periods * num; mesh.site(e - 1) < right; ++e) {
    const double lo = std::max(left, mesh.site(e - 1));
    const double hi = std::min(right, mesh.site(e));
    if (!(hi > lo)) continue;
    if (mesh.is_atomistic_element(e)) {
      if (!out.atom_part) {
        out.atom_part = Interval{lo, hi};
      } else {
        if (continuum_after_atoms) throw std::logic_error("bond meets the atomistic region twice");
        out.atom_part->right = hi;
      }
    } else {
      if (out.atom_part) continuum_after_atoms = true;
      out.continuum_parts.push_back({static_cast<std::size_t>(wrap(e, mesh.num_nodes())), {lo, hi}});
    }
  }
  return out;
}

BondSplit split_bond(const Bond& bond, const Mesh& mesh) {
  const auto left = static_cast<double>(bond.left_index);
  BondSplit s = split_sites(mesh, left, left + bond.range);
  const double eps = mesh.epsilon();
  s.bond = bond;
  if (s.atom_part) s.atom_part = Interval{s.atom_part->left * eps, s.atom_part->right * eps};
  for (auto& p : s.continuum_parts) p.part = {p.part.left * eps, p.part.right * eps};
  return s;
}

// ---------------------------------------------------------------------------

QcModel::QcModel(AtomisticModel atomistic, std::shared_ptr<const Mesh> mesh)
    : atomistic_(std::move(atomistic)), mesh_(std::move(mesh)) {
  if (!mesh_) throw std::invalid_argument("QC model needs a mesh");
  if (mesh_->n_half() != atomistic_.n_half()) throw std::invalid_argument("mesh and lattice sizes differ");
  const auto violations = validate(*mesh_);
  if (!violations.empty())
    throw std::invalid_argument("invalid mesh: " + violations.front().property + ": " + violations.front().message);
  mesh_->pinned_node();

  const auto p = static_cast<std::int64_t>(2 * mesh_->n_half());
  const double left = mesh_->atom_left_site(), right = mesh_->atom_right_site();
  for (int range = 1; range <= 2; ++range) {
    std::int64_t count = 0;
    for (auto ell = static_cast<std::int64_t>(std::floor(left - range)) + 1;
         static_cast<double>(ell) < right && count < p; ++ell) {
      if (!(static_cast<double>(ell + range) > left)) continue;
      ++count;
      const auto s = split_sites(*mesh_, static_cast<double>(ell), static_cast<double>(ell + range));
      if (!s.atom_part) continue;
      atom_bonds_.push_back({range, node_index(*mesh_, s.atom_part->left), node_index(*mesh_, s.atom_part->right),
                             s.atom_part->length() * mesh_->epsilon()});
    }
  }
  for (std::size_t k = 0; k < mesh_->num_elements(); ++k)
    if (!mesh_->is_atomistic_element(static_cast<std::int64_t>(k))) continuum_elements_.push_back(k);
}

double QcModel::cauchy_born(double r, int order) const {
  const auto& phi = atomistic_.potential();
  return phi.eval(r, order) + std::ldexp(phi.eval(2.0 * r, order), order);
}

void QcModel::check(const MeshFunction& y) const {
  if (&y.mesh() != mesh_.get() && y.mesh().hash() != mesh_->hash())
    throw std::invalid_argument("mesh function lives on a different mesh");
}

double QcModel::bond_sum_stored_energy(const MeshFunction& y) const {
  check(y);
  const auto& phi = atomistic_.potential();
  const double eps = mesh_->epsilon();
  double sum = 0.0;
  for (const auto& b : bond_set(mesh_->n_half())) {
    const auto left = static_cast<double>(b.left_index);
    const auto s = split_sites(*mesh_, left, left + b.range);
    const double r = b.range;
    if (s.atom_part) {
      const double len = s.atom_part->length();
      const double d = y.difference(s.atom_part->left, s.atom_part->right);
      sum += len * eps / r * phi.eval(r * d, 0);
    }
    for (const auto& part : s.continuum_parts)
      sum += part.part.length() * eps / r *
             phi.eval(r * y.element_slope(static_cast<std::int64_t>(part.element)), 0);
  }
  return sum;
}

double QcModel::stored_energy(const MeshFunction& y) const {
  check(y);
  const auto& phi = atomistic_.potential();
  double atoms = 0.0;
  for (const auto& b : atom_bonds_) {
    const double d = y.nodal_difference(b.left_node, b.right_node);
    atoms += b.length / b.range * phi.eval(b.range * d, 0);
  }
  double cont = 0.0;
  for (std::size_t k : continuum_elements_) {
    const auto kk = static_cast<std::int64_t>(k);
    cont += mesh_->element_length(kk) * cauchy_born(y.element_slope(kk), 0);
  }
  return atoms + cont;
}

double QcModel::nodal_load_weight(std::int64_t k) const {
  return 0.5 * (mesh_->element_length(k) + mesh_->element_length(k + 1));
}

double QcModel::nodal_force(std::int64_t k) const {
  if (wrap(k, mesh_->num_nodes()) == static_cast<std::int64_t>(mesh_->pinned_node())) return 0.0;
  return atomistic_.force().eval(mesh_->node(k), 0);
}

double QcModel::load(const MeshFunction& u) const {
  check(u);
  if (atomistic_.force().identically_zero()) return 0.0;
  double sum = 0.0;
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(mesh_->num_nodes()); ++k)
    sum += nodal_force(k) * u.nodal(k) * nodal_load_weight(k);
  return sum;
}

double QcModel::energy(const MeshFunction& y) const {
  const double stored = stored_energy(y);
  if (atomistic_.force().identically_zero()) return stored;
  const double f = y.macroscopic_slope();
  double sum = 0.0;
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(mesh_->num_nodes()); ++k)
    sum += nodal_force(k) * (y.nodal(k) - f * mesh_->node(k)) * nodal_load_weight(k);
  return stored - sum;
}

std::vector<double> QcModel::stored_gradient(const MeshFunction& y) const {
  check(y);
  const auto& phi = atomistic_.potential();
  const std::size_t n = mesh_->num_nodes();
  std::vector<double> g(n, 0.0);
  for (const auto& b : atom_bonds_) {
    const double d = y.nodal_difference(b.left_node, b.right_node);
    const double s = phi.eval(b.range * d, 1);
    g[static_cast<std::size_t>(wrap(b.right_node, n))] += s;
    g[static_cast<std::size_t>(wrap(b.left_node, n))] -= s;
  }
  for (std::size_t k : continuum_elements_) {
    const auto kk = static_cast<std::int64_t>(k);
    const double s = cauchy_born(y.element_slope(kk), 1);
    g[k] += s;
    g[static_cast<std::size_t>(wrap(kk - 1, n))] -= s;
  }
  return g;
}

std::vector<double> QcModel::gradient(const MeshFunction& y) const {
  auto g = stored_gradient(y);
  if (!atomistic_.force().identically_zero()) {
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(g.size()); ++k)
      g[static_cast<std::size_t>(k)] -= nodal_force(k) * nodal_load_weight(k);
  }
  g[mesh_->pinned_node()] = 0.0;
  return g;
}

Eigen::SparseMatrix<double> QcModel::hessian(const MeshFunction& y) const {
  check(y);
  const auto& phi = atomistic_.potential();
  const std::size_t n = mesh_->num_nodes();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * (atom_bonds_.size() + continuum_elements_.size()));
  auto add = [&](std::int64_t a, std::int64_t b, double k) {
    const auto i = static_cast<int>(wrap(a, n)), j = static_cast<int>(wrap(b, n));
    trip.emplace_back(i, i, k);
    trip.emplace_back(j, j, k);
    trip.emplace_back(i, j, -k);
    trip.emplace_back(j, i, -k);
  };
  for (const auto& b : atom_bonds_) {
    const double d = y.nodal_difference(b.left_node, b.right_node);
    add(b.right_node, b.left_node, phi.eval(b.range * d, 2) * b.range / b.length);
  }
  for (std::size_t k : continuum_elements_) {
    const auto kk = static_cast<std::int64_t>(k);
    add(kk, kk - 1, cauchy_born(y.element_slope(kk), 2) / mesh_->element_length(kk));
  }
  Eigen::SparseMatrix<double> h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

Eigen::SparseMatrix<double> QcModel::reduced_hessian(const MeshFunction& y) const {
  const auto full = hessian(y);
  const auto pin = static_cast<Eigen::Index>(mesh_->pinned_node());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(full.nonZeros()));
  for (int c = 0; c < full.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(full, c); it; ++it) {
      if (it.row() == pin || it.col() == pin) continue;
      trip.emplace_back(it.row() - (it.row() > pin), it.col() - (it.col() > pin), it.value());
    }
  Eigen::SparseMatrix<double> h(full.rows() - 1, full.cols() - 1);
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

double QcModel::min_strain(const MeshFunction& y) const {
  double m = std::numeric_limits<double>::infinity();
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(mesh_->num_elements()); ++k)
    m = std::min(m, y.element_slope(k));
  return m;
}

namespace {

class PinnedMesh {
 public:
  PinnedMesh(const QcModel& model, double slope)
      : model_(model), slope_(slope), pin_(static_cast<Eigen::Index>(model.mesh().pinned_node())) {}

  Eigen::VectorXd reduce(std::span<const double> w) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(w.size()) - 1);
    for (Eigen::Index i = 0, j = 0; i < static_cast<Eigen::Index>(w.size()); ++i)
      if (i != pin_) x[j++] = w[static_cast<std::size_t>(i)];
    return x;
  }

  MeshFunction expand(const Eigen::VectorXd& x) const {
    std::vector<double> w(static_cast<std::size_t>(x.size() + 1));
    for (Eigen::Index i = 0, j = 0; i < static_cast<Eigen::Index>(w.size()); ++i)
      w[static_cast<std::size_t>(i)] = i == pin_ ? 0.0 : x[j++];
    return MeshFunction::from_offsets(model_.mesh_ptr(), slope_, std::move(w));
  }

  double energy(const Eigen::VectorXd& x) const { return model_.energy(expand(x)); }
  double min_strain(const Eigen::VectorXd& x) const { return model_.min_strain(expand(x)); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return reduce(model_.gradient(expand(x))); }
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const { return model_.reduced_hessian(expand(x)); }

 private:
  const QcModel& model_;
  double slope_;
  Eigen::Index pin_;
};

}  // namespace

MeshFunction QcModel::solve(const MeshFunction& initial, const NewtonOptions& options, NewtonReport* report) const {
  check(initial);
  if (initial.macroscopic_slope() != atomistic_.stretch())
    throw std::invalid_argument("initial deformation has the wrong macroscopic stretch");
  const double floor =
      options.strain_floor > 0.0 ? options.strain_floor : 0.25 * atomistic_.potential().inflection_point();
  if (min_strain(initial) < floor) throw SolverError("initial guess violates the strain floor");
  PinnedMesh sys(*this, initial.macroscopic_slope());
  Eigen::VectorXd x = sys.reduce(initial.offsets());
  const NewtonReport rep = newton_minimize(sys, x, options, floor);
  if (report) *report = rep;
  return sys.expand(x);
}

}  // namespace qcadapt
