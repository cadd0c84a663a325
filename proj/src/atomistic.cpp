#include "qcadapt/atomistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace qcadapt {

AtomisticModel::AtomisticModel(std::shared_ptr<const PairPotential> potential, int n_half, double stretch,
                               std::shared_ptr<const ExternalForce> force)
    : potential_(std::move(potential)), n_half_(n_half), stretch_(stretch), force_(std::move(force)) {
  if (!potential_ || !force_) throw std::invalid_argument("atomistic model needs a potential and a force");
  if (n_half < 2) throw std::invalid_argument("atomistic model needs N >= 2");
  if (!(stretch > 0.0)) throw std::invalid_argument("macroscopic stretch must be positive");
}

void AtomisticModel::check_deformation(const LatticeFunction& y) const {
  if (y.n_half() != n_half_) throw std::invalid_argument("lattice size mismatch");
}

double AtomisticModel::nodal_force(std::int64_t ell) const {
  const std::int64_t p = 2 * static_cast<std::int64_t>(n_half_);
  if (ell % p == 0) return 0.0;
  return force_->eval(epsilon() * static_cast<double>(ell), 0);
}

double AtomisticModel::min_strain(const LatticeFunction& y) const {
  double m = std::numeric_limits<double>::infinity();
  for (std::int64_t ell = -n_half_ + 1; ell <= n_half_; ++ell) m = std::min(m, first_difference(y, ell));
  return m;
}

double AtomisticModel::stored_energy(const LatticeFunction& y) const {
  check_deformation(y);
  const double eps = epsilon();
  double sum = 0.0;
  for (std::int64_t ell = -n_half_ + 1; ell <= n_half_; ++ell) {
    sum += potential_->eval(y.difference(ell, 1), 0) + potential_->eval(y.difference(ell, 2), 0);
  }
  return eps * sum;
}

double AtomisticModel::load(const LatticeFunction& u) const {
  if (force_->identically_zero()) return 0.0;
  double sum = 0.0;
  for (std::int64_t ell = -n_half_ + 1; ell <= n_half_; ++ell) sum += nodal_force(ell) * u[ell];
  return epsilon() * sum;
}

double AtomisticModel::energy(const LatticeFunction& y) const {
  const double stored = stored_energy(y);
  if (force_->identically_zero()) return stored;
  const double eps = epsilon();
  double sum = 0.0;
  for (std::int64_t ell = -n_half_ + 1; ell <= n_half_; ++ell)
    sum += nodal_force(ell) * (y[ell] - stretch_ * eps * static_cast<double>(ell));
  return stored - eps * sum;
}

LatticeFunction AtomisticModel::stored_gradient(const LatticeFunction& y) const {
  check_deformation(y);
  const auto n = static_cast<std::size_t>(2 * n_half_);
  // dphi[i] = phi'(y'_l), dphi2[i] = phi'((y_l - y_{l-2}) / eps), i = l + N - 1,
  // with one extra entry on each side for the wrap.
  std::vector<double> d1(n + 2), d2(n + 2);
  for (std::size_t i = 0; i < n + 2; ++i) {
    const auto ell = static_cast<std::int64_t>(i) - n_half_ + 1;
    d1[i] = potential_->eval(y.difference(ell, 1), 1);
    d2[i] = potential_->eval(y.difference(ell, 2), 1);
  }
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = d1[i] - d1[i + 1] + d2[i] - d2[i + 2];
  return LatticeFunction(n_half_, 0.0, std::move(g));
}

LatticeFunction AtomisticModel::gradient(const LatticeFunction& y) const {
  LatticeFunction g = stored_gradient(y);
  const double eps = epsilon();
  if (!force_->identically_zero()) {
    for (std::int64_t ell = -n_half_ + 1; ell <= n_half_; ++ell) g.set(ell, g[ell] - eps * nodal_force(ell));
  }
  g.set(0, 0.0);
  return g;
}

Eigen::SparseMatrix<double> AtomisticModel::hessian_matrix(const LatticeFunction& y) const {
  check_deformation(y);
  const double eps = epsilon();
  const std::int64_t p = 2 * static_cast<std::int64_t>(n_half_);
  auto slot = [&](std::int64_t ell) {
    std::int64_t s = (ell + n_half_ - 1) % p;
    return static_cast<int>(s < 0 ? s + p : s);
  };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(8 * p));
  for (std::int64_t ell = -n_half_ + 1; ell <= n_half_; ++ell) {
    for (int range = 1; range <= 2; ++range) {
      const double d = y.difference(ell, range);
      const double k = potential_->eval(d, 2) / eps;
      const int a = slot(ell), b = slot(ell - range);
      trip.emplace_back(a, a, k);
      trip.emplace_back(b, b, k);
      trip.emplace_back(a, b, -k);
      trip.emplace_back(b, a, -k);
    }
  }
  Eigen::SparseMatrix<double> h(p, p);
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

LatticeFunction AtomisticModel::hessian_apply(const LatticeFunction& y, const LatticeFunction& v) const {
  const auto h = hessian_matrix(y);
  Eigen::Map<const Eigen::VectorXd> vv(v.offsets().data(), static_cast<Eigen::Index>(v.offsets().size()));
  Eigen::VectorXd out = h * vv;
  return LatticeFunction(n_half_, 0.0, std::vector<double>(out.data(), out.data() + out.size()));
}

namespace {

// Pinned coordinates: window slots without the slot of l = 0.
class PinnedChain {
 public:
  PinnedChain(const AtomisticModel& model, const LatticeFunction& shape)
      : model_(model), shape_(shape), pin_(static_cast<Eigen::Index>(model.n_half() - 1)) {}

  Eigen::VectorXd reduce(const LatticeFunction& y) const {
    const auto w = y.offsets();
    Eigen::VectorXd x(static_cast<Eigen::Index>(w.size()) - 1);
    for (Eigen::Index i = 0, j = 0; i < static_cast<Eigen::Index>(w.size()); ++i)
      if (i != pin_) x[j++] = w[static_cast<std::size_t>(i)];
    return x;
  }

  LatticeFunction expand(const Eigen::VectorXd& x) const {
    std::vector<double> w(static_cast<std::size_t>(x.size() + 1));
    for (Eigen::Index i = 0, j = 0; i < static_cast<Eigen::Index>(w.size()); ++i)
      w[static_cast<std::size_t>(i)] = i == pin_ ? 0.0 : x[j++];
    return LatticeFunction::from_offsets(shape_.n_half(), shape_.macroscopic_slope(), std::move(w));
  }

  double energy(const Eigen::VectorXd& x) const { return model_.energy(expand(x)); }
  double min_strain(const Eigen::VectorXd& x) const { return model_.min_strain(expand(x)); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return reduce(model_.gradient(expand(x))); }

  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const {
    const auto full = model_.hessian_matrix(expand(x));
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(full.nonZeros()));
    for (int c = 0; c < full.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(full, c); it; ++it) {
        if (it.row() == pin_ || it.col() == pin_) continue;
        trip.emplace_back(it.row() - (it.row() > pin_), it.col() - (it.col() > pin_), it.value());
      }
    Eigen::SparseMatrix<double> h(full.rows() - 1, full.cols() - 1);
    h.setFromTriplets(trip.begin(), trip.end());
    return h;
  }

 private:
  const AtomisticModel& model_;
  const LatticeFunction& shape_;
  Eigen::Index pin_;
};

}  // namespace

LatticeFunction AtomisticModel::solve(const LatticeFunction& initial, const NewtonOptions& options,
                                      NewtonReport* report) const {
  check_deformation(initial);
  if (initial.macroscopic_slope() != stretch_)
    throw std::invalid_argument("initial deformation has the wrong macroscopic stretch");
  if (initial[0] != 0.0) throw std::invalid_argument("initial deformation must satisfy y_0 = 0");
  const double floor = options.strain_floor > 0.0 ? options.strain_floor : 0.25 * potential_->inflection_point();
  if (min_strain(initial) < floor) throw SolverError("initial guess violates the strain floor");
  PinnedChain chain(*this, initial);
  Eigen::VectorXd x = chain.reduce(initial);
  const NewtonReport rep = newton_minimize(chain, x, options, floor);
  if (report) *report = rep;
  return chain.expand(x);
}

}  // namespace qcadapt
