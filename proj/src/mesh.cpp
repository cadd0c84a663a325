#include "qcadapt/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qcadapt/force.hpp"

namespace qcadapt {

namespace {

constexpr double kSnapTol = 1e-9;
constexpr double kLengthTol = 1e-9;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && (a < 0)) --q;
  return q;
}

double snap(double t) {
  const double r = std::round(t);
  return std::abs(t - r) <= kSnapTol ? r : t;
}

bool is_integer(double t) { return t == std::round(t); }

// Reduces a lattice coordinate into (-N, N].
double reduce_window(double t, int n_half) {
  const double p = 2.0 * n_half;
  return snap(t - p * std::ceil((t - n_half) / p));
}

bool same_mod_period(double a, double b, double period) {
  const double d = (a - b) / period;
  return std::abs(d - std::round(d)) * period <= kSnapTol;
}

}  // namespace

// ---------------------------------------------------------------------------
// Mesh

Mesh::Mesh(int n_half, std::vector<double> sites, double atom_left, double atom_right)
    : n_half_(n_half), sites_(std::move(sites)), atom_left_(snap(atom_left)),
      atom_right_(snap(atom_right)) {
  if (n_half < 2) throw std::invalid_argument("mesh needs N >= 2");
  if (sites_.empty()) throw std::invalid_argument("mesh needs at least one node");
  for (auto& t : sites_) t = snap(t);
  for (std::size_t k = 0; k < sites_.size(); ++k) {
    if (!(sites_[k] > -n_half_ && sites_[k] <= n_half_))
      throw std::invalid_argument("mesh node " + std::to_string(k) + " outside (-1/2, 1/2]");
    if (k > 0 && !(sites_[k] > sites_[k - 1]))
      throw std::invalid_argument("mesh nodes must be strictly increasing");
  }
  const bool full = atom_right_ - atom_left_ == period();
  const bool inner = atom_left_ > -n_half_ && atom_left_ < atom_right_ && atom_right_ < n_half_;
  if (!full && !inner) throw std::invalid_argument("invalid atomistic interval");
}

double Mesh::site(std::int64_t k) const {
  const auto n = static_cast<std::int64_t>(sites_.size());
  const std::int64_t q = floor_div(k, n);
  return sites_[static_cast<std::size_t>(k - q * n)] + static_cast<double>(q) * period();
}

bool Mesh::in_atomistic_region(double t) const {
  const double p = period();
  double s = t - p * std::floor((t - atom_left_) / p);
  if (s >= atom_left_ + p) s -= p;
  return s > atom_left_ && s < atom_right_;
}

bool Mesh::is_atomistic_element(std::int64_t k) const {
  return in_atomistic_region(0.5 * (site(k - 1) + site(k)));
}

bool Mesh::is_lattice_site(std::int64_t k) const { return is_integer(site(k)); }

std::optional<std::size_t> Mesh::find_node(double t) const {
  const double s = reduce_window(t, n_half_);
  auto it = std::lower_bound(sites_.begin(), sites_.end(), s - kSnapTol);
  if (it != sites_.end() && std::abs(*it - s) <= kSnapTol)
    return static_cast<std::size_t>(it - sites_.begin());
  // s close to -N is the image of the node at N.
  if (std::abs(s + n_half_) <= kSnapTol && sites_.back() == n_half_) return sites_.size() - 1;
  return std::nullopt;
}

Mesh::Location Mesh::locate(double t) const {
  const double p = period();
  const double x0 = sites_.back() - p;
  auto m = static_cast<std::int64_t>(std::floor((t - x0) / p));
  double s = t - static_cast<double>(m) * p;
  if (s >= sites_.back()) {
    s -= p;
    ++m;
  } else if (s < x0) {
    s += p;
    --m;
  }
  const auto it = std::upper_bound(sites_.begin(), sites_.end(), s);
  auto e = static_cast<std::size_t>(it - sites_.begin());
  if (e >= sites_.size()) e = sites_.size() - 1;
  return {e, m};
}

std::size_t Mesh::pinned_node() const {
  auto k = find_node(0.0);
  if (!k) throw std::logic_error("mesh has no node at x = 0");
  return *k;
}

std::uint64_t Mesh::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(n_half_));
  mix(std::bit_cast<std::uint64_t>(atom_left_));
  mix(std::bit_cast<std::uint64_t>(atom_right_));
  for (double t : sites_) mix(std::bit_cast<std::uint64_t>(t));
  return h;
}

nlohmann::json Mesh::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t k = 0; k < sites_.size(); ++k) nodes.push_back(node(static_cast<std::int64_t>(k)));
  return {{"n_half", n_half_},
          {"epsilon", epsilon()},
          {"nodes", nodes},
          {"sites", sites_},
          {"atomistic_interval", {atom_left_ * epsilon(), atom_right_ * epsilon()}},
          {"atomistic_interval_sites", {atom_left_, atom_right_}}};
}

Mesh Mesh::from_json(const nlohmann::json& j) {
  const auto interval = j.at("atomistic_interval_sites");
  return Mesh(j.at("n_half").get<int>(), j.at("sites").get<std::vector<double>>(),
              interval.at(0).get<double>(), interval.at(1).get<double>());
}

std::vector<MeshViolation> validate(const Mesh& mesh) {
  std::vector<MeshViolation> out;
  const double left = mesh.atom_left_site(), right = mesh.atom_right_site();

  for (double t : {left, right}) {
    if (!mesh.find_node(t))
      out.push_back({"T3", static_cast<std::int64_t>(std::floor(t)),
                     "interface point " + std::to_string(t * mesh.epsilon()) + " is not a node"});
  }

  for (auto n = static_cast<std::int64_t>(std::floor(left)) + 1; static_cast<double>(n) < right; ++n) {
    if (static_cast<double>(n) > left && !mesh.find_node(static_cast<double>(n)))
      out.push_back({"T2", n, "lattice site " + std::to_string(n) + " in the atomistic region is not a node"});
  }
  const auto num = static_cast<std::int64_t>(mesh.num_nodes());
  for (std::int64_t k = 0; k < num; ++k) {
    if (mesh.in_atomistic_region(mesh.site(k)) && !mesh.is_lattice_site(k))
      out.push_back({"T2", k, "non-lattice node " + std::to_string(mesh.node(k)) +
                                  " inside the atomistic region"});
  }

  for (std::int64_t k = 0; k < num; ++k) {
    if (!mesh.is_atomistic_element(k) && mesh.element_length_sites(k) < 2.0 - kLengthTol)
      out.push_back({"T4", k, "continuum element " + std::to_string(k) + " has length " +
                                  std::to_string(mesh.element_length_sites(k)) + " eps < 2 eps"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// MeshFunction

MeshFunction::MeshFunction(std::shared_ptr<const Mesh> mesh, double macroscopic_slope,
                           std::vector<double> nodal_values)
    : mesh_(std::move(mesh)), slope_(macroscopic_slope), offsets_(std::move(nodal_values)) {
  if (!mesh_) throw std::invalid_argument("mesh function without a mesh");
  if (offsets_.size() != mesh_->num_nodes())
    throw std::invalid_argument("mesh function expects one value per node");
  if (offsets_[mesh_->pinned_node()] != 0.0)
    throw std::invalid_argument("mesh function must vanish at x = 0");
  for (std::size_t k = 0; k < offsets_.size(); ++k)
    offsets_[k] -= slope_ * mesh_->node(static_cast<std::int64_t>(k));
}

MeshFunction MeshFunction::from_offsets(std::shared_ptr<const Mesh> mesh, double macroscopic_slope,
                                        std::vector<double> offsets) {
  if (!mesh) throw std::invalid_argument("mesh function without a mesh");
  if (offsets.size() != mesh->num_nodes()) throw std::invalid_argument("mesh function expects one value per node");
  const std::size_t pin = mesh->pinned_node();
  if (offsets[pin] != 0.0) throw std::invalid_argument("mesh function must vanish at x = 0");
  MeshFunction v(mesh, macroscopic_slope, std::vector<double>(offsets.size(), 0.0));
  v.offsets_ = std::move(offsets);
  return v;
}

MeshFunction MeshFunction::affine(std::shared_ptr<const Mesh> mesh, double slope) {
  const std::size_t k = mesh->num_nodes();
  return from_offsets(std::move(mesh), slope, std::vector<double>(k, 0.0));
}

double MeshFunction::nodal_offset(std::int64_t k) const {
  const auto n = static_cast<std::int64_t>(offsets_.size());
  return offsets_[static_cast<std::size_t>(k - floor_div(k, n) * n)];
}

double MeshFunction::nodal(std::int64_t k) const { return slope_ * mesh_->node(k) + nodal_offset(k); }

double MeshFunction::offset_at_site(double t) const {
  const auto loc = mesh_->locate(t);
  const auto e = static_cast<std::int64_t>(loc.element);
  const double shift = static_cast<double>(loc.periods) * mesh_->period();
  const double a = mesh_->site(e - 1) + shift;
  const double b = mesh_->site(e) + shift;
  const double oa = nodal_offset(e - 1);
  if (t == a) return oa;
  const double lambda = (t - a) / (b - a);
  return (1.0 - lambda) * oa + lambda * nodal_offset(e);
}

double MeshFunction::at_site(double t) const { return slope_ * t * mesh_->epsilon() + offset_at_site(t); }

double MeshFunction::element_slope(std::int64_t k) const {
  return slope_ + (nodal_offset(k) - nodal_offset(k - 1)) / mesh_->element_length(k);
}

double MeshFunction::difference(double t_left, double t_right) const {
  return slope_ + (offset_at_site(t_right) - offset_at_site(t_left)) / ((t_right - t_left) * mesh_->epsilon());
}

double MeshFunction::nodal_difference(std::int64_t i, std::int64_t j) const {
  return slope_ + (nodal_offset(j) - nodal_offset(i)) / ((mesh_->site(j) - mesh_->site(i)) * mesh_->epsilon());
}

MeshFunction interpolate_to_mesh(std::shared_ptr<const Mesh> mesh, double macroscopic_slope,
                                 const std::function<double(double)>& g) {
  std::vector<double> values(mesh->num_nodes());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = g(mesh->node(static_cast<std::int64_t>(k)));
  return MeshFunction(std::move(mesh), macroscopic_slope, std::move(values));
}

MeshFunction interpolate_to_mesh(std::shared_ptr<const Mesh> mesh, const LatticeFunction& v) {
  if (mesh->n_half() != v.n_half()) throw std::invalid_argument("lattice size mismatch");
  std::vector<double> offsets(mesh->num_nodes());
  for (std::size_t k = 0; k < offsets.size(); ++k) offsets[k] = v.offset_at_site(mesh->site(static_cast<std::int64_t>(k)));
  return MeshFunction::from_offsets(std::move(mesh), v.macroscopic_slope(), std::move(offsets));
}

MeshFunction interpolate_to_mesh(std::shared_ptr<const Mesh> mesh, const MeshFunction& v) {
  std::vector<double> offsets(mesh->num_nodes());
  for (std::size_t k = 0; k < offsets.size(); ++k) offsets[k] = v.offset_at_site(mesh->site(static_cast<std::int64_t>(k)));
  return MeshFunction::from_offsets(std::move(mesh), v.macroscopic_slope(), std::move(offsets));
}

LatticeFunction interpolate_to_lattice(const MeshFunction& v) {
  const int n = v.mesh().n_half();
  std::vector<double> offsets(2 * static_cast<std::size_t>(n));
  for (std::int64_t ell = -n + 1; ell <= n; ++ell)
    offsets[static_cast<std::size_t>(ell + n - 1)] = v.offset_at_site(static_cast<double>(ell));
  return LatticeFunction::from_offsets(n, v.macroscopic_slope(), std::move(offsets));
}

// ---------------------------------------------------------------------------
// Mesh generation

double apriori_mesh_size(double x, int n_half, int atom_radius, const ExternalForce& force) {
  const double eps = 0.5 / n_half;
  const double xm = atom_radius * eps;
  const double ratio = std::abs(force.eval(xm, 0) / force.eval(x, 0) * std::abs(x) / xm);
  return 2.0 * eps * std::cbrt(ratio * ratio);
}

Mesh generate_apriori(int n_half, int atom_radius, const ExternalForce& force) {
  if (atom_radius < 3) throw std::invalid_argument("a priori mesh needs an atomistic radius M >= 3");
  if (atom_radius > n_half - 2)
    throw std::invalid_argument("atomistic radius M = " + std::to_string(atom_radius) +
                                " too large for N = " + std::to_string(n_half));
  const double eps = 0.5 / n_half;
  std::vector<double> right;  // continuum nodes in (M, N), lattice coordinates
  double x = atom_radius;
  while (true) {
    double h = apriori_mesh_size(x * eps, n_half, atom_radius, force) / eps;
    if (!std::isfinite(h)) break;
    h = std::max(h, 2.0);
    if (x + h >= n_half) break;
    x += h;
    right.push_back(x);
  }
  // Merge a terminal element shorter than its neighbour, so that element
  // sizes stay nondecreasing away from the origin and (T4) holds.
  if (!right.empty()) {
    const double prev = right.size() > 1 ? right[right.size() - 2] : static_cast<double>(atom_radius);
    if (n_half - right.back() < right.back() - prev) right.pop_back();
  }

  std::vector<double> sites;
  for (auto it = right.rbegin(); it != right.rend(); ++it) sites.push_back(-*it);
  for (int ell = -atom_radius; ell <= atom_radius; ++ell) sites.push_back(ell);
  sites.insert(sites.end(), right.begin(), right.end());
  sites.push_back(n_half);
  return Mesh(n_half, std::move(sites), -atom_radius, atom_radius);
}

Mesh initial_adaptive_mesh(int n_half, int atom_radius, int extra_per_half, InitialSpacing spacing) {
  if (atom_radius < 1 || atom_radius > n_half - 2)
    throw std::invalid_argument("initial atomistic radius out of range");
  if (extra_per_half < 0) throw std::invalid_argument("negative number of extra continuum nodes");
  std::vector<double> right;
  const double r0 = atom_radius;
  for (int j = 1; j <= extra_per_half; ++j) {
    const double s = static_cast<double>(j) / (extra_per_half + 1);
    const double t = spacing == InitialSpacing::graded ? r0 * std::pow(n_half / r0, s)
                                                       : r0 + s * (n_half - r0);
    const double prev = right.empty() ? r0 : right.back();
    if (t - prev >= 2.0 && n_half - t >= 2.0) right.push_back(t);
  }
  std::vector<double> sites;
  for (auto it = right.rbegin(); it != right.rend(); ++it) sites.push_back(-*it);
  for (int ell = -atom_radius; ell <= atom_radius; ++ell) sites.push_back(ell);
  sites.insert(sites.end(), right.begin(), right.end());
  sites.push_back(n_half);
  return Mesh(n_half, std::move(sites), -atom_radius, atom_radius);
}

// ---------------------------------------------------------------------------
// Refinement

namespace {

class MeshEditor {
 public:
  explicit MeshEditor(const Mesh& m)
      : n_half_(m.n_half()), sites_(m.sites().begin(), m.sites().end()),
        left_(m.atom_left_site()), right_(m.atom_right_site()) {}

  Mesh build() const { return Mesh(n_half_, sites_, left_, right_); }

  void insert(double t) {
    const double s = reduce_window(t, n_half_);
    auto it = std::lower_bound(sites_.begin(), sites_.end(), s - kSnapTol);
    if (it != sites_.end() && std::abs(*it - s) <= kSnapTol) return;
    sites_.insert(it, s);
  }

  void erase(double t) {
    const double s = reduce_window(t, n_half_);
    auto it = std::lower_bound(sites_.begin(), sites_.end(), s - kSnapTol);
    if (it != sites_.end() && std::abs(*it - s) <= kSnapTol) sites_.erase(it);
  }

  void set_interval(double left, double right) {
    left_ = left;
    right_ = right;
  }

 private:
  int n_half_;
  std::vector<double> sites_;
  double left_, right_;
};

// Grows the atomistic region across the continuum element [a, b] whose left
// end is the interface R_a. Returns false if that would swallow the whole
// continuum region or push the interface past x = 1/2.
bool absorb_right(const Mesh& cur, MeshEditor& ed, std::int64_t e, std::int64_t periods) {
  const double p = cur.period();
  const double shift_ = static_cast<double>(periods) * p;
  const double a = cur.site(e - 1) + shift_;
  const double b = cur.site(e) + shift_;
  const double interface_shift = a - cur.atom_right_site();
  const double far = cur.atom_left_site() + p + interface_shift;

  std::vector<double> nodes;  // continuum nodes beyond a, up to the far interface
  for (std::int64_t k = e;; ++k) {
    const double t = cur.site(k) + shift_;
    nodes.push_back(t);
    if (t >= far - kSnapTol) break;
  }
  double new_right = std::ceil(b - kSnapTol);
  while (true) {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), new_right + kSnapTol);
    if (it == nodes.end()) return false;
    if (*it - new_right >= 2.0 - kLengthTol) break;
    if (*it >= far - kSnapTol) return false;
    new_right = std::ceil(*it - kSnapTol);
  }
  if (far - new_right < 2.0 - kLengthTol) return false;
  const double right_window = new_right - interface_shift;
  if (right_window >= cur.n_half()) return false;

  for (double t : nodes)
    if (t > a && t <= new_right + kSnapTol) ed.erase(t);
  for (double t = std::floor(a) + 1.0; t <= new_right; t += 1.0) ed.insert(t);
  ed.set_interval(cur.atom_left_site(), right_window);
  return true;
}

// Mirror image of absorb_right for an element whose right end is L_a.
bool absorb_left(const Mesh& cur, MeshEditor& ed, std::int64_t e, std::int64_t periods) {
  const double p = cur.period();
  const double shift_ = static_cast<double>(periods) * p;
  const double a = cur.site(e - 1) + shift_;
  const double b = cur.site(e) + shift_;
  const double interface_shift = b - cur.atom_left_site();
  const double far = cur.atom_right_site() - p + interface_shift;

  std::vector<double> nodes;  // continuum nodes below b, down to the far interface (descending)
  for (std::int64_t k = e - 1;; --k) {
    const double t = cur.site(k) + shift_;
    nodes.push_back(t);
    if (t <= far + kSnapTol) break;
  }
  double new_left = std::floor(a + kSnapTol);
  while (true) {
    auto it = std::find_if(nodes.begin(), nodes.end(), [&](double t) { return t < new_left - kSnapTol; });
    if (it == nodes.end()) return false;
    if (new_left - *it >= 2.0 - kLengthTol) break;
    if (*it <= far + kSnapTol) return false;
    new_left = std::floor(*it + kSnapTol);
  }
  if (new_left - far < 2.0 - kLengthTol) return false;
  const double left_window = new_left - interface_shift;
  if (left_window <= -cur.n_half()) return false;

  for (double t : nodes)
    if (t < b && t >= new_left - kSnapTol) ed.erase(t);
  for (double t = std::ceil(b) - 1.0; t >= new_left; t -= 1.0) ed.insert(t);
  ed.set_interval(left_window, cur.atom_right_site());
  return true;
}

}  // namespace

RefineResult refine(const Mesh& mesh, std::span<const std::size_t> elements) {
  struct Target {
    std::size_t index;
    double a, b;
  };
  std::vector<Target> targets;
  for (std::size_t k : elements) {
    if (k >= mesh.num_elements()) throw std::out_of_range("element index " + std::to_string(k) + " out of range");
    const auto kk = static_cast<std::int64_t>(k);
    if (mesh.is_atomistic_element(kk))
      throw std::invalid_argument("element " + std::to_string(k) + " is atomistic and cannot be refined");
    targets.push_back({k, mesh.site(kk - 1), mesh.site(kk)});
  }
  std::sort(targets.begin(), targets.end(), [](const Target& x, const Target& y) { return x.index < y.index; });

  RefineResult result{mesh, {}, 0, 0};
  for (const auto& target : targets) {
    const Mesh& cur = result.mesh;
    const double mid = 0.5 * (target.a + target.b);
    if (cur.in_atomistic_region(mid)) continue;
    const auto loc = cur.locate(mid);
    const auto e = static_cast<std::int64_t>(loc.element);
    const double shift = static_cast<double>(loc.periods) * cur.period();
    const double a = cur.site(e - 1) + shift;
    const double b = cur.site(e) + shift;
    const double h = b - a;
    MeshEditor ed(cur);

    if (h >= 4.0 - kLengthTol) {
      ed.insert(0.5 * (a + b));
      result.mesh = ed.build();
      ++result.bisected;
      continue;
    }
    const bool next_to_right = same_mod_period(a, cur.atom_right_site(), cur.period());
    const bool next_to_left = same_mod_period(b, cur.atom_left_site(), cur.period());
    if (next_to_right || next_to_left) {
      bool done = next_to_right && absorb_right(cur, ed, e, loc.periods);
      if (!done && next_to_left) {
        ed = MeshEditor(cur);
        done = absorb_left(cur, ed, e, loc.periods);
      }
      if (done) {
        result.mesh = ed.build();
        ++result.absorbed;
      } else {
        result.unrefined.push_back(target.index);
      }
      continue;
    }
    const double lo = std::ceil(a + 2.0 - kLengthTol);
    const double hi = std::floor(b - 2.0 + kLengthTol);
    if (lo <= hi) {
      ed.insert(std::clamp(std::round(0.5 * (a + b)), lo, hi));
      result.mesh = ed.build();
      ++result.bisected;
    } else {
      result.unrefined.push_back(target.index);
    }
  }
  return result;
}

RefineResult bisect(const Mesh& mesh, std::size_t element) {
  const std::size_t one[] = {element};
  return refine(mesh, one);
}

}  // namespace qcadapt
