#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcadapt/lattice.hpp"

namespace qcadapt {

class ExternalForce;

/// Periodic finite-element partition with a single atomistic interval.
///
/// Node positions are held in lattice coordinates t = x / eps, so lattice
/// sites are exact integers and bisection stays exact. Node k (0-based) is
/// x_{k+1} in the usual 1-based numbering; element k is [x_{k-1}, x_k] with
/// x_{-1} = x_{K-1} - 1. Indices outside 0..K-1 wrap periodically.
class Mesh {
 public:
  /// `sites` must be strictly increasing in (-N, N]; the atomistic interval
  /// (atom_left, atom_right) must satisfy -N < atom_left < atom_right < N, or
  /// atom_right - atom_left = 2N for the fully atomistic configuration whose
  /// continuum region is the single point atom_right. Values within 1e-9 of
  /// an integer are snapped onto it.
  Mesh(int n_half, std::vector<double> sites, double atom_left, double atom_right);

  int n_half() const { return n_half_; }
  double epsilon() const { return 0.5 / n_half_; }
  double period() const { return 2.0 * n_half_; }
  std::size_t num_nodes() const { return sites_.size(); }
  std::size_t num_elements() const { return sites_.size(); }

  /// Lattice coordinate of node k (any integer k).
  double site(std::int64_t k) const;
  /// Physical coordinate of node k.
  double node(std::int64_t k) const { return site(k) * epsilon(); }
  std::span<const double> sites() const { return sites_; }

  double atom_left_site() const { return atom_left_; }
  double atom_right_site() const { return atom_right_; }
  Interval atomistic_interval() const { return {atom_left_ * epsilon(), atom_right_ * epsilon()}; }
  bool fully_atomistic() const { return atom_right_ - atom_left_ == period(); }

  /// Element k in lattice coordinates and physical coordinates.
  double element_length_sites(std::int64_t k) const { return site(k) - site(k - 1); }
  double element_length(std::int64_t k) const { return element_length_sites(k) * epsilon(); }
  Interval element(std::int64_t k) const { return {node(k - 1), node(k)}; }

  /// Whether the lattice coordinate t lies in the open atomistic region (mod period).
  bool in_atomistic_region(double t) const;
  bool is_atomistic_element(std::int64_t k) const;
  /// k in K_c: node lies in the closed continuum region.
  bool is_continuum_node(std::int64_t k) const { return !in_atomistic_region(site(k)); }
  bool is_lattice_site(std::int64_t k) const;

  /// Node index (0..K-1) at lattice coordinate t modulo the period, if any.
  std::optional<std::size_t> find_node(double t) const;

  struct Location {
    std::size_t element;   ///< element index in 0..K-1
    std::int64_t periods;  ///< t lies in element + periods * 2N
  };
  /// Element containing t, half-open on the right: site(e-1) <= t' < site(e).
  Location locate(double t) const;

  /// Index of the node at x = 0; throws if absent.
  std::size_t pinned_node() const;

  std::uint64_t hash() const;

  nlohmann::json to_json() const;
  static Mesh from_json(const nlohmann::json& j);

 private:
  int n_half_;
  std::vector<double> sites_;
  double atom_left_;
  double atom_right_;
};

struct MeshViolation {
  std::string property;  ///< "T2", "T3" or "T4"
  std::int64_t index;    ///< offending node or element
  std::string message;
};

/// Checks (T1)-(T4). (T1) is structural and guaranteed by the constructor.
std::vector<MeshViolation> validate(const Mesh& mesh);

/// Continuous piecewise-affine function on a mesh, periodic modulo the
/// macroscopic slope and pinned to 0 at x = 0.
class MeshFunction {
 public:
  /// From nodal values y(x_k), k = 0..K-1.
  MeshFunction(std::shared_ptr<const Mesh> mesh, double macroscopic_slope,
               std::vector<double> nodal_values);

  /// From periodic nodal offsets y(x_k) - F x_k.
  static MeshFunction from_offsets(std::shared_ptr<const Mesh> mesh, double macroscopic_slope,
                                   std::vector<double> offsets);
  static MeshFunction affine(std::shared_ptr<const Mesh> mesh, double slope);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  double macroscopic_slope() const { return slope_; }
  std::span<const double> offsets() const { return offsets_; }

  /// Value at node k (any integer k).
  double nodal(std::int64_t k) const;
  double nodal_offset(std::int64_t k) const;
  /// Value at lattice coordinate t.
  double at_site(double t) const;
  double offset_at_site(double t) const;
  /// Value at physical coordinate x.
  double operator()(double x) const { return at_site(x / mesh_->epsilon()); }
  /// Derivative on element k.
  double element_slope(std::int64_t k) const;
  /// (y(t_right) - y(t_left)) / ((t_right - t_left) eps) for lattice coordinates.
  double difference(double t_left, double t_right) const;
  /// Same between nodes i < j (unwrapped indices).
  double nodal_difference(std::int64_t i, std::int64_t j) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  double slope_;
  std::vector<double> offsets_;
};

/// I_h g for a continuous g with g(x+1) = g(x) + slope.
MeshFunction interpolate_to_mesh(std::shared_ptr<const Mesh> mesh, double macroscopic_slope,
                                 const std::function<double(double)>& g);
MeshFunction interpolate_to_mesh(std::shared_ptr<const Mesh> mesh, const LatticeFunction& v);
MeshFunction interpolate_to_mesh(std::shared_ptr<const Mesh> mesh, const MeshFunction& v);

/// I_eps of a mesh function.
LatticeFunction interpolate_to_lattice(const MeshFunction& v);

/// Quasi-optimal a priori mesh: atomistic region (-M eps, M eps), continuum
/// nodes placed by x_{k+1} = x_k + h*(x_k) and mirrored, node at 1/2.
Mesh generate_apriori(int n_half, int atom_radius, const ExternalForce& force);

/// Quasi-optimal continuum mesh size h*(x) (physical) for atomistic radius M.
double apriori_mesh_size(double x, int n_half, int atom_radius, const ExternalForce& force);

enum class InitialSpacing { graded, uniform };

/// Starting mesh for adaptive refinement: atomistic region
/// (-radius eps, radius eps), nodes at +-1/2, and `extra_per_half` further
/// continuum nodes on each side.
Mesh initial_adaptive_mesh(int n_half, int atom_radius, int extra_per_half,
                           InitialSpacing spacing = InitialSpacing::graded);

struct RefineResult {
  Mesh mesh;
  std::vector<std::size_t> unrefined;  ///< requested elements left as they were
  std::size_t bisected = 0;
  std::size_t absorbed = 0;
};

/// Refines the given continuum elements of `mesh` (indices into `mesh`).
///
/// Elements are bisected at their midpoint. An element next to the atomistic
/// region whose halves would be shorter than 2 eps is absorbed into the
/// atomistic region instead; the new interface is the first lattice site at
/// or beyond the element, and further absorption continues until the next
/// continuum element again has length >= 2 eps. Other elements whose halves
/// would violate (T4) are split at a lattice site keeping both parts
/// >= 2 eps, or reported in `unrefined` when no such site exists.
RefineResult refine(const Mesh& mesh, std::span<const std::size_t> elements);

/// Single-element refine. Throws for an invalid index or an atomistic element.
RefineResult bisect(const Mesh& mesh, std::size_t element);

}  // namespace qcadapt
