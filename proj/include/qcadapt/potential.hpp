#pragma once

namespace qcadapt {

/// Pair interaction potential phi(r) on (0, inf).
///
/// Implementations must be convex on (0, r_*) and concave on (r_*, inf),
/// where r_* is returned by inflection_point().
class PairPotential {
 public:
  virtual ~PairPotential() = default;

  /// phi^(order)(r) for order in 0..3. Throws std::domain_error for r <= 0.
  virtual double eval(double r, int order) const = 0;

  virtual double inflection_point() const = 0;

  /// M_j(t) = sup_{s >= t} |phi^(j)(s)| for j in {2, 3}.
  virtual double derivative_bound(int j, double t) const = 0;
};

/// phi(r) = exp(-2 alpha (r - 1)) - 2 exp(-alpha (r - 1)).
class MorsePotential final : public PairPotential {
 public:
  explicit MorsePotential(double alpha);

  double eval(double r, int order) const override;
  double inflection_point() const override;
  double derivative_bound(int j, double t) const override;

  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

}  // namespace qcadapt
