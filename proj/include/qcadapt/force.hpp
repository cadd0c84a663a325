#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace qcadapt {

/// 1-periodic dead load f with derivatives up to second order.
///
/// Coordinates are physical (the period cell is (-1/2, 1/2]). A force may be
/// non-smooth at a finite set of points per period; those are reported by
/// breakpoints() so that quadrature never straddles them.
class ExternalForce {
 public:
  virtual ~ExternalForce() = default;

  /// f^(order)(x) for order in 0..2.
  virtual double eval(double x, int order) const = 0;

  /// Points in (-1/2, 1/2] where f or its derivatives are not smooth.
  virtual std::vector<double> breakpoints() const { return {}; }

  virtual bool identically_zero() const { return false; }

  virtual std::string describe() const = 0;
};

class ZeroForce final : public ExternalForce {
 public:
  double eval(double, int) const override { return 0.0; }
  bool identically_zero() const override { return true; }
  std::string describe() const override { return "zero"; }
};

class ConstantForce final : public ExternalForce {
 public:
  explicit ConstantForce(double value) : value_(value) {}
  double eval(double, int order) const override { return order == 0 ? value_ : 0.0; }
  bool identically_zero() const override { return value_ == 0.0; }
  std::string describe() const override;

 private:
  double value_;
};

/// f(x) = a sin(2 pi x) + b cos(2 pi x) + c.
class TrigonometricForce final : public ExternalForce {
 public:
  TrigonometricForce(double a, double b, double c) : a_(a), b_(b), c_(c) {}
  double eval(double x, int order) const override;
  std::string describe() const override;

 private:
  double a_, b_, c_;
};

/// The |x|^{-1} "defect" load
///
///   f(x) = -A (x + 1/2) / x   on [-1/2, 0),
///   f(x) =  A (1/2 - x) / x   on (0, 1/2],
///
/// extended periodically. The value at x = 0 is set to 0; it only ever
/// multiplies the pinned displacement u(0) = 0. With `odd` set the left
/// branch is negated, which gives an antisymmetric load of the same
/// magnitude.
class SingularDefectForce final : public ExternalForce {
 public:
  explicit SingularDefectForce(double amplitude, bool odd = false)
      : amplitude_(amplitude), odd_(odd) {}
  double eval(double x, int order) const override;
  std::vector<double> breakpoints() const override { return {0.0, 0.5}; }
  bool identically_zero() const override { return amplitude_ == 0.0; }
  std::string describe() const override;

  double amplitude() const { return amplitude_; }

 private:
  double amplitude_;
  bool odd_;
};

/// Reduces x into the period cell (-1/2, 1/2].
double reduce_to_cell(double x);

/// Adaptive 15-point Gauss-Kronrod integral of g over [a, b], split at every
/// periodic image of `breaks` inside (a, b).
double integrate_piecewise(const std::function<double(double)>& g, double a, double b,
                           const std::vector<double>& breaks);

/// ||f^(order)||_{L^2(a,b)}^2.
double force_l2_squared(const ExternalForce& f, int order, double a, double b);

/// ||weight * f^(order)||_{L^2(a,b)}^2.
double force_weighted_l2_squared(const ExternalForce& f, int order, double a, double b,
                                 const std::function<double(double)>& weight);

/// ||f||_{L^1(a,b)}.
double force_l1(const ExternalForce& f, double a, double b);

/// ||(f v)''||_{L^1(a,b)} for the affine v(x) = value_at_a + slope (x - a),
/// i.e. the L^1 norm of f'' v + 2 f' v'.
double force_times_affine_second_derivative_l1(const ExternalForce& f, double a, double b,
                                               double value_at_a, double slope);

}  // namespace qcadapt
