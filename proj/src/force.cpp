#include "qcadapt/force.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace qcadapt {

namespace {

constexpr unsigned kMaxDepth = 15;
constexpr double kRelTol = 1e-10;

void check_order(int order) {
  if (order < 0 || order > 2) throw std::invalid_argument("force derivative order must be 0..2");
}

}  // namespace

double reduce_to_cell(double x) { return x - std::ceil(x - 0.5); }

std::string ConstantForce::describe() const {
  std::ostringstream os;
  os << "constant(" << value_ << ")";
  return os.str();
}

double TrigonometricForce::eval(double x, int order) const {
  check_order(order);
  const double w = 2.0 * std::numbers::pi;
  const double s = std::sin(w * x), c = std::cos(w * x);
  switch (order) {
    case 0:
      return a_ * s + b_ * c + c_;
    case 1:
      return w * (a_ * c - b_ * s);
    default:
      return -w * w * (a_ * s + b_ * c);
  }
}

std::string TrigonometricForce::describe() const {
  std::ostringstream os;
  os << "trigonometric(" << a_ << ", " << b_ << ", " << c_ << ")";
  return os.str();
}

double SingularDefectForce::eval(double x, int order) const {
  check_order(order);
  const double t = reduce_to_cell(x);
  if (t == 0.0) return 0.0;
  const double a = amplitude_;
  double value;
  switch (order) {
    case 0:
      value = a * (0.5 / std::abs(t) - 1.0);
      break;
    case 1:
      value = -a * 0.5 / (t * t) * (t > 0 ? 1.0 : -1.0);
      break;
    default:
      value = a / (t * t * std::abs(t));
      break;
  }
  if (odd_ && t < 0) value = -value;
  return value;
}

std::string SingularDefectForce::describe() const {
  std::ostringstream os;
  os << (odd_ ? "singular_defect_odd(" : "singular_defect(") << amplitude_ << ")";
  return os.str();
}

double integrate_piecewise(const std::function<double(double)>& g, double a, double b,
                           const std::vector<double>& breaks) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts{a, b};
  for (double p : breaks) {
    for (double m = std::ceil(a - p); p + m < b; m += 1.0) {
      if (p + m > a) cuts.push_back(p + m);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    if (cuts[i] > cuts[i - 1]) {
      total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
          g, cuts[i - 1], cuts[i], kMaxDepth, kRelTol);
    }
  }
  return total;
}

double force_l2_squared(const ExternalForce& f, int order, double a, double b) {
  if (f.identically_zero()) return 0.0;
  return integrate_piecewise(
      [&](double x) {
        const double v = f.eval(x, order);
        return v * v;
      },
      a, b, f.breakpoints());
}

double force_weighted_l2_squared(const ExternalForce& f, int order, double a, double b,
                                 const std::function<double(double)>& weight) {
  if (f.identically_zero()) return 0.0;
  return integrate_piecewise(
      [&](double x) {
        const double v = weight(x) * f.eval(x, order);
        return v * v;
      },
      a, b, f.breakpoints());
}

double force_l1(const ExternalForce& f, double a, double b) {
  if (f.identically_zero()) return 0.0;
  return integrate_piecewise([&](double x) { return std::abs(f.eval(x, 0)); }, a, b,
                             f.breakpoints());
}

double force_times_affine_second_derivative_l1(const ExternalForce& f, double a, double b,
                                               double value_at_a, double slope) {
  if (f.identically_zero()) return 0.0;
  return integrate_piecewise(
      [&](double x) {
        const double v = value_at_a + slope * (x - a);
        return std::abs(f.eval(x, 2) * v + 2.0 * f.eval(x, 1) * slope);
      },
      a, b, f.breakpoints());
}

}  // namespace qcadapt
