#include "qcadapt/potential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qcadapt {

MorsePotential::MorsePotential(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("Morse alpha must be positive");
}

// With z = exp(-alpha (r - 1)) every derivative is a quadratic in z:
//   phi   = z^2 - 2z
//   phi'  = 2a (z - z^2)
//   phi'' = 2a^2 (2z^2 - z)
//   phi'''= 2a^3 (z - 4z^2)
double MorsePotential::eval(double r, int order) const {
  if (!(r > 0.0)) throw std::domain_error("Morse potential evaluated at r <= 0");
  const double a = alpha_;
  const double z = std::exp(-a * (r - 1.0));
  switch (order) {
    case 0:
      return z * z - 2.0 * z;
    case 1:
      return 2.0 * a * (z - z * z);
    case 2:
      return 2.0 * a * a * (2.0 * z * z - z);
    case 3:
      return 2.0 * a * a * a * (z - 4.0 * z * z);
    default:
      throw std::invalid_argument("Morse derivative order must be in 0..3, got " +
                                  std::to_string(order));
  }
}

double MorsePotential::inflection_point() const { return 1.0 + std::log(2.0) / alpha_; }

double MorsePotential::derivative_bound(int j, double t) const {
  if (!(t > 0.0)) throw std::domain_error("derivative bound requires t > 0");
  if (j != 2 && j != 3) throw std::invalid_argument("derivative bound defined for j = 2, 3");
  // phi^(j) has a single critical point on (0, inf): z = 1/4 for j = 2 and
  // z = 1/8 for j = 3. It tends to 0 as s -> inf.
  const double z_crit = (j == 2) ? 0.25 : 0.125;
  const double r_crit = 1.0 - std::log(z_crit) / alpha_;
  double bound = std::abs(eval(t, j));
  if (r_crit > t) bound = std::max(bound, std::abs(eval(r_crit, j)));
  return bound;
}

}  // namespace qcadapt
