#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace qcadapt {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NewtonOptions {
  double tolerance = 1e-10;  ///< stop when |grad|_inf <= tolerance * max(1, |E|)
  int max_iterations = 100;
  double strain_floor = 0.0;  ///< 0 means r_* / 4 of the model potential
  int max_halvings = 60;
};

struct NewtonReport {
  int iterations = 0;
  double energy = 0.0;
  double gradient_norm = 0.0;
};

/// Factorizes a symmetric matrix and throws unless it is positive definite.
inline void factorize_spd(const Eigen::SparseMatrix<double>& h,
                          Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& ldlt) {
  ldlt.compute(h);
  if (ldlt.info() != Eigen::Success) throw SolverError("Hessian factorization failed");
  if ((ldlt.vectorD().array() <= 0.0).any()) throw SolverError("Hessian is not positive definite");
}

/// Damped Newton iteration on a reduced (pinned) coordinate vector.
///
/// `Problem` supplies energy(x), gradient(x), hessian(x) (sparse, symmetric)
/// and min_strain(x). energy() may throw std::domain_error for inadmissible
/// states; such trial steps are halved like any other rejected step.
template <class Problem>
NewtonReport newton_minimize(const Problem& problem, Eigen::VectorXd& x, const NewtonOptions& opt,
                             double strain_floor) {
  NewtonReport rep;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  double energy = problem.energy(x);
  Eigen::VectorXd g = problem.gradient(x);
  for (rep.iterations = 0;; ++rep.iterations) {
    rep.energy = energy;
    rep.gradient_norm = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    if (rep.gradient_norm <= opt.tolerance * std::max(1.0, std::abs(energy))) break;
    if (rep.iterations >= opt.max_iterations)
      throw SolverError("Newton did not converge in " + std::to_string(opt.max_iterations) +
                        " iterations (|grad| = " + std::to_string(rep.gradient_norm) + ")");
    Eigen::VectorXd step;
    try {
      factorize_spd(problem.hessian(x), ldlt);
      step = ldlt.solve(-g);
    } catch (const SolverError&) {
      step = -g;  // fall back to steepest descent away from convexity
    }

    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half <= opt.max_halvings; ++half, t *= 0.5) {
      Eigen::VectorXd trial = x + t * step;
      double e_trial;
      try {
        if (problem.min_strain(trial) < strain_floor) continue;
        e_trial = problem.energy(trial);
      } catch (const std::domain_error&) {
        continue;
      }
      if (e_trial < energy) {
        x = std::move(trial);
        energy = e_trial;
        g = problem.gradient(x);
        accepted = true;
        break;
      }
      // Close to the minimum the energy stagnates at round-off; accept a step
      // that still reduces the gradient.
      if (e_trial <= energy + 1e-12 * std::abs(energy)) {
        Eigen::VectorXd g_trial = problem.gradient(trial);
        if (g_trial.cwiseAbs().maxCoeff() < rep.gradient_norm) {
          x = std::move(trial);
          energy = e_trial;
          g = std::move(g_trial);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      if (problem.min_strain(x) < strain_floor) throw SolverError("strains fell below the floor");
      throw SolverError("line search failed (|grad| = " + std::to_string(rep.gradient_norm) + ")");
    }
  }
  factorize_spd(problem.hessian(x), ldlt);
  return rep;
}

}  // namespace qcadapt
