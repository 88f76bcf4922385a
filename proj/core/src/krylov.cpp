#include "asfem/krylov.hpp"

#include "asfem/error.hpp"

#include <cmath>
#include <string>

namespace asfem {

PcgResult pcg(const LinearMap& a, const LinearMap& preconditioner, const Eigen::VectorXd& b, double rel_tol,
              int max_iterations, const std::function<void(int, const Eigen::VectorXd&)>& on_iterate) {
  PcgResult result;
  const Eigen::Index n = b.size();
  result.solution = Eigen::VectorXd::Zero(n);
  const double b_norm = b.norm();
  result.residual_history.push_back(b_norm > 0.0 ? 1.0 : 0.0);
  if (b_norm == 0.0) return result;

  Eigen::VectorXd r = b;
  Eigen::VectorXd z(n), p(n), ap(n);
  preconditioner(r, z);
  double rho = r.dot(z);
  if (!(rho > 0.0)) throw SolverError("pcg: preconditioner is not positive definite (<r, Br> <= 0)");
  p = z;
  const double target = rel_tol * b_norm;

  for (int k = 0; k < max_iterations; ++k) {
    a(p, ap);
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0))
      throw SolverError("pcg: non-positive curvature at iteration " + std::to_string(k) + " (operator not SPD)");
    const double alpha = rho / curvature;
    result.solution.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    result.energy_decrements.push_back(alpha * rho);
    result.iterations = k + 1;
    const double r_norm = r.norm();
    result.residual_history.push_back(r_norm / b_norm);
    if (on_iterate) on_iterate(k + 1, result.solution);
    if (r_norm <= target) return result;

    preconditioner(r, z);
    const double rho_next = r.dot(z);
    if (!(rho_next > 0.0)) throw SolverError("pcg: preconditioner is not positive definite (<r, Br> <= 0)");
    p = z + (rho_next / rho) * p;
    rho = rho_next;
  }
  throw SolverError("pcg: no convergence within " + std::to_string(max_iterations) + " iterations (relative residual " +
                    std::to_string(result.residual_history.back()) + ")");
}

} // namespace asfem
