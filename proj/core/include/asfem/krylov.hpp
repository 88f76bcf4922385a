#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace asfem {

/// out = Op(in); `out` is resized by the callee when needed.
using LinearMap = std::function<void(const Eigen::VectorXd& in, Eigen::VectorXd& out)>;

struct PcgResult {
  Eigen::VectorXd solution;
  int iterations = 0;
  /// ||b - A x_k|| / ||b|| after each iteration, entry 0 for the initial guess.
  std::vector<double> residual_history;
  /// alpha_k <r_k, B r_k> = ||e_k||_A^2 - ||e_{k+1}||_A^2, one entry per iteration.
  std::vector<double> energy_decrements;
};

/// Preconditioned conjugate gradients from x0 = 0. Stops when the recursive
/// residual satisfies ||r|| <= rel_tol ||b||. Throws SolverError on a
/// non-positive curvature or preconditioned residual product, or when
/// max_iterations is exhausted.
PcgResult pcg(const LinearMap& a, const LinearMap& preconditioner, const Eigen::VectorXd& b, double rel_tol,
              int max_iterations, const std::function<void(int, const Eigen::VectorXd&)>& on_iterate = {});

} // namespace asfem
