#pragma once

#include <Eigen/Core>
#include <functional>

namespace mavctl {

struct LeastSquaresOptions {
  int max_iterations{100};
  double cost_tolerance{1e-14};   // relative cost decrease
  double step_tolerance{1e-12};   // parameter step infinity norm
  double fd_step{1e-6};           // central-difference step for the Jacobian
  double initial_damping{1e-6};
};

struct LeastSquaresResult {
  Eigen::VectorXd parameters;
  double cost{0.0};  // sum of squared residuals
  int iterations{0};
  bool converged{false};
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Levenberg-Marquardt on 0.5*||r(theta)||^2 with a central finite-difference
/// Jacobian. Deterministic for identical inputs.
LeastSquaresResult fit_least_squares(const ResidualFn& residual,
                                     const Eigen::VectorXd& initial,
                                     const LeastSquaresOptions& options = {});

}  // namespace mavctl
