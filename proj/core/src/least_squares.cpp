#include "mavctl/least_squares.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace mavctl {

LeastSquaresResult fit_least_squares(const ResidualFn& residual,
                                     const Eigen::VectorXd& initial,
                                     const LeastSquaresOptions& options) {
  Eigen::VectorXd theta = initial;
  Eigen::VectorXd r = residual(theta);
  double cost = r.squaredNorm();
  double damping = options.initial_damping;

  const auto n = theta.size();
  LeastSquaresResult out;
  out.parameters = theta;
  out.cost = cost;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.iterations = iter + 1;

    Eigen::MatrixXd jac(r.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = options.fd_step * std::max(1.0, std::abs(theta[j]));
      Eigen::VectorXd plus = theta, minus = theta;
      plus[j] += h;
      minus[j] -= h;
      jac.col(j) = (residual(plus) - residual(minus)) / (2.0 * h);
    }

    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    if (jtr.lpNorm<Eigen::Infinity>() < 1e-14) {
      out.converged = true;
      break;
    }

    bool stepped = false;
    for (int attempt = 0; attempt < 24; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal().array() += damping;
      const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        damping *= 10.0;
        continue;
      }
      const Eigen::VectorXd candidate = theta + step;
      const Eigen::VectorXd rc = residual(candidate);
      const double candidate_cost = rc.squaredNorm();
      if (std::isfinite(candidate_cost) && candidate_cost < cost) {
        const double decrease = cost - candidate_cost;
        theta = candidate;
        r = rc;
        cost = candidate_cost;
        damping = std::max(damping * 0.25, 1e-12);
        stepped = true;
        out.parameters = theta;
        out.cost = cost;
        if (decrease <= options.cost_tolerance * std::max(cost, 1e-300) ||
            step.lpNorm<Eigen::Infinity>() < options.step_tolerance) {
          out.converged = true;
        }
        break;
      }
      damping *= 10.0;
    }

    if (!stepped) {
      // No further descent possible: treat the current point as stationary.
      out.converged = true;
      break;
    }
    if (out.converged) break;
  }

  out.parameters = theta;
  out.cost = cost;
  return out;
}

}  // namespace mavctl
