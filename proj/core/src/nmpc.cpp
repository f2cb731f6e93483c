#include "mavctl/nmpc.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace mavctl {

MpcWeights MpcWeights::defaults() {
  MpcWeights w;
  w.q_state << 40, 40, 60, 20, 20, 25, 10, 10;
  w.r_input << 35, 35, 2;
  w.p_terminal = 10.0 * w.q_state;
  return w;
}

void MpcWeights::validate() const {
  if ((q_state.array() < 0.0).any() || (p_terminal.array() < 0.0).any())
    throw std::invalid_argument("state penalties must be non-negative");
  if ((r_input.array() <= 0.0).any())
    throw std::invalid_argument("input penalties must be positive");
}

InputBounds InputBounds::defaults(const VehicleParams& params) {
  InputBounds b;
  const double hover = params.mass * params.gravity;
  b.lo << -params.attitude_limit, -params.attitude_limit, 0.3 * hover;
  b.hi << params.attitude_limit, params.attitude_limit, 1.8 * hover;
  return b;
}

OcpInputVec InputBounds::clip(const OcpInputVec& u) const {
  return u.cwiseMax(lo).cwiseMin(hi);
}

bool InputBounds::contains(const OcpInputVec& u, double tol) const {
  return (u.array() >= lo.array() - tol).all() &&
         (u.array() <= hi.array() + tol).all();
}

void InputBounds::validate() const {
  if ((lo.array() >= hi.array()).any())
    throw std::invalid_argument("input bounds must satisfy lo < hi");
  if (lo[2] < 0.0) throw std::invalid_argument("thrust lower bound must be >= 0");
}

void OcpSpec::validate() const {
  if (n_steps < 2) throw std::invalid_argument("OCP needs at least 2 steps");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  weights.validate();
  bounds.validate();
  params.validate();
}

namespace {

OcpStateVec reduced_state(const StateVector& x) {
  OcpStateVec s;
  s << x.p, x.v, x.attitude.roll, x.attitude.pitch;
  return s;
}

ControlInput to_control(const OcpInputVec& u) {
  return ControlInput{u[0], u[1], u[2], 0.0};
}

OcpInputVec to_vec(const ControlInput& u) {
  return OcpInputVec(u.u_phi, u.u_theta, u.u_thrust);
}

}  // namespace

void linearize_dynamics(const StateVector& x, const ControlInput& u,
                        const VehicleParams& params, const Vec3& f_ext,
                        double dt, OcpStateMat& a, OcpInputMat& b) {
  using Mat9 = Eigen::Matrix<double, 9, 9>;
  using Mat94 = Eigen::Matrix<double, 9, 4>;

  // Forward-mode differentiation of the RK4 map on the full state, then
  // reduction to the (p, v, roll, pitch) block; yaw is a frozen parameter.
  const auto f = [&](const StateVector& s) { return mav_dynamics(s, u, params, f_ext); };
  const auto advance = [](const StateVector& s, const StateDerivative& d, double h) {
    StateVector out;
    out.p = s.p + h * d.p_dot;
    out.v = s.v + h * d.v_dot;
    out.attitude.roll = s.attitude.roll + h * d.attitude_dot.roll;
    out.attitude.pitch = s.attitude.pitch + h * d.attitude_dot.pitch;
    out.attitude.yaw = s.attitude.yaw + h * d.attitude_dot.yaw;
    return out;
  };

  const StateDerivative k1 = f(x);
  const StateVector x2 = advance(x, k1, dt / 2);
  const StateDerivative k2 = f(x2);
  const StateVector x3 = advance(x, k2, dt / 2);
  const StateDerivative k3 = f(x3);
  const StateVector x4 = advance(x, k3, dt);

  Mat9 j1, j2, j3, j4;
  Mat94 ju1, ju2, ju3, ju4;
  mav_dynamics_jacobians(x, u, params, f_ext, j1, ju1);
  mav_dynamics_jacobians(x2, u, params, f_ext, j2, ju2);
  mav_dynamics_jacobians(x3, u, params, f_ext, j3, ju3);
  mav_dynamics_jacobians(x4, u, params, f_ext, j4, ju4);

  const Mat9 i9 = Mat9::Identity();
  const Mat9 a1 = j1;
  const Mat9 a2 = j2 * (i9 + 0.5 * dt * a1);
  const Mat9 a3 = j3 * (i9 + 0.5 * dt * a2);
  const Mat9 a4 = j4 * (i9 + dt * a3);
  const Mat9 fx = i9 + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);

  const Mat94 b1 = ju1;
  const Mat94 b2 = ju2 + j2 * (0.5 * dt * b1);
  const Mat94 b3 = ju3 + j3 * (0.5 * dt * b2);
  const Mat94 b4 = ju4 + j4 * (dt * b3);
  const Mat94 fu = dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);

  a = fx.topLeftCorner<kOcpStateDim, kOcpStateDim>();
  b = fu.topLeftCorner<kOcpStateDim, kOcpInputDim>();
}

namespace {

struct Rollout {
  std::vector<StateVector> states;  // n + 1
  double cost{0.0};
};

Rollout roll_out(const OcpSpec& ocp, const StateVector& x0,
                 const std::vector<ReferencePoint>& refs, const Vec3& f_ext,
                 const Eigen::VectorXd& u_stacked) {
  const int n = ocp.n_steps;
  const double dt = ocp.dt();
  Rollout r;
  r.states.resize(n + 1);
  r.states[0] = x0;

  for (int k = 0; k < n; ++k) {
    const OcpInputVec uk = u_stacked.segment<3>(3 * k);
    const OcpStateVec err = reduced_state(r.states[k]) - reduced_state(refs[k].x_ref);
    const OcpInputVec uerr = uk - to_vec(refs[k].u_ref);
    r.cost += dt * err.dot(ocp.weights.q_state.cwiseProduct(err));
    r.cost += dt * uerr.dot(ocp.weights.r_input.cwiseProduct(uerr));
    ControlInput u = to_control(uk);
    r.states[k + 1] = rk4_step(r.states[k], u, ocp.params, f_ext, dt);
  }
  const OcpStateVec terr =
      reduced_state(r.states[n]) - reduced_state(refs[n].x_ref);
  r.cost += terr.dot(ocp.weights.p_terminal.cwiseProduct(terr));
  return r;
}

Eigen::VectorXd clip_stacked(const InputBounds& bounds, Eigen::VectorXd u) {
  for (Eigen::Index k = 0; k + 2 < u.size(); k += 3)
    u.segment<3>(k) = bounds.clip(u.segment<3>(k));
  return u;
}

}  // namespace

double evaluate_objective(const OcpSpec& ocp, const StateVector& x0,
                          const std::vector<ReferencePoint>& refs,
                          const Vec3& f_ext,
                          const std::vector<ControlInput>& inputs) {
  if (static_cast<int>(inputs.size()) != ocp.n_steps)
    throw std::invalid_argument("evaluate_objective: wrong input count");
  Eigen::VectorXd u(3 * ocp.n_steps);
  for (int k = 0; k < ocp.n_steps; ++k) u.segment<3>(3 * k) = to_vec(inputs[k]);
  return roll_out(ocp, x0, refs, f_ext, u).cost;
}

ControlPlan solve_ocp(const OcpSpec& ocp, const StateVector& x0,
                      const std::vector<ReferencePoint>& refs, const Vec3& f_ext,
                      const ControlPlan* warm_start,
                      const SolveSettings& settings) {
  ocp.validate();
  if (!x0.all_finite())
    throw std::invalid_argument("solve_ocp: non-finite initial state");
  const int n = ocp.n_steps;
  if (static_cast<int>(refs.size()) != n + 1)
    throw std::invalid_argument("solve_ocp: need n_steps + 1 reference points");

  const double dt = ocp.dt();
  const OcpStateVec sq = (ocp.weights.q_state * dt).cwiseSqrt();
  const OcpInputVec sr = (ocp.weights.r_input * dt).cwiseSqrt();
  const OcpStateVec sp = ocp.weights.p_terminal.cwiseSqrt();

  Eigen::VectorXd u(3 * n);
  if (warm_start && static_cast<int>(warm_start->predicted_inputs.size()) == n) {
    for (int k = 0; k < n; ++k)
      u.segment<3>(3 * k) = to_vec(warm_start->predicted_inputs[k]);
  } else {
    for (int k = 0; k < n; ++k) u.segment<3>(3 * k) = to_vec(refs[k].u_ref);
  }
  u = clip_stacked(ocp.bounds, u);

  Rollout current = roll_out(ocp, x0, refs, f_ext, u);
  int iterations = 0;

  const int residual_rows = 8 * n + 3 * n + 8;
  Eigen::MatrixXd jac(residual_rows, 3 * n);
  Eigen::VectorXd res(residual_rows);

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    iterations = iter + 1;
    jac.setZero();

    // Single-shooting sensitivities S_k = d x_k / d U, built forward.
    Eigen::MatrixXd sensitivity = Eigen::MatrixXd::Zero(8, 3 * n);
    for (int k = 0; k < n; ++k) {
      const OcpStateVec err =
          reduced_state(current.states[k]) - reduced_state(refs[k].x_ref);
      res.segment<8>(8 * k) = sq.cwiseProduct(err);
      jac.block(8 * k, 0, 8, 3 * n) = sq.asDiagonal() * sensitivity;

      const OcpInputVec uerr = u.segment<3>(3 * k) - to_vec(refs[k].u_ref);
      res.segment<3>(8 * n + 3 * k) = sr.cwiseProduct(uerr);
      jac.block<3, 3>(8 * n + 3 * k, 3 * k) = sr.asDiagonal();

      OcpStateMat a;
      OcpInputMat b;
      linearize_dynamics(current.states[k], to_control(u.segment<3>(3 * k)),
                         ocp.params, f_ext, dt, a, b);
      sensitivity = (a * sensitivity).eval();
      sensitivity.block<8, 3>(0, 3 * k) += b;
    }
    const OcpStateVec terr =
        reduced_state(current.states[n]) - reduced_state(refs[n].x_ref);
    res.segment<8>(8 * n + 3 * n) = sp.cwiseProduct(terr);
    jac.block(8 * n + 3 * n, 0, 8, 3 * n) = sp.asDiagonal() * sensitivity;

    const Eigen::VectorXd gradient = 2.0 * jac.transpose() * res;
    const double projected_gradient_norm =
        (u - clip_stacked(ocp.bounds, u - gradient)).lpNorm<Eigen::Infinity>();
    if (projected_gradient_norm < settings.gradient_tolerance) break;

    Eigen::MatrixXd h = jac.transpose() * jac;
    h.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = h.ldlt().solve(-0.5 * gradient);

    bool accepted = false;
    double new_cost = current.cost;
    Eigen::VectorXd u_candidate;
    Rollout candidate;
    for (double alpha = 1.0; alpha > 1e-8; alpha *= 0.5) {
      u_candidate = clip_stacked(ocp.bounds, u + alpha * step);
      candidate = roll_out(ocp, x0, refs, f_ext, u_candidate);
      if (std::isfinite(candidate.cost) && candidate.cost < current.cost) {
        accepted = true;
        new_cost = candidate.cost;
        break;
      }
    }
    if (!accepted) break;  // stationary against the constraints

    const double decrease = current.cost - new_cost;
    u = u_candidate;
    current = candidate;
    if (decrease < settings.cost_decrease_tolerance) break;
  }

  ControlPlan plan;
  plan.predicted_states = current.states;
  plan.predicted_inputs.resize(n);
  for (int k = 0; k < n; ++k)
    plan.predicted_inputs[k] = to_control(u.segment<3>(3 * k));
  plan.first_input = plan.predicted_inputs.front();
  plan.cost = current.cost;
  plan.iterations = iterations;
  return plan;
}

ControlInput steady_state_input(const StateVector& ref, const Vec3& f_ext,
                                const VehicleParams& params) {
  return hover_input(params, f_ext, ref.attitude.yaw);
}

ControlInput reference_input(const ReferenceSample& sample, const Vec3& f_ext,
                             const VehicleParams& params,
                             const InputBounds& bounds) {
  // Acceleration feedforward folds into an effective external force.
  const Vec3 effective = f_ext - params.mass * sample.a;
  ControlInput u;
  try {
    u = hover_input(params, effective, sample.yaw);
  } catch (const std::domain_error&) {
    // Out of the feasible envelope: fall back to level attitude and let the
    // solver work against the clipped thrust.
    u = ControlInput{0.0, 0.0, params.mass * params.gravity, 0.0};
  }
  const OcpInputVec clipped = bounds.clip(to_vec(u));
  return ControlInput{clipped[0], clipped[1], clipped[2], 0.0};
}

PositionController::PositionController(ControllerSettings settings)
    : settings_(std::move(settings)) {
  settings_.ocp.validate();
}

ControlInput PositionController::step(const StateVector& estimate,
                                      const ReferenceSampler& refs, double t_now,
                                      const Vec3& f_ext) {
  const int n = settings_.ocp.n_steps;
  const double dt = settings_.ocp.dt();

  std::vector<ReferencePoint> points(n + 1);
  for (int k = 0; k <= n; ++k) {
    const ReferenceSample s = refs(t_now + k * dt);
    ReferencePoint rp;
    rp.u_ref = reference_input(s, f_ext, settings_.ocp.params, settings_.ocp.bounds);
    rp.x_ref.p = s.p;
    rp.x_ref.v = s.v;
    rp.x_ref.attitude.roll = settings_.ocp.params.k_phi * rp.u_ref.u_phi;
    rp.x_ref.attitude.pitch = settings_.ocp.params.k_theta * rp.u_ref.u_theta;
    rp.x_ref.attitude.yaw = s.yaw;
    points[k] = rp;
  }

  std::optional<ControlPlan> shifted;
  if (warm_) {
    shifted = *warm_;
    auto& inputs = shifted->predicted_inputs;
    if (!inputs.empty()) {
      inputs.erase(inputs.begin());
      inputs.push_back(inputs.back());
    }
  }

  ControlPlan plan = solve_ocp(settings_.ocp, estimate, points, f_ext,
                               shifted ? &*shifted : nullptr, settings_.solver);

  const double yaw_error =
      wrap_angle(refs(t_now).yaw - estimate.attitude.yaw);
  double yaw_rate = settings_.yaw_gain * yaw_error;
  yaw_rate = std::clamp(yaw_rate, -settings_.yaw_rate_limit,
                        settings_.yaw_rate_limit);

  plan.first_input.u_psi_dot = yaw_rate;
  warm_ = plan;
  return plan.first_input;
}

}  // namespace mavctl
