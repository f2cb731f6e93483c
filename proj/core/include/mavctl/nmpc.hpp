#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "mavctl/dynamics.hpp"
#include "mavctl/trajectory.hpp"

namespace mavctl {

inline constexpr int kOcpStateDim = 8;  // p(3) v(3) roll pitch
inline constexpr int kOcpInputDim = 3;  // u_phi u_theta u_thrust

using OcpStateVec = Eigen::Matrix<double, kOcpStateDim, 1>;
using OcpInputVec = Eigen::Matrix<double, kOcpInputDim, 1>;
using OcpStateMat = Eigen::Matrix<double, kOcpStateDim, kOcpStateDim>;
using OcpInputMat = Eigen::Matrix<double, kOcpStateDim, kOcpInputDim>;

/// Diagonal stage, input, and terminal penalties. Yaw is tracked by a
/// separate rate law and carries no weight here.
struct MpcWeights {
  OcpStateVec q_state;
  OcpInputVec r_input;
  OcpStateVec p_terminal;

  static MpcWeights defaults();
  void validate() const;
};

/// Box constraint set for the inputs.
struct InputBounds {
  OcpInputVec lo;
  OcpInputVec hi;

  static InputBounds defaults(const VehicleParams& params);
  OcpInputVec clip(const OcpInputVec& u) const;
  bool contains(const OcpInputVec& u, double tol = 1e-12) const;
  void validate() const;
};

struct OcpSpec {
  double horizon{2.0};  // s
  int n_steps{20};
  MpcWeights weights{MpcWeights::defaults()};
  InputBounds bounds{InputBounds::defaults(VehicleParams{})};
  VehicleParams params;

  double dt() const { return horizon / n_steps; }
  void validate() const;
};

struct ReferencePoint {
  StateVector x_ref;
  ControlInput u_ref;
};

struct ControlPlan {
  ControlInput first_input;
  std::vector<StateVector> predicted_states;  // n_steps + 1
  std::vector<ControlInput> predicted_inputs;  // n_steps
  double cost{0.0};
  int iterations{0};
};

/// Jacobians of the RK4 discrete step of the reduced model, obtained by
/// forward-mode differentiation through the integrator stages.
void linearize_dynamics(const StateVector& x, const ControlInput& u,
                        const VehicleParams& params, const Vec3& f_ext,
                        double dt, OcpStateMat& a, OcpInputMat& b);

struct SolveSettings {
  int max_iterations{50};
  double cost_decrease_tolerance{1e-8};
  double gradient_tolerance{1e-6};
};

/// Gauss-Newton SQP over single-shooting inputs with box projection and a
/// backtracking line search. Always returns a feasible plan; the reported
/// cost is the objective evaluated on the returned plan.
ControlPlan solve_ocp(const OcpSpec& ocp, const StateVector& x0,
                      const std::vector<ReferencePoint>& refs, const Vec3& f_ext,
                      const ControlPlan* warm_start = nullptr,
                      const SolveSettings& settings = {});

/// The discretized objective on a given input sequence (used by the solver
/// and reusable for cross-checks).
double evaluate_objective(const OcpSpec& ocp, const StateVector& x0,
                          const std::vector<ReferencePoint>& refs,
                          const Vec3& f_ext,
                          const std::vector<ControlInput>& inputs);

/// Steady-state input at a reference state under the estimated external
/// force; thin wrapper over hover_input at the reference heading.
ControlInput steady_state_input(const StateVector& ref, const Vec3& f_ext,
                                const VehicleParams& params);

/// Builds a bound-respecting reference input for a trajectory sample,
/// including the acceleration feedforward.
ControlInput reference_input(const ReferenceSample& sample, const Vec3& f_ext,
                             const VehicleParams& params,
                             const InputBounds& bounds);

using ReferenceSampler = std::function<ReferenceSample(double)>;

struct ControllerSettings {
  OcpSpec ocp;
  SolveSettings solver;
  double yaw_gain{1.0};          // 1/s
  double yaw_rate_limit{M_PI / 2.0};  // rad/s
};

/// Receding-horizon position controller: samples the reference over the
/// horizon, solves with a one-step-shifted warm start, and appends the
/// proportional yaw-rate command. One instance per control loop.
class PositionController {
 public:
  explicit PositionController(ControllerSettings settings);

  ControlInput step(const StateVector& estimate, const ReferenceSampler& refs,
                    double t_now, const Vec3& f_ext);

  const std::optional<ControlPlan>& last_plan() const { return warm_; }
  void reset() { warm_.reset(); }

 private:
  ControllerSettings settings_;
  std::optional<ControlPlan> warm_;
};

}  // namespace mavctl
