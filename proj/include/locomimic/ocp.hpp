#pragma once

// Finite-horizon optimal control over the discretized pendulum: stacked
// inputs (vertical acceleration and CoP weights per step, plus footholds in
// footfall order) are optimized against velocity/height tracking and
// foothold regularization, with the CoP weight constraints folded into the
// cost as penalties.

#include "locomimic/gait_schedule.hpp"
#include "locomimic/vhipm.hpp"

#include <optional>
#include <vector>

namespace locomimic {

struct OcpWeights {
  double velocity = 1.0;           // horizontal velocity tracking
  double height = 10.0;            // base height tracking
  double foothold = 5.0;           // xy deviation from the nominal hip projection
  double vertical_accel = 1e-3;    // h_ddot^2
  double cop_weight = 0.1;         // (w - 1/m)^2
  double input_smoothness = 0.0;   // (h_ddot_k - h_ddot_{k-1})^2, off by default
  double weight_sum = 1e3;         // penalty on (sum w - 1)
  double weight_nonneg = 1e3;      // one-sided penalty on w < 0
  double accel_bounds = 10.0;      // one-sided penalty outside [h_ddot_min, h_ddot_max]

  OcpWeights scaled(double factor) const;
  /// Throws InvalidParameter.
  void validate() const;
  bool operator==(const OcpWeights&) const = default;
};

struct SolverOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;  // on ||g||_inf, relative to (1 + J)
  double armijo = 1e-4;
  int max_backtracks = 30;
  int max_outer_iterations = 12;     // multiplier updates
  double feasibility_tolerance = 1e-9;
  double h_ddot_max = 20.0;          // lower bound is -|g|
  bool operator==(const SolverOptions&) const = default;
};

struct OcpProblem {
  Vec3 r0{0.0, 0.0, 0.32};
  Vec3 v0 = Vec3::Zero();
  ContactTimeline timeline;
  VelocityCommand command;
  double yaw0 = 0.0;
  double target_height = 0.32;  // above ground
  double ground_height = 0.0;
  /// Nominal foot positions relative to the base in the yaw frame (xy used).
  PerLeg<Vec2> hip_offsets{Vec2{0.19, 0.13}, Vec2{0.19, -0.13}, Vec2{-0.19, 0.13}, Vec2{-0.19, -0.13}};
  /// Measured positions of legs in stance at k = 0; required for those legs.
  PerLeg<std::optional<Vec3>> stance_feet;
  GravityVector gravity;
  double raibert_gain = 0.03;

  int steps() const { return timeline.steps; }
  double dt() const { return timeline.dt; }
  /// r_{-1} = r0 - v0 dt
  Vec3 r_before() const { return r0 - v0 * dt(); }
  /// Command heading at time offset s from the horizon start.
  double heading(double s) const { return yaw0 + command.yaw_rate * s; }
  /// Commanded horizontal velocity in the world frame at time offset s.
  Vec2 command_velocity(double s) const {
    return rotate2(heading(s), Vec2{command.forward, command.lateral});
  }
};

/// Where each variable of the stacked control vector lives and which
/// foothold feeds each stance slot.
struct OcpStructure {
  struct Slot {
    int leg = 0;
    int weight_index = 0;  // flat index of w
    int foothold = -1;     // index into footholds, -1 when frozen
  };
  struct Step {
    int h_ddot_index = 0;
    std::vector<Slot> slots;
  };
  std::vector<Step> steps;
  std::vector<Footfall> footfalls;
  /// Grid index whose base position anchors the nominal foothold of each touchdown.
  std::vector<int> nominal_anchor;
  /// Extra xy offset for anchors past the horizon end.
  std::vector<Vec2> nominal_extrapolation;
  /// Mid-stance time of each touchdown, relative to the horizon start.
  std::vector<double> nominal_time;
  int foothold_offset = 0;
  int size = 0;
  int weight_count = 0;
  /// Foothold heights are pinned to the ground; only xy are decision variables.
  double ground_height = 0.0;

  int foothold_index(int j) const { return foothold_offset + 2 * j; }
};

OcpStructure analyze(const OcpProblem& problem);

struct StackedControl {
  std::vector<double> h_ddot;                // N
  std::vector<std::vector<double>> weights;  // N x (stance legs at k, leg order)
  std::vector<Vec3> footholds;               // N_f, footfall order; z sits on the ground

  bool operator==(const StackedControl&) const = default;
};

VecX pack(const OcpStructure& layout, const StackedControl& u);
StackedControl unpack(const OcpStructure& layout, const VecX& flat);
/// Throws InvalidParameter when dimensions disagree with the layout.
void check_dimensions(const OcpStructure& layout, const StackedControl& u);

struct StackedState {
  std::vector<Vec3> r;  // r_1 .. r_N
};

/// Support set used at step k.
SupportSet support_at(const OcpProblem& problem, const OcpStructure& layout, const StackedControl& u, int k);

StackedState rollout(const OcpProblem& problem, const StackedControl& u);

struct CostBreakdown {
  double velocity = 0.0;
  double height = 0.0;
  double foothold = 0.0;
  double input = 0.0;
  double penalty = 0.0;
  double total() const { return velocity + height + foothold + input + penalty; }
};

double evaluate_cost(const OcpProblem& problem, const StackedControl& u, const OcpWeights& weights,
                     const SolverOptions& options = {});
CostBreakdown cost_breakdown(const OcpProblem& problem, const StackedControl& u, const OcpWeights& weights,
                             const SolverOptions& options = {});
/// Gradient of evaluate_cost in pack() order.
VecX cost_gradient(const OcpProblem& problem, const StackedControl& u, const OcpWeights& weights,
                   const SolverOptions& options = {});

struct SolveReport {
  int iterations = 0;
  int outer_iterations = 0;
  double final_cost = 0.0;
  /// inf-norm of the gradient of the objective the last inner loop minimized
  double gradient_norm = 0.0;
  double max_weight_sum_violation = 0.0;
  double min_weight = 0.0;
  bool converged = false;
  bool stalled = false;
  int rejected_steps = 0;
  /// Objective value of every accepted iterate, with the multiplier phase it belongs to.
  std::vector<double> cost_trace;
  std::vector<int> trace_phase;
  double wall_time = 0.0;  // seconds
};

struct OcpSolution {
  StackedControl u;
  StackedState x;
  SolveReport report;
};

StackedControl default_initial_guess(const OcpProblem& problem);

/// Map a solution of a previous horizon onto a new problem whose horizon
/// starts later. Falls back to default_initial_guess() entries where nothing matches.
StackedControl shift_warm_start(const OcpProblem& previous, const StackedControl& previous_u,
                                const OcpProblem& next);

OcpSolution solve_ocp(const OcpProblem& problem, const OcpWeights& weights,
                      const std::optional<StackedControl>& init = std::nullopt,
                      const SolverOptions& options = {});

/// Base xy position after k steps of pure command integration from r0.
Vec2 command_path(const OcpProblem& problem, int k);

}  // namespace locomimic
