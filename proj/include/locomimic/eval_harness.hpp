#pragma once

// Closed-loop checks on a pendulum plant: receding-horizon runs with
// disturbances, domain-randomization samplers and tracking metrics.

#include "locomimic/heightfield.hpp"
#include "locomimic/imitation.hpp"
#include "locomimic/motion_synthesis.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace locomimic {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

struct RandomizationConfig {
  Range linear_impulse{-1.5, 1.5};   // m/s per axis
  Range angular_impulse{-1.5, 1.5};  // rad/s per axis
  Range friction{0.5, 1.25};
  Range perlin_frequency{0.0, 0.9};
  Range perlin_magnitude{0.0, 0.1};  // m
  double gravity_cone_deg = 10.0;    // half-angle around -z
  double actuator_latency = 0.03;    // s

  /// Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const RandomizationConfig&) const = default;
};

struct RandomizationDraw {
  Vec3 linear_impulse = Vec3::Zero();
  Vec3 angular_impulse = Vec3::Zero();
  double friction = 1.0;
  double perlin_frequency = 0.0;
  double perlin_magnitude = 0.0;
  std::uint64_t terrain_seed = 0;
  Vec3 gravity_direction{0.0, 0.0, -1.0};
  double latency = 0.0;
};

RandomizationDraw sample_randomization(const RandomizationConfig& cfg, std::mt19937_64& rng);

/// Direction uniform over the spherical cap of the given half-angle around -z.
Vec3 sample_gravity_cone(double half_angle, std::mt19937_64& rng);
/// Mean angle to the cap axis of the uniform cap distribution.
double cone_mean_angle(double half_angle);

/// 2D gradient noise scaled to [0, magnitude]. Frequency is in cycles per metre.
/// With enforce_ranges the paper ranges are checked (InvalidParameter).
HeightField perlin_heightfield(double frequency, double magnitude, std::uint64_t seed, const Vec2& extent,
                               double resolution, const Vec2& origin = Vec2::Zero(), bool enforce_ranges = true);

/// One plant step: the impulse is added to the velocity, then the pendulum
/// recurrence advances with r_prev = r - v dt.
PendulumState plant_step(const PendulumState& state, const ControlInput& u, const SupportSet& support,
                         const std::optional<Vec3>& impulse, double dt, const GravityVector& gravity = {});

/// Plant that keeps the previous position so undisturbed runs reproduce
/// rollout() bit for bit.
class PendulumPlant {
 public:
  PendulumPlant(const Vec3& r, const Vec3& v, double dt, GravityVector gravity = {});
  void apply_impulse(const Vec3& dv);
  void step(const ControlInput& u, const SupportSet& support);
  const Vec3& position() const { return r_; }
  const Vec3& previous_position() const { return r_prev_; }
  Vec3 velocity() const { return (r_ - r_prev_) / dt_; }
  PendulumState state() const { return {r_, velocity()}; }
  double dt() const { return dt_; }

 private:
  Vec3 r_prev_, r_;
  double dt_;
  GravityVector gravity_;
};

struct Disturbance {
  double time = 0.0;
  Vec3 linear = Vec3::Zero();   // m/s, applied to the CoM velocity
  Vec3 angular = Vec3::Zero();  // rad/s, logged only
};

struct HarnessConfig {
  GenerationConfig generation;
  RewardConfig reward;
  double control_dt = 0.02;  // replanning period
  double latency = 0.0;      // s of input delay, 0 disables the buffer
};

struct RunStep {
  double time = 0.0;
  PendulumState state;  // before the step
  ControlInput input;   // applied
  PerLeg<Vec3> feet;
  PerLeg<bool> contact{};
  ReferenceFrame reference;  // nominal reference at this time
  Vec3 impulse = Vec3::Zero();
  Vec3 angular_impulse = Vec3::Zero();
  RewardBreakdown reward;
  int solver_iterations = 0;
  double solver_cost = 0.0;
  bool degraded = false;
};

struct RunLog {
  double dt = 0.02;
  VelocityCommand command;
  std::string gait;
  double target_height = 0.32;
  std::vector<RunStep> steps;
  std::vector<Disturbance> disturbances;  // as applied (times snapped to steps)
  bool singularity = false;
  std::string error;
};

RunLog receding_horizon_run(const VelocityCommand& command, const GaitPattern& gait, double duration,
                            const std::vector<Disturbance>& disturbances, const HarnessConfig& cfg);

struct TrackingOptions {
  double velocity_threshold = 0.05;  // m/s, recovery criterion
  double skip = 0.0;                 // s excluded from the mean/max velocity error
};

struct TrackingReport {
  double mean_velocity_error = 0.0;
  double max_velocity_error = 0.0;
  double height_rmse = 0.0;
  /// Per disturbance: time until the velocity error stays below threshold; -1 if never.
  std::vector<double> recovery_times;
  RewardBreakdown mean_reward;
  // Plot series.
  std::vector<double> time, forward_velocity, base_height, foot_height;
};

TrackingReport tracking_metrics(const RunLog& log, const VelocityCommand& command, const TrackingOptions& options = {});

/// Mean horizontal velocity of the log over the whole gait periods after `from`.
Vec2 mean_velocity_over_periods(const RunLog& log, double period, double from = 0.0);

}  // namespace locomimic
