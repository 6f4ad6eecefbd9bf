#pragma once

// Reference motion assembly: base trajectories from the optimal control
// solution (or pure command integration for the kinematic baseline), foot
// trajectories from footholds and swing arcs, the on-demand frame queue, and
// terrain height adjustment.

#include "locomimic/gait_schedule.hpp"
#include "locomimic/heightfield.hpp"
#include "locomimic/ocp.hpp"

#include <deque>
#include <optional>
#include <vector>

namespace locomimic {

struct ReferenceFrame {
  double time = 0.0;
  Vec3 base_position = Vec3::Zero();
  Vec3 base_velocity = Vec3::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
  PerLeg<Vec3> feet{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  PerLeg<bool> contact{};
  PerLeg<double> phase{};

  bool operator==(const ReferenceFrame&) const = default;
};

struct GenerationConfig {
  double frame_rate = 50.0;     // Hz
  double solver_dt = 0.025;     // s
  double horizon_periods = 2.0; // default horizon in gait periods
  /// Extra solver horizon past the streamed frames, in gait periods. The tail
  /// of a plan has no terminal cost, so the generator does not emit it.
  double lookahead_periods = 1.0;
  double target_height = 0.32;  // m
  double swing_height = 0.08;   // m
  double raibert_gain = 0.03;
  PerLeg<Vec2> hip_offsets{Vec2{0.19, 0.13}, Vec2{0.19, -0.13}, Vec2{-0.19, 0.13}, Vec2{-0.19, -0.13}};
  OcpWeights weights;
  SolverOptions solver;
  GravityVector gravity;
  double terrain_time_constant = 0.2;  // s, base offset low-pass
  /// Queue refill threshold in gait periods.
  double queue_threshold_periods = 0.5;
};

/// Where a motion starts: CoM state, heading, and the feet.
struct MotionStart {
  double time = 0.0;
  Vec3 r{0.0, 0.0, 0.32};
  Vec3 v = Vec3::Zero();
  double yaw = 0.0;
  PerLeg<Vec3> feet{};
  /// Last stance position of legs that are mid-swing at `time`, when known.
  PerLeg<std::optional<Vec3>> liftoff;
  double ground = 0.0;  // flat ground height the plan is made on

  /// Standing start with every foot under its hip at ground height.
  static MotionStart standing(const GenerationConfig& cfg, double time = 0.0, double ground = 0.0);
  /// Ground is taken from the lowest stance foot (lowest foot in flight).
  static MotionStart from_frame(const ReferenceFrame& frame);
};

struct ReferenceMotion {
  std::vector<ReferenceFrame> frames;
  OcpProblem problem;
  OcpSolution solution;
  bool degraded = false;  // solver did not report convergence
};

OcpProblem make_problem(const MotionStart& start, const VelocityCommand& command, const GaitPattern& gait,
                        double horizon, const GenerationConfig& cfg, double ground = 0.0);

/// Frames at the configured rate over [start.time, start.time + horizon),
/// beginning with frame index `first_frame`.
ReferenceMotion generate_reference(const MotionStart& start, const VelocityCommand& command, const GaitPattern& gait,
                                   double horizon, const GenerationConfig& cfg,
                                   const std::optional<StackedControl>& warm_start = std::nullopt,
                                   int first_frame = 0);

/// Swing foot position. xy follows a smoothstep of progress; z adds a sin^2
/// bump peaking at max(start_z, end_z) + apex_height at mid-swing.
Vec3 swing_trajectory(const Vec3& start, const Vec3& end, double progress, double apex_height,
                      const HeightField* terrain = nullptr);

/// hip + 0.5 * stance_duration * command + gain * (velocity - command), z from hip_nominal.
Vec3 raibert_foothold(const Vec3& hip_nominal, const Vec3& base_velocity, const Vec3& command_velocity,
                      double stance_duration, double gain);

/// Command-integrated base at constant height with rule-based footholds.
std::vector<ReferenceFrame> kinematic_baseline(const MotionStart& start, const VelocityCommand& command,
                                               const GaitPattern& gait, double horizon,
                                               const GenerationConfig& cfg, int first_frame = 0);

std::vector<ReferenceFrame> adjust_for_terrain(const std::vector<ReferenceFrame>& frames, const HeightField& terrain,
                                               double time_constant = 0.2);

/// Frames waiting for the consumer. Single producer, single consumer.
class MotionQueue {
 public:
  explicit MotionQueue(std::size_t threshold = 1) : threshold_(threshold) {}

  bool empty() const { return frames_.empty(); }
  std::size_t size() const { return frames_.size(); }
  std::size_t threshold() const { return threshold_; }
  bool needs_refill() const { return frames_.size() < threshold_; }

  const ReferenceFrame& front() const { return frames_.front(); }
  const ReferenceFrame& back() const { return frames_.back(); }
  const ReferenceFrame& at(std::size_t i) const { return frames_.at(i); }
  ReferenceFrame pop();
  /// Throws InvalidParameter unless frame times stay strictly increasing.
  void append(const std::vector<ReferenceFrame>& frames);

 private:
  std::deque<ReferenceFrame> frames_;
  std::size_t threshold_;
};

enum class ReferenceSource { Optimal, Kinematic };

/// On-demand producer that continues from the last queued frame.
class ReferenceGenerator {
 public:
  ReferenceGenerator(GaitPattern gait, VelocityCommand command, GenerationConfig cfg,
                     ReferenceSource source = ReferenceSource::Optimal);

  void set_command(const VelocityCommand& command) { command_ = command; }
  void set_terrain(std::optional<HeightField> terrain) { terrain_ = std::move(terrain); }
  const GaitPattern& gait() const { return gait_; }
  const GenerationConfig& config() const { return cfg_; }
  double horizon() const { return cfg_.horizon_periods * gait_.period; }
  std::size_t default_threshold() const;
  const std::vector<SolveReport>& reports() const { return reports_; }

  /// First horizon of frames (frame 0 at start.time).
  std::vector<ReferenceFrame> begin(const MotionStart& start);
  /// Frames continuing after `last` (excluding it).
  std::vector<ReferenceFrame> continue_from(const ReferenceFrame& last);

 private:
  std::vector<ReferenceFrame> produce(const MotionStart& start, int first_frame);
  void remember_liftoffs(const std::vector<ReferenceFrame>& frames);

  GaitPattern gait_;
  VelocityCommand command_;
  GenerationConfig cfg_;
  ReferenceSource source_;
  std::optional<HeightField> terrain_;
  PerLeg<std::optional<Vec3>> liftoff_;
  std::vector<SolveReport> reports_;
  std::optional<ReferenceFrame> raw_tail_;
  std::optional<double> ground_;
  std::optional<double> terrain_filter_;
  std::optional<OcpProblem> last_problem_;
  std::optional<StackedControl> last_control_;
};

/// Append one horizon continuing from the queue tail. On generator failure
/// the queue is left untouched and the error propagates.
void queue_refill(MotionQueue& queue, ReferenceGenerator& generator);

/// Pop the next frame, refilling first when the queue is below threshold.
ReferenceFrame next_frame(MotionQueue& queue, ReferenceGenerator& generator);

}  // namespace locomimic
