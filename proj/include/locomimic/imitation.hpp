#pragma once

// Imitation reward, observation layout, reference-state initialization and
// termination for policies trained against the reference motions.

#include "locomimic/gait_schedule.hpp"
#include "locomimic/motion_synthesis.hpp"

#include <random>
#include <string>
#include <vector>

namespace locomimic {

using Vec12 = Eigen::Matrix<double, 12, 1>;

struct RobotSnapshot {
  /// World position of the base; base height h is its z.
  Vec3 base_position{0.0, 0.0, 0.32};
  double yaw = 0.0;
  /// Unit gravity direction in the body frame.
  Vec3 gravity_body{0.0, 0.0, -1.0};
  Vec3 linear_velocity = Vec3::Zero();   // world frame, m/s
  Vec3 angular_velocity = Vec3::Zero();  // body frame, rad/s
  double yaw_rate = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  Vec12 joint_positions = Vec12::Zero();
  Vec12 joint_velocities = Vec12::Zero();
  PerLeg<Vec3> feet{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  PerLeg<bool> contact{};
  PerLeg<Vec3> foot_velocities{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  Vec12 previous_action = Vec12::Zero();
  /// A body part other than a foot touches the ground.
  bool body_contact = false;

  double base_height() const { return base_position.z(); }
  /// Throws InvalidParameter unless gravity_body is unit length within 1e-9.
  void validate() const;
};

/// Reward sensitivities. Vector entries are (forward, vertical, sideways).
struct RewardConfig {
  double base_height = 0.05;
  Vec3 base_velocity{0.3, 0.1, 0.3};
  double yaw_rate = 0.5;
  Vec3 feet_position{0.15, 0.025, 0.15};
  double action_rate = 1.5;
  double feet_slip = 0.1;
  double pitch_roll = 0.5;
  // Collapse thresholds.
  double min_base_height = 0.15;  // m above ground
  double max_tilt = 1.0;          // rad, |pitch| or |roll|

  /// Throws ConfigError naming the first non-positive sensitivity.
  void validate() const;
  bool operator==(const RewardConfig&) const = default;
};

/// exp(-((reference - actual) / sensitivity)^2). Throws ConfigError if sensitivity <= 0.
double reward_term(double reference, double actual, double sensitivity);
/// exp(-||(reference - actual) ./ sensitivity||^2).
double reward_term(const VecX& reference, const VecX& actual, const VecX& sensitivity);
double reward_term(const VecX& reference, const VecX& actual, double sensitivity);

/// World vector expressed in the yaw frame and reordered to (forward, vertical, sideways).
Vec3 to_forward_vertical_sideways(const Vec3& world, double yaw);

/// Foot positions relative to the ground-projected base, rotated by -yaw.
PerLeg<Vec3> feet_frame_transform(const Vec3& base_position, double yaw, const PerLeg<Vec3>& feet);

struct RewardBreakdown {
  double height = 1.0;
  double velocity = 1.0;
  double yaw_rate = 1.0;
  double feet = 1.0;
  double action_rate = 1.0;
  double slip = 1.0;
  double pitch_roll = 1.0;

  double imitation() const { return height * velocity * yaw_rate * feet; }
  double regularizer() const { return action_rate * slip * pitch_roll; }
  double total() const { return imitation() * regularizer(); }
};

/// Column names matching RewardBreakdown, then imitation, regularizer, total.
const std::vector<std::string>& reward_columns();

RewardBreakdown imitation_terms(const RobotSnapshot& s, const ReferenceFrame& ref, const RewardConfig& cfg);
double imitation_reward(const RobotSnapshot& s, const ReferenceFrame& ref, const RewardConfig& cfg);
/// Action rate, feet slip and pitch-roll factors (imitation factors left at 1).
RewardBreakdown regularizer_terms(const RobotSnapshot& s, const Vec12& action, const Vec12& previous_action,
                                  const RewardConfig& cfg);
double regularizer(const RobotSnapshot& s, const Vec12& action, const Vec12& previous_action, const RewardConfig& cfg);
RewardBreakdown reward_breakdown(const RobotSnapshot& s, const ReferenceFrame& ref, const Vec12& action,
                                 const Vec12& previous_action, const RewardConfig& cfg);
double total_reward(const RobotSnapshot& s, const ReferenceFrame& ref, const Vec12& action,
                    const Vec12& previous_action, const RewardConfig& cfg);

/// Fixed observation block order; the height scan is appended in perceptive mode.
class ObservationLayout {
 public:
  struct Block {
    std::string name;
    int offset = 0;
    int size = 0;
  };
  static constexpr int kScanRows = 7;
  static constexpr int kScanCols = 11;
  static constexpr int kScanSize = kScanRows * kScanCols;

  explicit ObservationLayout(bool perceptive = false);

  bool perceptive() const { return perceptive_; }
  int size() const { return size_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  /// Throws LayoutError for an unknown block.
  const Block& block(const std::string& name) const;
  VecX slice(const VecX& observation, const std::string& name) const;

 private:
  bool perceptive_;
  std::vector<Block> blocks_;
  int size_ = 0;
};

/// Body frame rotation from yaw, pitch (about y) and roll (about x).
Mat3 body_rotation(double yaw, double pitch, double roll);

/// Throws LayoutError when the height scan does not match the layout.
VecX build_observation(const RobotSnapshot& s, const PerLeg<LegPhase>& phases, const VelocityCommand& command,
                       const ObservationLayout& layout, const VecX& height_scan = VecX());

/// Uniformly chosen queued frame to initialize an episode from. Throws InvalidParameter on an empty queue.
ReferenceFrame episode_init(const MotionQueue& queue, std::mt19937_64& rng);

enum class Termination { Continue, Terminated };

Termination check_termination(const RobotSnapshot& s, const RewardConfig& cfg, double ground_height = 0.0);

}  // namespace locomimic
