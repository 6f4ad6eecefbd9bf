#include "locomimic/imitation.hpp"

#include <cmath>

namespace locomimic {

namespace {

void require_positive(double value, const char* key) {
  if (!(value > 0.0)) throw ConfigError(std::string("sensitivity ") + key + " must be > 0");
}

double exp_map(double scaled_squared_norm) { return std::exp(-scaled_squared_norm); }

}  // namespace

void RobotSnapshot::validate() const {
  if (std::abs(gravity_body.norm() - 1.0) > 1e-9) throw InvalidParameter("gravity direction must be a unit vector");
}

void RewardConfig::validate() const {
  require_positive(base_height, "base_height");
  for (int i = 0; i < 3; ++i) require_positive(base_velocity[i], "base_velocity");
  require_positive(yaw_rate, "yaw_rate");
  for (int i = 0; i < 3; ++i) require_positive(feet_position[i], "feet_position");
  require_positive(action_rate, "action_rate");
  require_positive(feet_slip, "feet_slip");
  require_positive(pitch_roll, "pitch_roll");
  if (!(min_base_height >= 0.0)) throw ConfigError("min_base_height must be >= 0");
  if (!(max_tilt > 0.0)) throw ConfigError("max_tilt must be > 0");
}

double reward_term(double reference, double actual, double sensitivity) {
  require_positive(sensitivity, "sigma");
  const double e = (reference - actual) / sensitivity;
  return exp_map(e * e);
}

double reward_term(const VecX& reference, const VecX& actual, const VecX& sensitivity) {
  if (reference.size() != actual.size() || reference.size() != sensitivity.size())
    throw InvalidParameter("reward term dimensions differ");
  for (Eigen::Index i = 0; i < sensitivity.size(); ++i) require_positive(sensitivity[i], "sigma");
  return exp_map(((reference - actual).array() / sensitivity.array()).matrix().squaredNorm());
}

double reward_term(const VecX& reference, const VecX& actual, double sensitivity) {
  if (reference.size() != actual.size()) throw InvalidParameter("reward term dimensions differ");
  require_positive(sensitivity, "sigma");
  return exp_map(((reference - actual) / sensitivity).squaredNorm());
}

Vec3 to_forward_vertical_sideways(const Vec3& world, double yaw) {
  const Vec2 xy = rotate2(-yaw, world.head<2>());
  return {xy.x(), world.z(), xy.y()};
}

PerLeg<Vec3> feet_frame_transform(const Vec3& base_position, double yaw, const PerLeg<Vec3>& feet) {
  PerLeg<Vec3> out;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec2 xy = rotate2(-yaw, feet[leg].head<2>() - base_position.head<2>());
    out[leg] = Vec3(xy.x(), xy.y(), feet[leg].z());
  }
  return out;
}

const std::vector<std::string>& reward_columns() {
  static const std::vector<std::string> names = {"height",      "velocity", "yaw_rate",   "feet",
                                                 "action_rate", "slip",     "pitch_roll", "imitation",
                                                 "regularizer", "total"};
  return names;
}

RewardBreakdown imitation_terms(const RobotSnapshot& s, const ReferenceFrame& ref, const RewardConfig& cfg) {
  RewardBreakdown b;
  b.height = reward_term(ref.base_position.z(), s.base_height(), cfg.base_height);
  b.velocity = reward_term(to_forward_vertical_sideways(ref.base_velocity, ref.yaw),
                           to_forward_vertical_sideways(s.linear_velocity, s.yaw), cfg.base_velocity);
  b.yaw_rate = reward_term(ref.yaw_rate, s.yaw_rate, cfg.yaw_rate);

  const auto ref_feet = feet_frame_transform(ref.base_position, ref.yaw, ref.feet);
  const auto feet = feet_frame_transform(s.base_position, s.yaw, s.feet);
  VecX a(3 * kNumLegs), x(3 * kNumLegs), sigma(3 * kNumLegs);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    a.segment<3>(3 * leg) << ref_feet[leg].x(), ref_feet[leg].z(), ref_feet[leg].y();
    x.segment<3>(3 * leg) << feet[leg].x(), feet[leg].z(), feet[leg].y();
    sigma.segment<3>(3 * leg) = cfg.feet_position;
  }
  b.feet = reward_term(a, x, sigma);
  return b;
}

double imitation_reward(const RobotSnapshot& s, const ReferenceFrame& ref, const RewardConfig& cfg) {
  return imitation_terms(s, ref, cfg).imitation();
}

RewardBreakdown regularizer_terms(const RobotSnapshot& s, const Vec12& action, const Vec12& previous_action,
                                  const RewardConfig& cfg) {
  RewardBreakdown b;
  b.action_rate = reward_term(VecX(action), VecX(previous_action), cfg.action_rate);
  VecX slip(2 * kNumLegs);
  int n = 0;
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (s.contact[leg]) {
      slip.segment<2>(n) = s.foot_velocities[leg].head<2>();
      n += 2;
    }
  // No feet on the ground: nothing can slip.
  b.slip = n == 0 ? 1.0 : reward_term(VecX::Zero(n), VecX(slip.head(n)), cfg.feet_slip);
  b.pitch_roll = reward_term(VecX(Vec2(0.0, 0.0)), VecX(Vec2(s.pitch, s.roll)), cfg.pitch_roll);
  return b;
}

double regularizer(const RobotSnapshot& s, const Vec12& action, const Vec12& previous_action, const RewardConfig& cfg) {
  return regularizer_terms(s, action, previous_action, cfg).regularizer();
}

RewardBreakdown reward_breakdown(const RobotSnapshot& s, const ReferenceFrame& ref, const Vec12& action,
                                 const Vec12& previous_action, const RewardConfig& cfg) {
  RewardBreakdown b = imitation_terms(s, ref, cfg);
  const RewardBreakdown r = regularizer_terms(s, action, previous_action, cfg);
  b.action_rate = r.action_rate;
  b.slip = r.slip;
  b.pitch_roll = r.pitch_roll;
  return b;
}

double total_reward(const RobotSnapshot& s, const ReferenceFrame& ref, const Vec12& action,
                    const Vec12& previous_action, const RewardConfig& cfg) {
  return reward_breakdown(s, ref, action, previous_action, cfg).total();
}

ObservationLayout::ObservationLayout(bool perceptive) : perceptive_(perceptive) {
  const std::vector<std::pair<const char*, int>> order = {
      {"base_height", 1},     {"gravity", 3},          {"linear_velocity", 3}, {"angular_velocity", 3},
      {"joint_positions", 12}, {"joint_velocities", 12}, {"phase", 8},         {"command", 3},
      {"previous_action", 12}};
  for (const auto& [name, size] : order) {
    blocks_.push_back({name, size_, size});
    size_ += size;
  }
  if (perceptive_) {
    blocks_.push_back({"height_scan", size_, kScanSize});
    size_ += kScanSize;
  }
}

const ObservationLayout::Block& ObservationLayout::block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw LayoutError("observation has no block named " + name);
}

VecX ObservationLayout::slice(const VecX& observation, const std::string& name) const {
  if (observation.size() != size_) throw LayoutError("observation length does not match the layout");
  const Block& b = block(name);
  return observation.segment(b.offset, b.size);
}

Mat3 body_rotation(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

VecX build_observation(const RobotSnapshot& s, const PerLeg<LegPhase>& phases, const VelocityCommand& command,
                       const ObservationLayout& layout, const VecX& height_scan) {
  if (layout.perceptive() && height_scan.size() != ObservationLayout::kScanSize)
    throw LayoutError("perceptive observation needs a 7x11 height scan");
  if (!layout.perceptive() && height_scan.size() != 0)
    throw LayoutError("blind observation takes no height scan");
  VecX obs(layout.size());
  int i = 0;
  auto put = [&](const auto& v) {
    obs.segment(i, v.size()) = v;
    i += static_cast<int>(v.size());
  };
  obs[i++] = s.base_height();
  put(s.gravity_body);
  put(Vec3(body_rotation(s.yaw, s.pitch, s.roll).transpose() * s.linear_velocity));
  put(s.angular_velocity);
  put(s.joint_positions);
  put(s.joint_velocities);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    obs[i++] = phases[leg].sin;
    obs[i++] = phases[leg].cos;
  }
  put(Vec3(command.forward, command.lateral, command.yaw_rate));
  put(s.previous_action);
  if (layout.perceptive()) put(height_scan);
  return obs;
}

ReferenceFrame episode_init(const MotionQueue& queue, std::mt19937_64& rng) {
  if (queue.empty()) throw InvalidParameter("cannot initialize an episode from an empty motion queue");
  std::uniform_int_distribution<std::size_t> pick(0, queue.size() - 1);
  return queue.at(pick(rng));
}

Termination check_termination(const RobotSnapshot& s, const RewardConfig& cfg, double ground_height) {
  if (s.base_height() - ground_height < cfg.min_base_height) return Termination::Terminated;
  if (std::abs(s.pitch) > cfg.max_tilt || std::abs(s.roll) > cfg.max_tilt) return Termination::Terminated;
  if (s.body_contact) return Termination::Terminated;
  return Termination::Continue;
}

}  // namespace locomimic
