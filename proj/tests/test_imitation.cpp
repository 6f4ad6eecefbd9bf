#include <doctest.h>

#include "locomimic/imitation.hpp"

#include <cmath>
#include <numbers>

using namespace locomimic;

namespace {

const double kE1 = std::exp(-1.0);

ReferenceFrame nominal_frame() {
  ReferenceFrame f;
  f.base_position = Vec3(0.0, 0.0, 0.32);
  f.base_velocity = Vec3(0.5, 0.0, 0.0);
  const GenerationConfig cfg;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    f.feet[leg] = Vec3(cfg.hip_offsets[leg].x(), cfg.hip_offsets[leg].y(), 0.0);
    f.contact[leg] = true;
  }
  return f;
}

RobotSnapshot matching(const ReferenceFrame& f) {
  RobotSnapshot s;
  s.base_position = f.base_position;
  s.yaw = f.yaw;
  s.linear_velocity = f.base_velocity;
  s.yaw_rate = f.yaw_rate;
  s.feet = f.feet;
  s.contact = f.contact;
  return s;
}

}  // namespace

TEST_CASE("reward_term") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0), pos(0.01, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng);
    CHECK(reward_term(x, x, pos(rng)) == 1.0);
  }
  CHECK(std::abs(reward_term(0.32, 0.27, 0.05) - kE1) <= 1e-12);
  CHECK(reward_term(0.32, 0.27, 0.05) == doctest::Approx(0.367879).epsilon(1e-6));
  const VecX zero = VecX::Zero(3), sigma = Vec3(0.3, 0.1, 0.3);
  CHECK(std::abs(reward_term(zero, Vec3(0.3, 0, 0), sigma) - kE1) <= 1e-12);
  CHECK(std::abs(reward_term(zero, Vec3(0, 0.1, 0), sigma) - kE1) <= 1e-12);
  CHECK_THROWS_AS(reward_term(0.0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(reward_term(0.0, 1.0, -0.1), ConfigError);
  // Strictly decreasing in the error.
  double prev = 1.0;
  for (int i = 1; i <= 50; ++i) {
    const double r = reward_term(0.0, 0.01 * i, 0.1);
    CHECK(r < prev);
    CHECK(r > 0.0);
    prev = r;
  }
}

TEST_CASE("feet_frame_transform") {
  const PerLeg<Vec3> feet{Vec3(1, 2, 0), Vec3(-1, 0.5, 0.1), Vec3(0, 0, 0), Vec3(3, -1, 0.2)};
  const auto same = feet_frame_transform(Vec3::Zero(), 0.0, feet);
  for (int leg = 0; leg < kNumLegs; ++leg) CHECK(same[leg] == feet[leg]);
  const Vec3 base(0.4, -0.3, 0.32);
  const PerLeg<Vec3> one{base + Vec3(1, 0, 0), base, base, base};
  const auto rotated = feet_frame_transform(base, std::numbers::pi / 2, one);
  CHECK((rotated[0] - Vec3(0, -1, base.z())).norm() < 1e-15);
  // Ground projection keeps foot heights; translating everything changes nothing.
  const Vec3 shift(2.0, -5.0, 0.0);
  PerLeg<Vec3> moved = feet;
  for (auto& f : moved) f += shift;
  const auto a = feet_frame_transform(base, 0.7, feet), b = feet_frame_transform(base + shift, 0.7, moved);
  for (int leg = 0; leg < kNumLegs; ++leg) CHECK((a[leg] - b[leg]).norm() < 1e-14);
}

TEST_CASE("every Table I term gives exp(-1) at one sensitivity unit") {
  const RewardConfig cfg;
  const ReferenceFrame ref = nominal_frame();
  const Vec12 a = Vec12::Zero();
  CHECK(total_reward(matching(ref), ref, a, a, cfg) == 1.0);

  RobotSnapshot s = matching(ref);
  s.base_position.z() -= 0.05;
  auto b = reward_breakdown(s, ref, a, a, cfg);
  CHECK(std::abs(b.height - kE1) <= 1e-12);
  CHECK(std::abs(b.total() - kE1) <= 1e-12);

  s = matching(ref);
  s.linear_velocity.x() += 0.3;
  CHECK(std::abs(reward_breakdown(s, ref, a, a, cfg).velocity - kE1) <= 1e-12);
  s = matching(ref);
  s.linear_velocity.z() += 0.1;
  CHECK(std::abs(reward_breakdown(s, ref, a, a, cfg).velocity - kE1) <= 1e-12);
  s = matching(ref);
  s.linear_velocity.y() += 0.3;
  CHECK(std::abs(reward_breakdown(s, ref, a, a, cfg).velocity - kE1) <= 1e-12);

  s = matching(ref);
  s.yaw_rate += 0.5;
  CHECK(std::abs(reward_breakdown(s, ref, a, a, cfg).yaw_rate - kE1) <= 1e-12);

  for (int axis = 0; axis < 3; ++axis) {
    s = matching(ref);
    const double unit[3] = {0.15, 0.15, 0.025};  // world x, y, z
    s.feet[2][axis] += unit[axis];
    CHECK(std::abs(reward_breakdown(s, ref, a, a, cfg).feet - kE1) <= 1e-12);
  }

  Vec12 act = Vec12::Zero();
  act[4] = 1.5;
  CHECK(std::abs(reward_breakdown(matching(ref), ref, act, a, cfg).action_rate - kE1) <= 1e-12);

  s = matching(ref);
  s.foot_velocities[1] = Vec3(0.1, 0.0, 0.0);
  CHECK(std::abs(reward_breakdown(s, ref, a, a, cfg).slip - kE1) <= 1e-12);
  s.contact = {false, false, false, false};
  s.foot_velocities = {Vec3(5, 5, 5), Vec3(1, 0, 0), Vec3(0, 3, 0), Vec3(2, 2, 0)};
  CHECK(regularizer_terms(s, a, a, cfg).slip == 1.0);

  s = matching(ref);
  s.pitch = 0.5;
  CHECK(std::abs(reward_breakdown(s, ref, a, a, cfg).pitch_roll - kE1) <= 1e-12);
  s.pitch = 0.0;
  s.roll = -0.5;
  CHECK(std::abs(regularizer(s, a, a, cfg) - kE1) <= 1e-12);
}

TEST_CASE("reward is invariant to a common translation and yaw rotation") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const RewardConfig cfg;
  for (int i = 0; i < 20; ++i) {
    ReferenceFrame ref = nominal_frame();
    ref.base_velocity = Vec3(u(rng), u(rng), 0.2 * u(rng));
    ref.yaw_rate = u(rng);
    RobotSnapshot s = matching(ref);
    s.base_position += Vec3(0.05 * u(rng), 0.05 * u(rng), 0.03 * u(rng));
    s.linear_velocity += Vec3(0.2 * u(rng), 0.1 * u(rng), 0.2 * u(rng));
    s.yaw = 0.3 * u(rng);
    s.yaw_rate += 0.3 * u(rng);
    s.pitch = 0.2 * u(rng);
    s.roll = 0.2 * u(rng);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      s.feet[leg] += Vec3(0.05 * u(rng), 0.05 * u(rng), 0.02 * (u(rng) + 1));
      s.foot_velocities[leg] = Vec3(0.1 * u(rng), 0.1 * u(rng), 0.0);
    }
    s.contact = {true, false, false, true};
    const Vec12 act = Vec12::Random(), prev = Vec12::Random();
    const double r0 = total_reward(s, ref, act, prev, cfg);
    CHECK(r0 > 0.0);
    CHECK(r0 < 1.0);

    const double psi = std::numbers::pi * u(rng);
    const Vec3 t(10 * u(rng), 10 * u(rng), u(rng));
    const Mat3 R = yaw_rotation(psi);
    ReferenceFrame ref2 = ref;
    RobotSnapshot s2 = s;
    ref2.base_position = R * ref.base_position + t;
    ref2.base_velocity = R * ref.base_velocity;
    ref2.yaw += psi;
    s2.base_position = R * s.base_position + t;
    s2.linear_velocity = R * s.linear_velocity;
    s2.yaw += psi;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      ref2.feet[leg] = R * ref.feet[leg] + t;
      s2.feet[leg] = R * s.feet[leg] + t;
      s2.foot_velocities[leg] = R * s.foot_velocities[leg];
    }
    CHECK(std::abs(total_reward(s2, ref2, act, prev, cfg) - r0) <= 1e-9);
  }
}

TEST_CASE("doubled sensitivities never lower the reward") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const RewardConfig cfg;
  RewardConfig wide = cfg;
  wide.base_height *= 2;
  wide.base_velocity *= 2;
  wide.yaw_rate *= 2;
  wide.feet_position *= 2;
  wide.action_rate *= 2;
  wide.feet_slip *= 2;
  wide.pitch_roll *= 2;
  for (int i = 0; i < 50; ++i) {
    const ReferenceFrame ref = nominal_frame();
    RobotSnapshot s = matching(ref);
    s.base_position.z() += 0.1 * u(rng);
    s.linear_velocity += Vec3(u(rng), u(rng), u(rng)) * 0.3;
    s.yaw_rate = u(rng);
    s.pitch = 0.4 * u(rng);
    s.feet[3] += Vec3(0.1 * u(rng), 0.1 * u(rng), 0.0);
    s.foot_velocities[0] = Vec3(0.2 * u(rng), 0, 0);
    const Vec12 act = Vec12::Random();
    const double narrow = total_reward(s, ref, act, Vec12::Zero(), cfg);
    CHECK(total_reward(s, ref, act, Vec12::Zero(), wide) >= narrow);
    const auto b = reward_breakdown(s, ref, act, Vec12::Zero(), cfg);
    CHECK(b.imitation() <= std::min({b.height, b.velocity, b.yaw_rate, b.feet}));
  }
  RewardConfig bad = cfg;
  bad.feet_slip = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("observation layout") {
  const ObservationLayout blind, perceptive(true);
  CHECK(blind.size() == 57);
  CHECK(perceptive.size() == 134);
  CHECK(perceptive.block("height_scan").size == 77);
  CHECK_THROWS_AS(blind.block("height_scan"), LayoutError);

  RobotSnapshot s;
  s.base_position.z() = 0.31;
  s.linear_velocity = Vec3(0.1, 0.2, 0.3);
  s.angular_velocity = Vec3(-0.1, -0.2, -0.3);
  for (int i = 0; i < 12; ++i) {
    s.joint_positions[i] = i;
    s.joint_velocities[i] = 100 + i;
    s.previous_action[i] = 200 + i;
  }
  const GaitPattern trot = find_gait("trot");
  const auto phases = phase_variables(trot, 0.0);
  const VelocityCommand cmd{0.5, -0.1, 0.2};
  const VecX obs = build_observation(s, phases, cmd, blind);
  REQUIRE(obs.size() == 57);
  int covered = 0;
  for (const auto& b : blind.blocks()) {
    CHECK(b.offset == covered);
    covered += b.size;
  }
  CHECK(covered == 57);
  CHECK(blind.slice(obs, "base_height")[0] == 0.31);
  CHECK(blind.slice(obs, "joint_positions") == s.joint_positions);
  CHECK(blind.slice(obs, "joint_velocities") == s.joint_velocities);
  CHECK(blind.slice(obs, "previous_action") == s.previous_action);
  CHECK(blind.slice(obs, "gravity") == s.gravity_body);
  const VecX c = blind.slice(obs, "command");
  CHECK(c == Vec3(0.5, -0.1, 0.2));
  // FL and HR start stance at t = 0: phase 0 encodes as (0, 1).
  const VecX ph = blind.slice(obs, "phase");
  CHECK(ph.segment<2>(0) == Vec2(0.0, 1.0));
  CHECK(ph.segment<2>(6) == Vec2(0.0, 1.0));

  VecX scan = VecX::LinSpaced(77, 0.0, 1.0);
  const VecX pobs = build_observation(s, phases, cmd, perceptive, scan);
  CHECK(perceptive.slice(pobs, "height_scan") == scan);
  CHECK(pobs.head(57) == obs);
  CHECK_THROWS_AS(build_observation(s, phases, cmd, perceptive), LayoutError);
  CHECK_THROWS_AS(build_observation(s, phases, cmd, blind, scan), LayoutError);
}

TEST_CASE("episode_init samples queued frames uniformly") {
  MotionQueue q;
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(episode_init(q, rng), InvalidParameter);
  ReferenceFrame f;
  f.time = 3.0;
  q.append({f});
  CHECK(episode_init(q, rng).time == 3.0);

  MotionQueue big;
  std::vector<ReferenceFrame> frames(100);
  for (int i = 0; i < 100; ++i) frames[i].time = i;
  big.append(frames);
  std::vector<int> counts(100, 0);
  // Every bin within 3 sigma fails for ~1 in 4 seeds even when sampling is exact.
  std::mt19937_64 r(7);
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<int>(episode_init(big, r).time)];
  const double mean = 100.0, sd = std::sqrt(10000 * 0.01 * 0.99);
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - mean) <= 3.0 * sd + 1.0);
    chi2 += (c - mean) * (c - mean) / mean;
  }
  // 99 dof: mean 99, sd ~14.
  CHECK(chi2 < 99 + 4 * std::sqrt(2.0 * 99));
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 20; ++i) CHECK(episode_init(big, a).time == episode_init(big, b).time);
}

TEST_CASE("termination") {
  RobotSnapshot s;
  const RewardConfig cfg;
  CHECK(check_termination(s, cfg) == Termination::Continue);
  s.base_position.z() = 0.10;
  CHECK(check_termination(s, cfg) == Termination::Terminated);
  CHECK(check_termination(s, cfg, -0.1) == Termination::Continue);
  s = RobotSnapshot{};
  s.roll = 1.2;
  CHECK(check_termination(s, cfg) == Termination::Terminated);
  s.roll = 0.0;
  s.pitch = -1.1;
  CHECK(check_termination(s, cfg) == Termination::Terminated);
  s.pitch = 0.0;
  s.body_contact = true;
  CHECK(check_termination(s, cfg) == Termination::Terminated);
}
