#include <doctest.h>

#include "locomimic/motion_synthesis.hpp"

#include <cmath>

using namespace locomimic;

namespace {

const GenerationConfig kCfg{};

void check_stance_stationary(const std::vector<ReferenceFrame>& frames) {
  for (std::size_t i = 1; i < frames.size(); ++i)
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (frames[i - 1].contact[leg] && frames[i].contact[leg])
        CHECK((frames[i].feet[leg] - frames[i - 1].feet[leg]).norm() <= 1e-9);
}

}  // namespace

TEST_CASE("frame count follows rate and horizon") {
  const GaitPattern trot = find_gait("trot");
  const auto ref = generate_reference(MotionStart::standing(kCfg), {}, trot, 2 * trot.period, kCfg);
  REQUIRE(ref.frames.size() == 50);
  for (std::size_t i = 0; i < ref.frames.size(); ++i) CHECK(ref.frames[i].time == doctest::Approx(0.02 * i).epsilon(1e-12));
  CHECK(generate_reference(MotionStart::standing(kCfg), {}, trot, 4 * trot.period, kCfg).frames.size() == 100);
}

TEST_CASE("zero command trot stays at the target height on the footprints") {
  const GaitPattern trot = find_gait("trot");
  const MotionStart s = MotionStart::standing(kCfg);
  const auto ref = generate_reference(s, {}, trot, 1.0, kCfg);
  for (const auto& f : ref.frames) {
    CHECK(std::abs(f.base_position.z() - 0.32) <= 1e-3);
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (f.contact[leg]) CHECK((f.feet[leg] - s.feet[leg]).norm() <= 1e-3);
  }
  const auto& last = ref.frames.back();
  for (int leg = 0; leg < kNumLegs; ++leg) CHECK((last.feet[leg].head<2>() - s.feet[leg].head<2>()).norm() <= 1e-3);
}

TEST_CASE("pronk flight frames are ballistic") {
  // A frame is inside the flight interval when the solver samples it is
  // interpolated from are all ballistic.
  const GaitPattern pronk = find_gait("pronk");
  const auto ref = generate_reference(MotionStart::standing(kCfg), {0.5, 0.0, 0.0}, pronk, 0.8, kCfg);
  const auto& tl = ref.problem.timeline;
  auto airborne = [&](int k) {
    if (k < 0 || k >= tl.steps) return false;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (tl.contact[leg][k]) return false;
    return true;
  };
  auto in_flight = [&](const ReferenceFrame& f) {
    const int k = static_cast<int>(std::floor((f.time - tl.start_time) / tl.dt + 1e-9));
    return airborne(k) && airborne(k + 1);
  };
  const double dt = 0.02;
  int checked = 0;
  for (std::size_t i = 1; i + 1 < ref.frames.size(); ++i) {
    if (!in_flight(ref.frames[i - 1]) || !in_flight(ref.frames[i]) || !in_flight(ref.frames[i + 1])) continue;
    for (int leg = 0; leg < kNumLegs; ++leg) CHECK_FALSE(ref.frames[i].contact[leg]);
    const double dd = ref.frames[i + 1].base_position.z() - 2 * ref.frames[i].base_position.z() + ref.frames[i - 1].base_position.z();
    CHECK(std::abs(dd + 9.81 * dt * dt) <= 1e-8);
    ++checked;
  }
  CHECK(checked >= 6);
  // On the solver grid every flight step is ballistic.
  const auto& r = ref.solution.x.r;
  for (int k = 1; k + 1 < tl.steps; ++k)
    if (airborne(k + 1)) CHECK(std::abs(r[k + 1].z() - 2 * r[k].z() + r[k - 1].z() + 9.81 * tl.dt * tl.dt) <= 1e-12);
}

TEST_CASE("stance feet do not slide and swing feet clear the ground") {
  for (const auto& g : builtin_gaits()) {
    const auto ref = generate_reference(MotionStart::standing(kCfg), {0.5, 0.1, 0.3}, g, 2 * g.period, kCfg);
    check_stance_stationary(ref.frames);
    for (const auto& f : ref.frames)
      for (int leg = 0; leg < kNumLegs; ++leg) CHECK(f.feet[leg].z() >= -1e-12);
  }
}

TEST_CASE("swing_trajectory") {
  const Vec3 a(0, 0, 0), b(0.1, 0.02, 0);
  CHECK((swing_trajectory(a, b, 0.0, 0.08) - a).norm() < 1e-15);
  CHECK((swing_trajectory(a, b, 1.0, 0.08) - b).norm() < 1e-15);
  CHECK(swing_trajectory(a, b, 0.5, 0.08).z() == doctest::Approx(0.08).epsilon(1e-12));
  double top = 0.0;
  for (int i = 0; i <= 1000; ++i) top = std::max(top, swing_trajectory(a, b, i / 1000.0, 0.08).z());
  CHECK(top == doctest::Approx(0.08).epsilon(1e-12));
  // Over a bump the arc never dips into the terrain.
  MatX h = MatX::Zero(41, 41);
  for (int i = 0; i < 41; ++i)
    for (int j = 0; j < 41; ++j) h(i, j) = 0.05 * std::exp(-std::pow((i - 20) * 0.01, 2) / 0.0004);
  const HeightField bump(Vec2(-0.1, -0.2), 0.01, h);
  for (int i = 0; i <= 100; ++i) {
    const Vec3 p = swing_trajectory(Vec3(-0.05, 0, bump.height(-0.05, 0)), Vec3(0.05, 0, bump.height(0.05, 0)),
                                    i / 100.0, 0.08, &bump);
    CHECK(p.z() >= bump.height(p.x(), p.y()) - 1e-12);
  }
}

TEST_CASE("raibert_foothold") {
  const Vec3 hip(0.19, 0.13, 0.0);
  const Vec3 matched = raibert_foothold(hip, Vec3(0.5, 0, 0), Vec3(0.5, 0, 0), 0.25, 0.03);
  CHECK((matched - hip - Vec3(0.0625, 0, 0)).norm() < 1e-15);
  const Vec3 fast = raibert_foothold(hip, Vec3(0.7, 0, 0), Vec3(0.5, 0, 0), 0.25, 0.03);
  CHECK(fast.x() - matched.x() == doctest::Approx(0.006).epsilon(1e-12));
}

TEST_CASE("kinematic baseline") {
  const GaitPattern pronk = find_gait("pronk");
  const auto frames = kinematic_baseline(MotionStart::standing(kCfg), {0.5, 0.0, 0.0}, pronk, 1.0, kCfg);
  REQUIRE(frames.size() == 50);
  for (const auto& f : frames) CHECK(f.base_position.z() == 0.32);
  for (std::size_t i = 1; i + 1 < frames.size(); ++i)
    CHECK(frames[i + 1].base_position.z() - 2 * frames[i].base_position.z() + frames[i - 1].base_position.z() == 0.0);
  CHECK(frames.back().base_position.x() == doctest::Approx(0.5 * 0.98).epsilon(1e-12));
  check_stance_stationary(frames);
  // Command turning at a constant rate traces the integrated heading.
  const auto turn = kinematic_baseline(MotionStart::standing(kCfg), {0.0, 0.0, 0.5}, find_gait("trot"), 1.0, kCfg);
  CHECK(turn.back().yaw == doctest::Approx(0.5 * 0.98).epsilon(1e-12));
}

TEST_CASE("terrain adjustment") {
  const GaitPattern trot = find_gait("trot");
  const auto frames = generate_reference(MotionStart::standing(kCfg), {0.3, 0.0, 0.0}, trot, 1.0, kCfg).frames;
  const HeightField flat = HeightField::flat(Vec2(-2, -2), Vec2(4, 4), 0.05);
  CHECK(adjust_for_terrain(frames, flat) == frames);

  const HeightField raised = HeightField::flat(Vec2(-2, -2), Vec2(4, 4), 0.05, 0.1);
  const auto up = adjust_for_terrain(frames, raised);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(up[i].base_position.z() - frames[i].base_position.z() == doctest::Approx(0.1).epsilon(1e-12));
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (frames[i].contact[leg]) CHECK(up[i].feet[leg].z() - frames[i].feet[leg].z() == doctest::Approx(0.1).epsilon(1e-12));
  }

  // Step under the front feet only.
  MatX h = MatX::Zero(81, 81);
  for (int i = 0; i < 81; ++i)
    if (-2.0 + 0.05 * i > 0.0) h.row(i).setConstant(0.1);
  const HeightField step(Vec2(-2, -2), 0.05, h);
  const auto still = generate_reference(MotionStart::standing(kCfg), {}, trot, 1.0, kCfg).frames;
  const auto on_step = adjust_for_terrain(still, step);
  for (std::size_t i = 0; i < still.size(); ++i) {
    const double offset = on_step[i].base_position.z() - still[i].base_position.z();
    CHECK(offset > 0.0);
    CHECK(offset < 0.1);
    for (int leg = 0; leg < kNumLegs; ++leg)
      CHECK(on_step[i].feet[leg].z() >= step.height(on_step[i].feet[leg].x(), on_step[i].feet[leg].y()) - 1e-12);
  }
}

TEST_CASE("queue refills at the threshold") {
  const GaitPattern trot = find_gait("trot");
  ReferenceGenerator gen(trot, {0.5, 0.0, 0.0}, kCfg);
  MotionQueue q(gen.default_threshold());
  CHECK(q.threshold() == 13);
  q.append(gen.begin(MotionStart::standing(kCfg)));
  const std::size_t horizon = q.size();
  CHECK(horizon == 50);
  const std::size_t before = gen.reports().size();
  for (std::size_t i = 0; i < horizon - q.threshold(); ++i) next_frame(q, gen);
  CHECK(gen.reports().size() == before);
  CHECK(q.size() == q.threshold());
  next_frame(q, gen);
  CHECK(gen.reports().size() == before);
  CHECK(q.needs_refill());
  next_frame(q, gen);  // below threshold: one horizon appended, then one popped
  CHECK(gen.reports().size() == before + 1);
  CHECK(q.size() == q.threshold() - 1 + horizon - 1);
  CHECK_THROWS_AS(q.append({q.front()}), InvalidParameter);
}

TEST_CASE("streamed frames stay continuous across refills") {
  const GaitPattern trot = find_gait("trot");
  ReferenceGenerator gen(trot, {0.5, 0.0, 0.0}, kCfg);
  MotionQueue q(gen.default_threshold());
  q.append(gen.begin(MotionStart::standing(kCfg)));
  std::vector<ReferenceFrame> seen;
  for (int i = 0; i < 500; ++i) {
    if (i == 200) gen.set_command({0.3, 0.2, 0.0});
    seen.push_back(next_frame(q, gen));
  }
  for (std::size_t i = 1; i < seen.size(); ++i) {
    CHECK(seen[i].time - seen[i - 1].time == doctest::Approx(0.02).epsilon(1e-9));
    CHECK((seen[i].base_position - seen[i - 1].base_position).norm() <= 0.02 * 1.0);
  }
  CHECK(seen.back().time == doctest::Approx(9.98).epsilon(1e-12));
  check_stance_stationary(seen);
}
