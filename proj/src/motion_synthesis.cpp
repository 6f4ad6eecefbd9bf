#include "locomimic/motion_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace locomimic {

namespace {

constexpr double kTimeEps = 1e-9;

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

/// Integral of the rotating command velocity over [0, s].
Vec2 integrate_command(const VelocityCommand& c, double yaw0, double s) {
  const double a = c.forward, b = c.lateral, w = c.yaw_rate;
  if (std::abs(w) < 1e-12) return rotate2(yaw0, Vec2{a, b}) * s;
  const double p0 = yaw0, p1 = yaw0 + w * s;
  const double ds = std::sin(p1) - std::sin(p0), dc = std::cos(p1) - std::cos(p0);
  return Vec2{a * ds + b * dc, -a * dc + b * ds} / w;
}

// Base position/velocity as a function of absolute time.
using BaseTrack = std::function<void(double t, Vec3& position, Vec3& velocity)>;
// Foothold of the stance interval of `leg` beginning at absolute time `onset`.
using FootholdRule = std::function<Vec3(int leg, double onset)>;

struct FrameSpec {
  const MotionStart* start;
  const GaitPattern* gait;
  VelocityCommand command;
  double rate;
  double swing_height;
  double ground;
};

bool same_stance_as_start(const FrameSpec& spec, int leg, double onset) {
  const double t0 = spec.start->time;
  return in_stance(*spec.gait, leg, t0) && std::abs(stance_onset(*spec.gait, leg, t0) - onset) < 1e-6;
}

Vec3 foot_at(const FrameSpec& spec, int leg, double t, const FootholdRule& foothold) {
  const GaitPattern& gait = *spec.gait;
  const MotionStart& start = *spec.start;
  const double t0 = start.time;
  if (in_stance(gait, leg, t)) {
    const double onset = stance_onset(gait, leg, t);
    if (same_stance_as_start(spec, leg, onset)) return start.feet[leg];
    return foothold(leg, onset);
  }
  const double lift = swing_onset(gait, leg, t);
  const double swing = gait.swing_duration();
  const double touchdown = lift + swing;
  const Vec3 end = foothold(leg, touchdown);
  const double progress = (t - lift) / swing;

  if (lift < t0 - kTimeEps) {
    // Mid-swing at the start: keep the old arc's lift-off point and fade the
    // offset to the measured position out by touchdown.
    const Vec3 from = start.liftoff[leg] ? *start.liftoff[leg]
                                         : Vec3(start.feet[leg].x(), start.feet[leg].y(), spec.ground);
    const double p0 = (t0 - lift) / swing;
    const Vec3 correction = start.feet[leg] - swing_trajectory(from, end, p0, spec.swing_height);
    const double blend = smoothstep((progress - p0) / (1.0 - p0));
    Vec3 p = swing_trajectory(from, end, progress, spec.swing_height) + (1.0 - blend) * correction;
    p.z() = std::max(p.z(), spec.ground);
    return p;
  }
  Vec3 from;
  if (std::abs(lift - t0) <= kTimeEps) {
    from = start.feet[leg];
  } else {
    const double prev_onset = lift - gait.stance_duration();
    from = same_stance_as_start(spec, leg, prev_onset) ? start.feet[leg] : foothold(leg, prev_onset);
  }
  return swing_trajectory(from, end, progress, spec.swing_height);
}

std::vector<ReferenceFrame> assemble(const FrameSpec& spec, int first, int count, const BaseTrack& base,
                                     const FootholdRule& foothold) {
  std::vector<ReferenceFrame> frames;
  frames.reserve(count);
  const double t0 = spec.start->time;
  for (int i = first; i < first + count; ++i) {
    ReferenceFrame f;
    f.time = t0 + static_cast<double>(i) / spec.rate;
    base(f.time, f.base_position, f.base_velocity);
    f.yaw = spec.start->yaw + spec.command.yaw_rate * (f.time - t0);
    f.yaw_rate = spec.command.yaw_rate;
    const auto phases = phase_variables(*spec.gait, f.time);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      f.contact[leg] = in_stance(*spec.gait, leg, f.time);
      f.phase[leg] = phases[leg].angle;
      f.feet[leg] = foot_at(spec, leg, f.time, foothold);
    }
    frames.push_back(f);
  }
  return frames;
}

Vec3 hip_at(const GenerationConfig& cfg, const Vec3& base, double yaw, int leg, double ground) {
  const Vec2 xy = base.head<2>() + rotate2(yaw, cfg.hip_offsets[leg]);
  return {xy.x(), xy.y(), ground};
}

}  // namespace

MotionStart MotionStart::standing(const GenerationConfig& cfg, double time, double ground) {
  MotionStart s;
  s.time = time;
  s.ground = ground;
  s.r = Vec3(0.0, 0.0, ground + cfg.target_height);
  for (int leg = 0; leg < kNumLegs; ++leg)
    s.feet[leg] = Vec3(cfg.hip_offsets[leg].x(), cfg.hip_offsets[leg].y(), ground);
  return s;
}

MotionStart MotionStart::from_frame(const ReferenceFrame& f) {
  MotionStart s;
  s.time = f.time;
  s.r = f.base_position;
  s.v = f.base_velocity;
  s.yaw = f.yaw;
  s.feet = f.feet;
  double stance = std::numeric_limits<double>::infinity(), any = stance;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    any = std::min(any, f.feet[leg].z());
    if (f.contact[leg]) stance = std::min(stance, f.feet[leg].z());
  }
  s.ground = std::isfinite(stance) ? stance : any;
  return s;
}

Vec3 swing_trajectory(const Vec3& start, const Vec3& end, double progress, double apex_height,
                      const HeightField* terrain) {
  if (progress <= 0.0) return start;
  if (progress >= 1.0) return end;
  const double s = smoothstep(progress);
  const double bump = std::pow(std::sin(kPi * progress), 2);
  Vec3 p;
  p.head<2>() = start.head<2>() + (end.head<2>() - start.head<2>()) * s;
  const double mid = 0.5 * (start.z() + end.z());
  const double apex = std::max(start.z(), end.z()) + apex_height;
  p.z() = start.z() + (end.z() - start.z()) * s + (apex - mid) * bump;
  if (terrain) p.z() = std::max(p.z(), terrain->height(p.x(), p.y()) + apex_height * bump);
  return p;
}

Vec3 raibert_foothold(const Vec3& hip, const Vec3& base_velocity, const Vec3& command_velocity,
                      double stance_duration, double gain) {
  if (!(stance_duration > 0.0)) throw InvalidParameter("stance duration must be > 0");
  Vec3 f = hip;
  f.head<2>() += 0.5 * stance_duration * command_velocity.head<2>() +
                 gain * (base_velocity.head<2>() - command_velocity.head<2>());
  return f;
}

OcpProblem make_problem(const MotionStart& start, const VelocityCommand& command, const GaitPattern& gait,
                        double horizon, const GenerationConfig& cfg, double ground) {
  gait.validate();
  if (!(horizon > 0.0)) throw InvalidParameter("horizon must be > 0");
  OcpProblem p;
  const int steps = std::max(1, static_cast<int>(std::lround(horizon / cfg.solver_dt)));
  p.timeline = make_timeline(gait, start.time, steps, cfg.solver_dt);
  p.r0 = start.r;
  p.v0 = start.v;
  p.yaw0 = start.yaw;
  p.command = command;
  p.target_height = cfg.target_height;
  p.ground_height = ground;
  p.hip_offsets = cfg.hip_offsets;
  p.gravity = cfg.gravity;
  p.raibert_gain = cfg.raibert_gain;
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (p.timeline.contact[leg][0]) p.stance_feet[leg] = start.feet[leg];
  return p;
}

ReferenceMotion generate_reference(const MotionStart& start, const VelocityCommand& command, const GaitPattern& gait,
                                   double horizon, const GenerationConfig& cfg,
                                   const std::optional<StackedControl>& warm_start, int first_frame) {
  gait.validate();
  if (horizon < gait.period - 1e-9) throw InvalidParameter("horizon must cover at least one gait period");
  const double ground = start.ground;
  ReferenceMotion out;
  out.problem = make_problem(start, command, gait, horizon, cfg, ground);
  out.solution = solve_ocp(out.problem, cfg.weights, warm_start, cfg.solver);
  out.degraded = !out.solution.report.converged;

  const OcpProblem& p = out.problem;
  const int N = p.steps();
  const double dt = p.dt();
  // Q[k + 1] = r_k for k = -1 .. N + 1 (the last one linearly extrapolated).
  std::vector<Vec3> Q(N + 3);
  Q[0] = p.r_before();
  Q[1] = p.r0;
  for (int k = 0; k < N; ++k) Q[k + 2] = out.solution.x.r[k];
  Q[N + 2] = 2.0 * Q[N + 1] - Q[N];

  const BaseTrack base = [&](double t, Vec3& pos, Vec3& vel) {
    const double s = (t - p.timeline.start_time) / dt;
    int k = static_cast<int>(std::floor(s + kTimeEps));
    k = std::clamp(k, 0, N - 1);
    const double u = std::max(0.0, s - k);
    const Vec3 &P0 = Q[k], &P1 = Q[k + 1], &P2 = Q[k + 2], &P3 = Q[k + 3];
    const Vec3 c1 = 0.5 * (P2 - P0);
    const Vec3 c2 = 0.5 * (2.0 * P0 - 5.0 * P1 + 4.0 * P2 - P3);
    const Vec3 c3 = 0.5 * (-P0 + 3.0 * P1 - 3.0 * P2 + P3);
    pos = P1 + u * (c1 + u * (c2 + u * c3));
    vel = (c1 + u * (2.0 * c2 + u * 3.0 * c3)) / dt;
  };

  const OcpStructure layout = analyze(p);
  const double horizon_end = p.timeline.time(N);
  const FootholdRule foothold = [&](int leg, double onset) -> Vec3 {
    for (std::size_t j = 0; j < layout.footfalls.size(); ++j) {
      const auto& f = layout.footfalls[j];
      if (f.leg == leg && std::abs(stance_onset(gait, leg, f.time) - onset) < 1e-6) return out.solution.u.footholds[j];
    }
    // Touchdown past the horizon: place it by the rule under the extrapolated base.
    Vec3 pos, vel;
    base(std::min(onset, horizon_end), pos, vel);
    const double s = onset - p.timeline.start_time;
    if (onset > horizon_end) pos.head<2>() += p.command_velocity(s) * (onset - horizon_end);
    const Vec2 vc = p.command_velocity(s);
    return raibert_foothold(hip_at(cfg, pos, p.heading(s), leg, ground), vel, Vec3(vc.x(), vc.y(), 0.0),
                            gait.stance_duration(), cfg.raibert_gain);
  };

  const FrameSpec spec{&start, &gait, command, cfg.frame_rate, cfg.swing_height, ground};
  const int count = static_cast<int>(std::lround(horizon * cfg.frame_rate));
  out.frames = assemble(spec, first_frame, count, base, foothold);
  return out;
}

std::vector<ReferenceFrame> kinematic_baseline(const MotionStart& start, const VelocityCommand& command,
                                               const GaitPattern& gait, double horizon,
                                               const GenerationConfig& cfg, int first_frame) {
  gait.validate();
  if (horizon < gait.period - 1e-9) throw InvalidParameter("horizon must cover at least one gait period");
  const double ground = start.ground;
  const double height = ground + cfg.target_height;

  const BaseTrack base = [&](double t, Vec3& pos, Vec3& vel) {
    const double s = t - start.time;
    const Vec2 xy = start.r.head<2>() + integrate_command(command, start.yaw, s);
    pos = Vec3(xy.x(), xy.y(), height);
    const Vec2 v = rotate2(start.yaw + command.yaw_rate * s, Vec2{command.forward, command.lateral});
    vel = Vec3(v.x(), v.y(), 0.0);
  };
  const FootholdRule foothold = [&](int leg, double onset) -> Vec3 {
    Vec3 pos, vel;
    base(onset, pos, vel);
    const double yaw = start.yaw + command.yaw_rate * (onset - start.time);
    return raibert_foothold(hip_at(cfg, pos, yaw, leg, ground), vel, vel, gait.stance_duration(), cfg.raibert_gain);
  };

  const FrameSpec spec{&start, &gait, command, cfg.frame_rate, cfg.swing_height, ground};
  const int count = static_cast<int>(std::lround(horizon * cfg.frame_rate));
  return assemble(spec, first_frame, count, base, foothold);
}

namespace {

std::vector<ReferenceFrame> adjust_impl(const std::vector<ReferenceFrame>& frames, const HeightField& terrain,
                                        double tau, std::optional<double>& filter) {
  std::vector<ReferenceFrame> out = frames;
  const std::size_t n = frames.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = out[i];
    double sum = 0.0;
    int stance = 0;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (!f.contact[leg]) continue;
      f.feet[leg].z() = terrain.height(f.feet[leg].x(), f.feet[leg].y());
      sum += f.feet[leg].z();
      ++stance;
    }
    double target;
    if (stance > 0) {
      target = sum / stance;
    } else if (filter) {
      target = *filter;
    } else {
      target = terrain.height(f.base_position.x(), f.base_position.y());
    }
    if (!filter) {
      filter = target;
    } else {
      const double step = i > 0 ? frames[i].time - frames[i - 1].time : 0.0;
      const double alpha = tau > 0.0 ? 1.0 - std::exp(-step / tau) : 1.0;
      if (target != *filter) *filter += alpha * (target - *filter);
    }
    f.base_position.z() += *filter;
  }

  for (int leg = 0; leg < kNumLegs; ++leg) {
    std::size_t a = 0;
    while (a < n) {
      if (frames[a].contact[leg]) {
        ++a;
        continue;
      }
      std::size_t b = a;
      while (b + 1 < n && !frames[b + 1].contact[leg]) ++b;
      const Vec3& first = frames[a].feet[leg];
      const Vec3& last = frames[b].feet[leg];
      const double h_lift = a > 0 ? out[a - 1].feet[leg].z() : terrain.height(first.x(), first.y());
      const double h_land = b + 1 < n ? out[b + 1].feet[leg].z() : terrain.height(last.x(), last.y());
      const double t_lift = a > 0 ? frames[a - 1].time : frames[a].time;
      const double t_land = b + 1 < n ? frames[b + 1].time : frames[b].time;
      for (std::size_t i = a; i <= b; ++i) {
        const double s = t_land > t_lift ? smoothstep((frames[i].time - t_lift) / (t_land - t_lift)) : 0.0;
        Vec3& foot = out[i].feet[leg];
        foot.z() = frames[i].feet[leg].z() + (h_lift + (h_land - h_lift) * s);
        foot.z() = std::max(foot.z(), terrain.height(foot.x(), foot.y()));
      }
      a = b + 1;
    }
  }
  return out;
}

}  // namespace

std::vector<ReferenceFrame> adjust_for_terrain(const std::vector<ReferenceFrame>& frames, const HeightField& terrain,
                                               double time_constant) {
  std::optional<double> filter;
  return adjust_impl(frames, terrain, time_constant, filter);
}

ReferenceFrame MotionQueue::pop() {
  if (frames_.empty()) throw InvalidParameter("motion queue is empty");
  ReferenceFrame f = std::move(frames_.front());
  frames_.pop_front();
  return f;
}

void MotionQueue::append(const std::vector<ReferenceFrame>& frames) {
  double last = frames_.empty() ? -std::numeric_limits<double>::infinity() : frames_.back().time;
  for (const auto& f : frames) {
    if (!(f.time > last)) throw InvalidParameter("queued frame times must be strictly increasing");
    last = f.time;
  }
  frames_.insert(frames_.end(), frames.begin(), frames.end());
}

ReferenceGenerator::ReferenceGenerator(GaitPattern gait, VelocityCommand command, GenerationConfig cfg,
                                       ReferenceSource source)
    : gait_(std::move(gait)), command_(command), cfg_(std::move(cfg)), source_(source) {
  gait_.validate();
}

std::size_t ReferenceGenerator::default_threshold() const {
  return static_cast<std::size_t>(std::max(1L, std::lround(cfg_.queue_threshold_periods * gait_.period * cfg_.frame_rate)));
}

std::vector<ReferenceFrame> ReferenceGenerator::begin(const MotionStart& start) {
  liftoff_ = start.liftoff;
  ground_ = start.ground;
  raw_tail_.reset();
  terrain_filter_.reset();
  last_problem_.reset();
  last_control_.reset();
  return produce(start, 0);
}

std::vector<ReferenceFrame> ReferenceGenerator::continue_from(const ReferenceFrame& last) {
  // Terrain offsets are applied on top of flat-ground plans, so continue from
  // the unadjusted copy of the tail.
  const ReferenceFrame& seed = raw_tail_ && raw_tail_->time == last.time ? *raw_tail_ : last;
  MotionStart start = MotionStart::from_frame(seed);
  start.liftoff = liftoff_;
  if (ground_) start.ground = *ground_;
  return produce(start, 1);
}

std::vector<ReferenceFrame> ReferenceGenerator::produce(const MotionStart& start, int first_frame) {
  std::vector<ReferenceFrame> frames;
  if (source_ == ReferenceSource::Optimal) {
    std::optional<StackedControl> warm;
    if (last_problem_ && last_control_) {
      const OcpProblem next = make_problem(start, command_, gait_, horizon() + cfg_.lookahead_periods * gait_.period,
                                           cfg_, start.ground);
      warm = shift_warm_start(*last_problem_, *last_control_, next);
    }
    const double planned = horizon() + cfg_.lookahead_periods * gait_.period;
    ReferenceMotion motion = generate_reference(start, command_, gait_, planned, cfg_, warm, first_frame);
    reports_.push_back(motion.solution.report);
    last_problem_ = motion.problem;
    last_control_ = motion.solution.u;
    frames = std::move(motion.frames);
    frames.resize(static_cast<std::size_t>(std::lround(horizon() * cfg_.frame_rate)));
  } else {
    frames = kinematic_baseline(start, command_, gait_, horizon(), cfg_, first_frame);
  }
  remember_liftoffs(frames);
  if (!frames.empty()) raw_tail_ = frames.back();
  if (terrain_) frames = adjust_impl(frames, *terrain_, cfg_.terrain_time_constant, terrain_filter_);
  return frames;
}

void ReferenceGenerator::remember_liftoffs(const std::vector<ReferenceFrame>& frames) {
  for (std::size_t i = 1; i < frames.size(); ++i)
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (frames[i - 1].contact[leg] && !frames[i].contact[leg]) liftoff_[leg] = frames[i - 1].feet[leg];
}

void queue_refill(MotionQueue& queue, ReferenceGenerator& generator) {
  if (queue.empty()) throw InvalidParameter("cannot continue an empty motion queue");
  const auto frames = generator.continue_from(queue.back());
  queue.append(frames);
}

ReferenceFrame next_frame(MotionQueue& queue, ReferenceGenerator& generator) {
  if (queue.needs_refill()) queue_refill(queue, generator);
  return queue.pop();
}

}  // namespace locomimic
