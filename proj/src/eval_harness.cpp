#include "locomimic/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace locomimic {

namespace {

void check_range(const Range& r, const char* key, bool non_negative = false) {
  if (!(r.lo <= r.hi)) throw ConfigError(std::string(key) + ": range lower bound exceeds upper bound");
  if (non_negative && r.lo < 0.0) throw ConfigError(std::string(key) + ": range must be >= 0");
}

double uniform(const Range& r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

Vec3 uniform3(const Range& r, std::mt19937_64& rng) {
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = uniform(r, rng);
  return v;
}

// Classic 2D gradient noise on a shuffled permutation table.
class GradientNoise {
 public:
  explicit GradientNoise(std::uint64_t seed) {
    std::array<int, 256> p;
    std::iota(p.begin(), p.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(p.begin(), p.end(), rng);
    for (int i = 0; i < 512; ++i) perm_[i] = p[i & 255];
  }

  double operator()(double x, double y) const {
    const double fx = std::floor(x), fy = std::floor(y);
    const int xi = static_cast<int>(static_cast<long long>(fx) & 255);
    const int yi = static_cast<int>(static_cast<long long>(fy) & 255);
    const double dx = x - fx, dy = y - fy;
    const double u = fade(dx), v = fade(dy);
    const double n00 = grad(perm_[perm_[xi] + yi], dx, dy);
    const double n10 = grad(perm_[perm_[xi + 1] + yi], dx - 1, dy);
    const double n01 = grad(perm_[perm_[xi] + yi + 1], dx, dy - 1);
    const double n11 = grad(perm_[perm_[xi + 1] + yi + 1], dx - 1, dy - 1);
    const double a = n00 + u * (n10 - n00);
    const double b = n01 + u * (n11 - n01);
    return a + v * (b - a);
  }

 private:
  static double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }
  // Eight unit gradients; the noise then stays within [-sqrt(1/2), sqrt(1/2)].
  static double grad(int hash, double x, double y) {
    static const double s = std::sqrt(0.5);
    static const double gx[8] = {1, -1, 0, 0, s, -s, s, -s};
    static const double gy[8] = {0, 0, 1, -1, s, s, -s, -s};
    const int h = hash & 7;
    return gx[h] * x + gy[h] * y;
  }

  std::array<int, 512> perm_{};
};

SupportSet support_from(const PerLeg<Vec3>& feet, const PerLeg<bool>& contact) {
  SupportSet s;
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (contact[leg]) s.footholds.push_back(feet[leg]);
  return s;
}

// Input kept per leg so a delayed input can be applied to a changed support set.
struct LegInput {
  double h_ddot = 0.0;
  PerLeg<std::optional<double>> weights;
};

ControlInput to_support(const LegInput& in, const PerLeg<bool>& contact) {
  ControlInput u;
  u.h_ddot = in.h_ddot;
  double sum = 0.0;
  int n = 0, known = 0;
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (contact[leg]) {
      ++n;
      if (in.weights[leg]) {
        ++known;
        sum += std::max(0.0, *in.weights[leg]);
      }
    }
  if (n == 0) return u;
  if (known == 0 || !(sum > 0.0)) return ControlInput::uniform(n, in.h_ddot);
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (contact[leg]) u.weights.push_back(in.weights[leg] ? std::max(0.0, *in.weights[leg]) / sum : 0.0);
  return u;
}

}  // namespace

void RandomizationConfig::validate() const {
  check_range(linear_impulse, "linear_impulse");
  check_range(angular_impulse, "angular_impulse");
  check_range(friction, "friction", true);
  check_range(perlin_frequency, "perlin_frequency", true);
  check_range(perlin_magnitude, "perlin_magnitude", true);
  if (!(gravity_cone_deg >= 0.0 && gravity_cone_deg < 180.0)) throw ConfigError("gravity_cone_deg must be in [0, 180)");
  if (!(actuator_latency >= 0.0)) throw ConfigError("actuator_latency must be >= 0");
}

Vec3 sample_gravity_cone(double half_angle, std::mt19937_64& rng) {
  if (!(half_angle >= 0.0)) throw InvalidParameter("cone half-angle must be >= 0");
  // Uniform on the cap: cos(theta) uniform in [cos(alpha), 1].
  const double c = std::uniform_real_distribution<double>(std::cos(half_angle), 1.0)(rng);
  const double phi = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  return {s * std::cos(phi), s * std::sin(phi), -c};
}

double cone_mean_angle(double half_angle) {
  if (half_angle <= 0.0) return 0.0;
  const double a = half_angle;
  return (std::sin(a) - a * std::cos(a)) / (1.0 - std::cos(a));
}

RandomizationDraw sample_randomization(const RandomizationConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  RandomizationDraw d;
  d.linear_impulse = uniform3(cfg.linear_impulse, rng);
  d.angular_impulse = uniform3(cfg.angular_impulse, rng);
  d.friction = uniform(cfg.friction, rng);
  d.perlin_frequency = uniform(cfg.perlin_frequency, rng);
  d.perlin_magnitude = uniform(cfg.perlin_magnitude, rng);
  d.terrain_seed = rng();
  d.gravity_direction = sample_gravity_cone(cfg.gravity_cone_deg * kPi / 180.0, rng);
  d.latency = cfg.actuator_latency;
  return d;
}

HeightField perlin_heightfield(double frequency, double magnitude, std::uint64_t seed, const Vec2& extent,
                               double resolution, const Vec2& origin, bool enforce_ranges) {
  if (!(frequency >= 0.0) || !(magnitude >= 0.0)) throw InvalidParameter("Perlin frequency and magnitude must be >= 0");
  if (enforce_ranges && (frequency > 0.9 || magnitude > 0.1))
    throw InvalidParameter("Perlin parameters outside frequency [0, 0.9], magnitude [0, 0.1]");
  if (!(resolution > 0.0)) throw InvalidParameter("height field resolution must be > 0");
  const int nx = std::max(2, static_cast<int>(std::ceil(extent.x() / resolution - 1e-9)) + 1);
  const int ny = std::max(2, static_cast<int>(std::ceil(extent.y() / resolution - 1e-9)) + 1);
  if (magnitude == 0.0) return HeightField(origin, resolution, MatX::Zero(nx, ny));
  const GradientNoise noise(seed);
  const double bound = std::sqrt(0.5);
  MatX h(nx, ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const double x = (origin.x() + i * resolution) * frequency;
      const double y = (origin.y() + j * resolution) * frequency;
      h(i, j) = std::clamp(magnitude * 0.5 * (noise(x, y) / bound + 1.0), 0.0, magnitude);
    }
  return HeightField(origin, resolution, std::move(h));
}

PendulumState plant_step(const PendulumState& state, const ControlInput& u, const SupportSet& support,
                         const std::optional<Vec3>& impulse, double dt, const GravityVector& gravity) {
  if (!(dt > 0.0)) throw InvalidParameter("integration step must be > 0");
  Vec3 v = state.v;
  if (impulse) v += *impulse;
  // Velocity form of the same recurrence: v' = v + a dt, r' = r + v' dt.
  v += vhipm::continuous_accel(state.r, u, support, gravity) * dt;
  return {state.r + v * dt, v};
}

PendulumPlant::PendulumPlant(const Vec3& r, const Vec3& v, double dt, GravityVector gravity)
    : r_prev_(r - v * dt), r_(r), dt_(dt), gravity_(std::move(gravity)) {
  if (!(dt > 0.0)) throw InvalidParameter("integration step must be > 0");
}

void PendulumPlant::apply_impulse(const Vec3& dv) { r_prev_ -= dv * dt_; }

void PendulumPlant::step(const ControlInput& u, const SupportSet& support) {
  const Vec3 next = vhipm::discrete_step(r_prev_, r_, u, support, dt_, gravity_);
  r_prev_ = r_;
  r_ = next;
}

RunLog receding_horizon_run(const VelocityCommand& command, const GaitPattern& gait, double duration,
                            const std::vector<Disturbance>& disturbances, const HarnessConfig& cfg) {
  gait.validate();
  if (!(duration > 0.0)) throw InvalidParameter("run duration must be > 0");
  if (!(cfg.control_dt > 0.0)) throw InvalidParameter("control step must be > 0");
  if (!(cfg.latency >= 0.0)) throw InvalidParameter("latency must be >= 0");
  cfg.reward.validate();

  const GenerationConfig& gen = cfg.generation;
  const double dt = cfg.control_dt;
  const double horizon = gen.horizon_periods * gait.period;
  const int steps = static_cast<int>(std::lround(duration / dt));
  const auto delay = static_cast<std::size_t>(std::lround(cfg.latency / dt));

  RunLog log;
  log.dt = dt;
  log.command = command;
  log.gait = gait.name;
  log.target_height = gen.target_height;

  std::vector<std::vector<const Disturbance*>> scheduled(steps);
  for (const auto& d : disturbances) {
    const int k = static_cast<int>(std::ceil(d.time / dt - 1e-9));
    if (k < 0 || k >= steps) continue;
    scheduled[k].push_back(&d);
  }

  const MotionStart standing = MotionStart::standing(gen);
  PendulumPlant plant(standing.r, standing.v, dt, gen.gravity);
  PerLeg<Vec3> feet = standing.feet;
  PerLeg<std::optional<Vec3>> liftoff;
  PerLeg<bool> contact{};
  for (int leg = 0; leg < kNumLegs; ++leg) contact[leg] = in_stance(gait, leg, 0.0);

  ReferenceGenerator reference(gait, command, gen);
  MotionQueue queue(reference.default_threshold());
  queue.append(reference.begin(standing));

  std::optional<OcpProblem> last_problem;
  std::optional<OcpSolution> last_solution;
  // First planned touchdown of each leg in the latest solution.
  PerLeg<std::optional<Vec3>> planned;
  std::deque<LegInput> buffer;
  ReferenceFrame ref;

  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const double yaw = command.yaw_rate * t;
    const Vec3 r = plant.position();
    const Vec3 v = plant.velocity();
    const Vec3 cmd_world(rotate2(yaw, Vec2{command.forward, command.lateral}).x(),
                         rotate2(yaw, Vec2{command.forward, command.lateral}).y(), 0.0);

    PerLeg<bool> now{};
    for (int leg = 0; leg < kNumLegs; ++leg) {
      now[leg] = in_stance(gait, leg, t);
      if (now[leg] && !contact[leg]) {
        if (planned[leg]) {
          feet[leg] = *planned[leg];
        } else {
          const Vec3 hip(r.x() + rotate2(yaw, gen.hip_offsets[leg]).x(), r.y() + rotate2(yaw, gen.hip_offsets[leg]).y(),
                         0.0);
          feet[leg] = raibert_foothold(hip, v, cmd_world, gait.stance_duration(), gen.raibert_gain);
        }
      } else if (!now[leg] && contact[leg]) {
        liftoff[leg] = feet[leg];
      }
    }
    contact = now;

    RunStep step;
    step.time = t;
    step.state = plant.state();
    step.contact = contact;

    // Replan from the measured state.
    MotionStart start;
    start.time = t;
    start.r = r;
    start.v = v;
    start.yaw = yaw;
    start.feet = feet;
    start.liftoff = liftoff;
    try {
      const OcpProblem problem = make_problem(start, command, gait, horizon, gen, 0.0);
      std::optional<StackedControl> init;
      if (last_problem && last_solution) init = shift_warm_start(*last_problem, last_solution->u, problem);
      OcpSolution sol = solve_ocp(problem, gen.weights, init, gen.solver);
      step.solver_iterations = sol.report.iterations;
      step.solver_cost = sol.report.final_cost;
      step.degraded = !sol.report.converged;

      LegInput in;
      in.h_ddot = sol.u.h_ddot.front();
      const OcpStructure layout = analyze(problem);
      for (const auto& slot : layout.steps.front().slots)
        in.weights[slot.leg] = sol.u.weights.front()[&slot - layout.steps.front().slots.data()];
      buffer.push_back(in);

      planned = {};
      for (std::size_t j = 0; j < layout.footfalls.size(); ++j) {
        const int leg = layout.footfalls[j].leg;
        if (!planned[leg]) planned[leg] = sol.u.footholds[j];
      }
      last_problem = problem;
      last_solution = std::move(sol);
    } catch (const Error&) {
      step.degraded = true;
      if (buffer.empty()) buffer.push_back(LegInput{});
      else buffer.push_back(buffer.back());
    }
    while (buffer.size() > delay + 1) buffer.pop_front();
    step.input = to_support(buffer.front(), contact);

    // Swing feet follow an arc toward the planned touchdown.
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (contact[leg]) continue;
      const Vec3 from = liftoff[leg] ? *liftoff[leg] : feet[leg];
      const Vec3 to = planned[leg] ? *planned[leg] : from;
      const double progress = (t - swing_onset(gait, leg, t)) / gait.swing_duration();
      feet[leg] = swing_trajectory(from, to, progress, gen.swing_height);
    }
    step.feet = feet;

    try {
      do ref = next_frame(queue, reference);
      while (ref.time < t - 1e-9);
    } catch (const Error&) {
      // Keep the last reference; the plant run itself is unaffected.
    }
    step.reference = ref;

    RobotSnapshot snap;
    snap.base_position = r;
    snap.yaw = yaw;
    snap.linear_velocity = v;
    snap.yaw_rate = command.yaw_rate;
    snap.feet = feet;
    snap.contact = contact;
    step.reward = reward_breakdown(snap, ref, Vec12::Zero(), Vec12::Zero(), cfg.reward);

    for (const Disturbance* d : scheduled[k]) {
      step.impulse += d->linear;
      step.angular_impulse += d->angular;
      Disturbance applied = *d;
      applied.time = t;
      log.disturbances.push_back(applied);
    }
    log.steps.push_back(step);

    try {
      if (!step.impulse.isZero(0.0)) plant.apply_impulse(step.impulse);
      plant.step(step.input, support_from(feet, contact));
    } catch (const SingularityError& e) {
      log.singularity = true;
      log.error = e.what();
      break;
    }
  }
  return log;
}

TrackingReport tracking_metrics(const RunLog& log, const VelocityCommand& command, const TrackingOptions& options) {
  if (log.steps.empty()) throw InvalidParameter("tracking metrics need a non-empty log");
  TrackingReport rep;
  const std::size_t n = log.steps.size();
  std::vector<double> err(n);
  double sum = 0.0, h2 = 0.0;
  int counted = 0;
  RewardBreakdown acc{0, 0, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const RunStep& s = log.steps[i];
    const double yaw = command.yaw_rate * s.time;
    const Vec2 cmd = rotate2(yaw, Vec2{command.forward, command.lateral});
    err[i] = (s.state.v.head<2>() - cmd).norm();
    if (s.time >= options.skip - 1e-9) {
      sum += err[i];
      rep.max_velocity_error = std::max(rep.max_velocity_error, err[i]);
      ++counted;
    }
    const double dh = s.state.r.z() - s.reference.base_position.z();
    h2 += dh * dh;
    acc.height += s.reward.height;
    acc.velocity += s.reward.velocity;
    acc.yaw_rate += s.reward.yaw_rate;
    acc.feet += s.reward.feet;
    acc.action_rate += s.reward.action_rate;
    acc.slip += s.reward.slip;
    acc.pitch_roll += s.reward.pitch_roll;

    rep.time.push_back(s.time);
    rep.forward_velocity.push_back(rotate2(-yaw, s.state.v.head<2>()).x());
    rep.base_height.push_back(s.state.r.z());
    rep.foot_height.push_back(s.feet[0].z());
  }
  rep.mean_velocity_error = counted ? sum / counted : 0.0;
  rep.height_rmse = std::sqrt(h2 / static_cast<double>(n));
  const double inv = 1.0 / static_cast<double>(n);
  rep.mean_reward = {acc.height * inv, acc.velocity * inv,    acc.yaw_rate * inv,  acc.feet * inv,
                     acc.action_rate * inv, acc.slip * inv, acc.pitch_roll * inv};

  for (std::size_t d = 0; d < log.disturbances.size(); ++d) {
    const double td = log.disturbances[d].time;
    const double next = d + 1 < log.disturbances.size() ? log.disturbances[d + 1].time
                                                        : std::numeric_limits<double>::infinity();
    std::optional<std::size_t> last_bad, first;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = log.steps[i].time;
      if (t < td - 1e-9 || t >= next - 1e-9) continue;
      if (!first) first = i;
      if (err[i] >= options.velocity_threshold) last_bad = i;
    }
    if (!first) rep.recovery_times.push_back(-1.0);
    else if (!last_bad) rep.recovery_times.push_back(0.0);
    else if (*last_bad + 1 >= n || log.steps[*last_bad + 1].time >= next - 1e-9) rep.recovery_times.push_back(-1.0);
    else rep.recovery_times.push_back(log.steps[*last_bad + 1].time - td);
  }
  return rep;
}

Vec2 mean_velocity_over_periods(const RunLog& log, double period, double from) {
  if (!(period > 0.0)) throw InvalidParameter("period must be > 0");
  if (log.steps.empty()) throw InvalidParameter("empty log");
  const double end = log.steps.back().time + log.dt;
  const int whole = static_cast<int>(std::floor((end - from) / period + 1e-9));
  if (whole < 1) throw InvalidParameter("log shorter than one period after the start time");
  const double until = from + whole * period;
  Vec2 sum = Vec2::Zero();
  int n = 0;
  for (const auto& s : log.steps)
    if (s.time >= from - 1e-9 && s.time < until - 1e-9) {
      sum += s.state.v.head<2>();
      ++n;
    }
  return n ? Vec2(sum / n) : Vec2::Zero();
}

}  // namespace locomimic
