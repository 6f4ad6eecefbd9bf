#include "locomimic/cli_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace locomimic {

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  bool timing = false;
};

struct Motion {
  std::string gait = "trot";
  double vx = 0.0, vy = 0.0, yaw_rate = 0.0;
  VelocityCommand command() const { return {vx, vy, yaw_rate}; }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "YAML config file");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output directory");
  sub->add_flag("--timing", c.timing, "include wall-clock times in reports");
}

void add_motion(CLI::App* sub, Motion& m) {
  sub->add_option("--gait", m.gait, "gait name");
  sub->add_option("--vx", m.vx, "forward velocity command (m/s)");
  sub->add_option("--vy", m.vy, "lateral velocity command (m/s)");
  sub->add_option("--yaw-rate", m.yaw_rate, "yaw rate command (rad/s)");
}

ToolConfig config_of(const Common& c) { return c.config.empty() ? ToolConfig{} : load_config(c.config); }

std::string out_dir(const Common& c, const ToolConfig& cfg) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("LOCOMIMIC_OUT"); env && *env) return env;
  return cfg.output_dir;
}

void write(const std::string& dir, const std::string& name, const std::string& content, std::ostream& out) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << content;
  if (!f) throw Error("cannot write " + path);
  out << "wrote " << path << "\n";
}

struct Stream {
  std::vector<ReferenceFrame> frames;
  std::vector<SolveReport> reports;
};

// Frames over [0, duration) streamed horizon by horizon.
Stream stream_frames(const ToolConfig& cfg, const GaitPattern& gait, const VelocityCommand& command, double duration,
                     ReferenceSource source, const std::optional<HeightField>& terrain) {
  if (!(duration > 0.0)) throw InvalidParameter("--horizon must be > 0");
  ReferenceGenerator gen(gait, command, cfg.generation, source);
  gen.set_terrain(terrain);
  const double ground = terrain ? terrain->height(0.0, 0.0) : 0.0;
  std::vector<ReferenceFrame> raw = gen.begin(MotionStart::standing(cfg.generation, 0.0, ground));
  Stream s;
  while (!raw.empty() && raw.back().time < duration - 1e-9) {
    const auto more = gen.continue_from(raw.back());
    if (more.empty()) break;
    raw.insert(raw.end(), more.begin(), more.end());
  }
  for (auto& f : raw)
    if (f.time < duration - 1e-9) s.frames.push_back(f);
  s.reports = gen.reports();
  return s;
}

std::optional<HeightField> terrain_for(const ToolConfig& cfg, std::uint64_t seed, bool enabled, double duration,
                                       double speed) {
  if (!enabled) return std::nullopt;
  std::mt19937_64 rng(seed);
  const RandomizationDraw d = sample_randomization(cfg.randomization, rng);
  const double reach = 2.0 + std::abs(speed) * duration;
  return perlin_heightfield(d.perlin_frequency, d.perlin_magnitude, d.terrain_seed, Vec2(2 * reach, 2 * reach), 0.02,
                            Vec2(-reach, -reach));
}

// ---------------------------------------------------------------- check

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

CheckResult check_gait_table(const ToolConfig& cfg) {
  for (const auto& g : cfg.gaits) {
    const GaitPattern back = gait_from_diagram(gait_diagram_from_csv(gait_diagram_csv(gait_diagram(g))), g.period, g.name);
    if (std::abs(back.duty_cycle - g.duty_cycle) > 1e-9) return {"gait_diagram_round_trip", false, g.name + " duty cycle"};
    for (int i = 0; i < 3; ++i)
      if (std::abs(back.phase_offsets[i] - g.phase_offsets[i]) > 1e-9)
        return {"gait_diagram_round_trip", false, g.name + " phase offsets"};
  }
  return {"gait_diagram_round_trip", true, ""};
}

CheckResult check_reward_unit(const ToolConfig& cfg) {
  const double e = std::exp(-1.0);
  const RewardConfig& r = cfg.reward;
  double worst = std::abs(reward_term(0.0, r.base_height, r.base_height) - e);
  worst = std::max(worst, std::abs(reward_term(0.0, r.yaw_rate, r.yaw_rate) - e));
  worst = std::max(worst, std::abs(reward_term(VecX(Vec3::Zero()), VecX(Vec3(r.base_velocity.x(), 0, 0)),
                                               VecX(r.base_velocity)) - e));
  const bool ok = worst <= 1e-12;
  return {"reward_unit_error", ok, ok ? "" : "deviation " + format_double(worst)};
}

CheckResult check_gradient(const ToolConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const GaitPattern gait = find_gait("trot", cfg.gaits);
  MotionStart start = MotionStart::standing(cfg.generation);
  start.v = Vec3(0.3 * u(rng), 0.3 * u(rng), 0.0);
  const OcpProblem p = make_problem(start, {0.5, 0.0, 0.0}, gait, 10 * cfg.generation.solver_dt, cfg.generation);
  const OcpStructure layout = analyze(p);
  VecX x = pack(layout, default_initial_guess(p));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 0.01 * u(rng);
  const VecX g = cost_gradient(p, unpack(layout, x), cfg.generation.weights, cfg.generation.solver);
  VecX fd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VecX a = x, b = x;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    fd[i] = (evaluate_cost(p, unpack(layout, a), cfg.generation.weights, cfg.generation.solver) -
             evaluate_cost(p, unpack(layout, b), cfg.generation.weights, cfg.generation.solver)) / 2e-6;
  }
  const double rel = (g - fd).lpNorm<Eigen::Infinity>() / std::max(fd.lpNorm<Eigen::Infinity>(), 1e-12);
  return {"cost_gradient", rel <= 1e-5, "relative error " + format_double(rel)};
}

CheckResult check_plant_rollout(const ToolConfig& cfg) {
  const GaitPattern gait = find_gait("trot", cfg.gaits);
  const ReferenceMotion m = generate_reference(MotionStart::standing(cfg.generation), {0.5, 0.0, 0.0}, gait,
                                               cfg.generation.horizon_periods * gait.period, cfg.generation);
  const OcpStructure layout = analyze(m.problem);
  PendulumPlant plant(m.problem.r0, m.problem.v0, m.problem.dt(), m.problem.gravity);
  double worst = 0.0;
  for (int k = 0; k < m.problem.steps(); ++k) {
    ControlInput in;
    in.h_ddot = m.solution.u.h_ddot[k];
    in.weights = m.solution.u.weights[k];
    plant.step(in, support_at(m.problem, layout, m.solution.u, k));
    worst = std::max(worst, (plant.position() - m.solution.x.r[k]).lpNorm<Eigen::Infinity>());
  }
  return {"plant_rollout_equivalence", worst == 0.0, "max deviation " + format_double(worst)};
}

CheckResult check_cop_feasibility(const ToolConfig& cfg) {
  for (const auto& gait : cfg.gaits) {
    const ReferenceMotion m = generate_reference(MotionStart::standing(cfg.generation), {0.5, 0.0, 0.0}, gait,
                                                 cfg.generation.horizon_periods * gait.period, cfg.generation);
    for (const auto& w : m.solution.u.weights) {
      if (w.empty()) continue;
      double sum = 0.0;
      for (double x : w) {
        if (x < -1e-8) return {"cop_feasibility", false, gait.name + ": negative weight"};
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-6) return {"cop_feasibility", false, gait.name + ": weights do not sum to one"};
    }
  }
  return {"cop_feasibility", true, ""};
}

// ---------------------------------------------------------------- subcommands

int cmd_generate(const Common& c, const Motion& m, double horizon, const std::string& format, bool terrain,
                 ReferenceSource source, std::ostream& out) {
  const ToolConfig cfg = config_of(c);
  const GaitPattern gait = find_gait(m.gait, cfg.gaits);
  const auto field = terrain_for(cfg, c.seed, terrain, horizon, std::hypot(m.vx, m.vy));
  const Stream s = stream_frames(cfg, gait, m.command(), horizon, source, field);
  const std::string dir = out_dir(c, cfg);
  const bool json = format == "json";
  const std::string stem = source == ReferenceSource::Optimal ? "frames" : "baseline_frames";
  write(dir, stem + (json ? ".json" : ".csv"), json ? frames_to_json(s.frames) : frames_to_csv(s.frames), out);
  if (source == ReferenceSource::Optimal) {
    write(dir, "solve_report.json", solve_reports_json(s.reports, c.timing), out);
    for (const auto& r : s.reports)
      if (!r.converged) {
        out << "warning: a horizon did not converge; output flagged as degraded\n";
        break;
      }
  }
  return 0;
}

int cmd_reward(const Common& c, const std::string& reference, const std::string& trajectory, std::ostream& out) {
  const ToolConfig cfg = config_of(c);
  const auto ref = import_trajectory(reference);
  const auto traj = import_trajectory(trajectory);
  if (ref.size() != traj.size()) throw InvalidParameter("reference and trajectory have different frame counts");
  std::vector<double> times;
  std::vector<RewardBreakdown> rows;
  double total = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (std::abs(ref[i].time - traj[i].time) > 1e-9) throw InvalidParameter("frame times differ at row " + std::to_string(i + 1));
    RobotSnapshot s;
    s.base_position = traj[i].base_position;
    s.yaw = traj[i].yaw;
    s.linear_velocity = traj[i].base_velocity;
    s.yaw_rate = traj[i].yaw_rate;
    s.feet = traj[i].feet;
    s.contact = traj[i].contact;
    if (i > 0) {
      const double dt = traj[i].time - traj[i - 1].time;
      for (int leg = 0; leg < kNumLegs; ++leg) s.foot_velocities[leg] = (traj[i].feet[leg] - traj[i - 1].feet[leg]) / dt;
    }
    rows.push_back(reward_breakdown(s, ref[i], Vec12::Zero(), Vec12::Zero(), cfg.reward));
    times.push_back(traj[i].time);
    total += rows.back().total();
  }
  write(out_dir(c, cfg), "rewards.csv", reward_csv(times, rows), out);
  out << "mean total reward " << format_double(rows.empty() ? 0.0 : total / rows.size()) << "\n";
  return 0;
}

int cmd_mpc(const Common& c, const Motion& m, double duration, const std::vector<std::string>& pushes,
            double random_push_time, bool latency, std::ostream& out) {
  ToolConfig cfg = config_of(c);
  if (latency) cfg.latency_enabled = true;
  const GaitPattern gait = find_gait(m.gait, cfg.gaits);
  std::vector<Disturbance> schedule;
  for (const auto& p : pushes) {
    std::vector<double> v;
    std::stringstream ss(p);
    std::string cell;
    while (std::getline(ss, cell, ':')) v.push_back(std::stod(cell));
    if (v.size() != 4) throw InvalidParameter("--push expects time:vx:vy:vz");
    schedule.push_back({v[0], Vec3(v[1], v[2], v[3]), Vec3::Zero()});
  }
  if (random_push_time >= 0.0) {
    std::mt19937_64 rng(c.seed);
    const RandomizationDraw d = sample_randomization(cfg.randomization, rng);
    schedule.push_back({random_push_time, d.linear_impulse, d.angular_impulse});
  }
  const auto t0 = std::chrono::steady_clock::now();
  const RunLog log = receding_horizon_run(m.command(), gait, duration, schedule, cfg.harness());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const TrackingReport rep = tracking_metrics(log, m.command(), {0.05, gait.period});
  const std::string dir = out_dir(c, cfg);
  write(dir, "run.csv", run_log_csv(log), out);
  write(dir, "run_summary.json", run_summary_json(log, rep), out);
  out << "mean velocity error " << format_double(rep.mean_velocity_error) << "\n";
  if (c.timing) out << "wall time " << wall << " s\n";
  if (log.singularity) {
    out << "run stopped: " << log.error << "\n";
    return 1;
  }
  return 0;
}

int cmd_gait_diagram(const Common& c, const std::string& name, std::ostream& out) {
  const ToolConfig cfg = config_of(c);
  const std::string csv = gait_diagram_csv(gait_diagram(find_gait(name, cfg.gaits)));
  write(out_dir(c, cfg), "gait_diagram_" + name + ".csv", csv, out);
  out << csv;
  return 0;
}

int cmd_check(const Common& c, std::ostream& out) {
  const ToolConfig cfg = config_of(c);
  const std::vector<std::function<CheckResult()>> checks = {
      [&] { return check_gait_table(cfg); },
      [&] { return check_reward_unit(cfg); },
      [&] { return check_gradient(cfg, c.seed); },
      [&] { return check_plant_rollout(cfg); },
      [&] { return check_cop_feasibility(cfg); },
  };
  int failed = 0;
  for (const auto& run : checks) {
    CheckResult r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r = {"(exception)", false, e.what()};
    }
    out << (r.ok ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : " (" + r.detail + ")") << "\n";
    failed += !r.ok;
  }
  return failed ? 1 : 0;
}

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Reference motion generation and closed-loop checks for quadruped gaits", "locomimic");
  app.require_subcommand(1);

  Common common;
  Motion motion;
  double horizon = 2.0;
  std::string format = "csv";
  bool terrain = false;
  auto* gen = app.add_subcommand("generate", "reference motions from the optimal control problem");
  add_common(gen, common);
  add_motion(gen, motion);
  gen->add_option("--horizon", horizon, "duration to generate (s)");
  gen->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  gen->add_flag("--terrain", terrain, "adjust to a Perlin terrain drawn from --seed");

  auto* base = app.add_subcommand("baseline", "kinematic reference motions");
  add_common(base, common);
  add_motion(base, motion);
  base->add_option("--horizon", horizon, "duration to generate (s)");
  base->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  base->add_flag("--terrain", terrain, "adjust to a Perlin terrain drawn from --seed");

  std::string reference, trajectory;
  auto* rew = app.add_subcommand("reward", "score a trajectory against a reference");
  add_common(rew, common);
  rew->add_option("--reference", reference, "reference frames (CSV or JSON)")->required();
  rew->add_option("--trajectory", trajectory, "tracked frames (CSV or JSON)")->required();

  double duration = 4.0;
  std::vector<std::string> pushes;
  double random_push = -1.0;
  bool latency = false;
  auto* mpc = app.add_subcommand("mpc-run", "receding-horizon run on the pendulum plant");
  add_common(mpc, common);
  add_motion(mpc, motion);
  mpc->add_option("--duration", duration, "run length (s)");
  mpc->add_option("--push", pushes, "impulse time:vx:vy:vz (repeatable)");
  mpc->add_option("--random-push", random_push, "time of an impulse drawn from the randomization ranges");
  mpc->add_flag("--latency", latency, "delay inputs by the configured actuator latency");

  std::string diagram_gait = "trot";
  auto* dia = app.add_subcommand("gait-diagram", "stance/swing intervals over one period");
  add_common(dia, common);
  dia->add_option("--gait", diagram_gait, "gait name");

  auto* chk = app.add_subcommand("check", "run the invariant suite");
  add_common(chk, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(common, motion, horizon, format, terrain, ReferenceSource::Optimal, out);
    if (base->parsed()) return cmd_generate(common, motion, horizon, format, terrain, ReferenceSource::Kinematic, out);
    if (rew->parsed()) return cmd_reward(common, reference, trajectory, out);
    if (mpc->parsed()) return cmd_mpc(common, motion, duration, pushes, random_push, latency, out);
    if (dia->parsed()) return cmd_gait_diagram(common, diagram_gait, out);
    if (chk->parsed()) return cmd_check(common, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace locomimic
