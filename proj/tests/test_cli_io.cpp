#include <doctest.h>

#include "locomimic/cli_io.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace locomimic;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("locomimic_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr) {
  std::ostringstream o, e;
  const int code = run_subcommand(args, o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return code;
}

std::vector<ReferenceFrame> random_frames(int n) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ReferenceFrame> frames(n);
  for (int i = 0; i < n; ++i) {
    auto& f = frames[i];
    f.time = 0.02 * i + 1e-3 * u(rng);
    f.base_position = Vec3(u(rng), u(rng), 0.3 + 0.01 * u(rng));
    f.base_velocity = Vec3(u(rng), u(rng), u(rng)) / 3.0;
    f.yaw = u(rng) * 3.0;
    f.yaw_rate = u(rng);
    for (int leg = 0; leg < kNumLegs; ++leg) {
      f.feet[leg] = Vec3(u(rng), u(rng), 0.05 * (u(rng) + 1));
      f.contact[leg] = u(rng) > 0;
      f.phase[leg] = u(rng) * 3.14159;
    }
  }
  return frames;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  const ToolConfig d = parse_config("");
  CHECK(d.gaits == builtin_gaits());
  CHECK(d.reward == RewardConfig{});
  CHECK(d.randomization == RandomizationConfig{});
  CHECK(d.ppo == PpoDefaults{});
  CHECK(d.generation.target_height == 0.32);
  CHECK(d.generation.frame_rate == 50.0);

  try {
    parse_config("gaits:\n  - name: trot\n    period: 0.5\n    duty_cycle: 1.3\n    phase_offsets: [0.5, 0.5, 0]\n");
    FAIL("accepted duty cycle 1.3");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("duty_cycle") != std::string::npos);
  }
  try {
    parse_config("reward:\n  base_heigth: 0.05\n");
    FAIL("accepted a misspelled key");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("base_heigth") != std::string::npos);
    CHECK(what.find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("reward:\n  base_height: -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("reward: [1, 2"), ConfigError);
  CHECK_THROWS_AS(parse_config("generation:\n  frame_rate: fast\n"), ConfigError);
}

TEST_CASE("config round trip") {
  ToolConfig c;
  c.reward.base_height = 0.07;
  c.generation.weights.height = 3.5;
  c.randomization.gravity_cone_deg = 5.0;
  c.control_dt = 0.01;
  c.output_dir = "elsewhere";
  c.gaits.push_back(GaitPattern{"walk", 0.8, 0.75, {0.5, 0.25, 0.75}});
  const ToolConfig back = parse_config(serialize_config(c));
  CHECK(serialize_config(back) == serialize_config(c));
  CHECK(back.gaits == c.gaits);
  CHECK(back.reward == c.reward);
  CHECK(back.output_dir == "elsewhere");
  CHECK(back.generation.weights.height == 3.5);
  CHECK(parse_config(serialize_config(ToolConfig{})).gaits == builtin_gaits());
  const fs::path shipped = fs::path(LOCOMIMIC_SOURCE_DIR) / "config" / "default.yaml";
  CHECK(serialize_config(load_config(shipped.string())) == serialize_config(ToolConfig{}));
}

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(0.0) == "0");
}

TEST_CASE("trajectory CSV and JSON") {
  const auto frames = random_frames(100);
  const std::string csv = frames_to_csv(frames);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 101);
  CHECK(csv.substr(0, csv.find('\n')).find("time,") == 0);
  CHECK(frame_columns().size() == 29);
  CHECK(frames_from_csv(csv) == frames);
  CHECK(frames_from_json(frames_to_json(frames)) == frames);

  const fs::path dir = scratch("traj");
  export_trajectory(frames, (dir / "a.csv").string(), TrajectoryFormat::Csv);
  export_trajectory(frames, (dir / "a.json").string(), TrajectoryFormat::Json);
  CHECK(import_trajectory((dir / "a.csv").string()) == import_trajectory((dir / "a.json").string()));
  CHECK_THROWS_AS(export_trajectory({}, (dir / "b.csv").string(), TrajectoryFormat::Csv), InvalidParameter);
  CHECK_THROWS_AS(frames_from_csv("time,x\n1,2\n"), Error);
}

TEST_CASE("gait diagram CSV") {
  const GaitPattern gallop = find_gait("gallop");
  const auto rows = gait_diagram(gallop);
  const auto back = gait_diagram_from_csv(gait_diagram_csv(rows));
  REQUIRE(back.size() == rows.size());
  const GaitPattern g = gait_from_diagram(back, gallop.period, "gallop");
  CHECK(std::abs(g.duty_cycle - 0.45) <= 1e-9);
  CHECK(std::abs(g.phase_offsets[0] - 0.75) <= 1e-9);
  CHECK(std::abs(g.phase_offsets[1] - 0.5) <= 1e-9);
  CHECK(std::abs(g.phase_offsets[2] - 0.25) <= 1e-9);
}

TEST_CASE("CLI subcommands") {
  const fs::path dir = scratch("cli");
  std::string out, err;
  CHECK(run({"gait-diagram", "--gait", "gallop", "--out", dir.string()}) == 0);
  const auto rows = gait_diagram_from_csv(slurp(dir / "gait_diagram_gallop.csv"));
  const GaitPattern g = gait_from_diagram(rows, 0.5, "gallop");
  CHECK(std::abs(g.duty_cycle - 0.45) <= 1e-9);

  CHECK(run({"generate", "--gait", "trot", "--vx", "0.5", "--horizon", "2", "--out", dir.string()}) == 0);
  const auto frames = frames_from_csv(slurp(dir / "frames.csv"));
  CHECK(frames.size() == 100);
  CHECK(fs::exists(dir / "solve_report.json"));

  CHECK(run({"baseline", "--gait", "trot", "--vx", "0.5", "--horizon", "1", "--out", dir.string()}) == 0);
  CHECK(run({"reward", "--reference", (dir / "frames.csv").string(), "--trajectory", (dir / "frames.csv").string(),
             "--out", dir.string()}) == 0);
  const std::string rewards = slurp(dir / "rewards.csv");
  CHECK(std::count(rewards.begin(), rewards.end(), '\n') == 101);

  CHECK(run({"mpc-run", "--gait", "trot", "--duration", "1", "--push", "0.5:0:0.3:0", "--out", dir.string()}) == 0);
  CHECK(fs::exists(dir / "run.csv"));
  CHECK(fs::exists(dir / "run_summary.json"));

  CHECK(run({"frobnicate"}, &out, &err) != 0);
  CHECK(run({}, &out, &err) != 0);
  CHECK(run({"generate", "--gait", "amble", "--out", dir.string()}, &out, &err) != 0);

  std::ofstream(dir / "bad.yaml") << "gaits:\n  - name: trot\n    period: 0.5\n    duty_cycle: 1.3\n    phase_offsets: [0.5, 0.5, 0]\n";
  CHECK(run({"check", "--config", (dir / "bad.yaml").string()}, &out, &err) == 3);
  CHECK(err.find("duty_cycle") != std::string::npos);
  const fs::path shipped = fs::path(LOCOMIMIC_SOURCE_DIR) / "config" / "default.yaml";
  CHECK(run({"check", "--config", shipped.string()}, &out, &err) == 0);
}
