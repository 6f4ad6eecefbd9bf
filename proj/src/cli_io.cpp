#include "locomimic/cli_io.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace locomimic {

using nlohmann::json;

// ---------------------------------------------------------------- numbers

std::string format_double(double x) {
  if (x == 0.0) return std::signbit(x) ? "-0" : "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s) {
  double x = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  if (b < e && *b == '+') ++b;
  const auto res = std::from_chars(b, e, x);
  if (res.ec != std::errc() || res.ptr != e) throw InvalidParameter("not a number: '" + s + "'");
  return x;
}

// ---------------------------------------------------------------- config reading

class Reader {
 public:
  Reader(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, "expected a mapping");
  }

  /// Reject keys that were never read.
  void finish(const std::set<std::string>& allowed) const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + qualified(key) + "'");
    }
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }
  YAML::Node child(const std::string& key) const { return has(key) ? node_[key] : YAML::Node(); }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void get(const std::string& key, double& out) const {
    if (has(key)) out = scalar(node_[key], key);
  }
  void get(const std::string& key, int& out) const {
    if (!has(key)) return;
    const double x = scalar(node_[key], key);
    if (x != std::floor(x)) fail(node_[key], qualified(key) + " must be an integer");
    out = static_cast<int>(x);
  }
  void get(const std::string& key, bool& out) const {
    if (!has(key)) return;
    try {
      out = node_[key].as<bool>();
    } catch (const YAML::Exception&) {
      fail(node_[key], qualified(key) + " must be true or false");
    }
  }
  void get(const std::string& key, std::string& out) const {
    if (!has(key)) return;
    if (!node_[key].IsScalar()) fail(node_[key], qualified(key) + " must be a string");
    out = node_[key].as<std::string>();
  }
  std::vector<double> list(const std::string& key, std::size_t size) const {
    const YAML::Node n = node_[key];
    if (!n.IsSequence() || (size && n.size() != size))
      fail(n, qualified(key) + " must be a list of " + std::to_string(size) + " numbers");
    std::vector<double> v;
    for (const auto& e : n) v.push_back(scalar(e, key));
    return v;
  }
  void get(const std::string& key, Vec3& out) const {
    if (!has(key)) return;
    const auto v = list(key, 3);
    out = Vec3(v[0], v[1], v[2]);
  }
  void get(const std::string& key, Range& out) const {
    if (!has(key)) return;
    const auto v = list(key, 2);
    out = {v[0], v[1]};
  }

  [[noreturn]] static void fail(const YAML::Node& n, const std::string& what) {
    const auto mark = n.Mark();
    if (mark.is_null()) throw ConfigError(what);
    throw ConfigError("line " + std::to_string(mark.line + 1) + ": " + what);
  }

 private:
  double scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, qualified(key) + " must be a number");
    try {
      return parse_double(n.Scalar());
    } catch (const InvalidParameter&) {
      fail(n, qualified(key) + " must be a number");
    }
  }

  YAML::Node node_;
  std::string path_;
};

GaitPattern read_gait(const YAML::Node& n, std::size_t index) {
  Reader r(n, "gaits[" + std::to_string(index) + "]");
  GaitPattern g;
  r.get("name", g.name);
  if (g.name.empty()) Reader::fail(n, "gaits[" + std::to_string(index) + "].name is required");
  r.get("period", g.period);
  r.get("duty_cycle", g.duty_cycle);
  if (r.has("phase_offsets")) {
    const auto v = r.list("phase_offsets", 3);
    g.phase_offsets = {v[0], v[1], v[2]};
  }
  r.finish({"name", "period", "duty_cycle", "phase_offsets"});
  const std::string where = "gaits." + g.name;
  if (!(g.period > 0.0)) Reader::fail(n, where + ".period must be > 0");
  if (!(g.duty_cycle > 0.0 && g.duty_cycle <= 1.0)) Reader::fail(n, where + ".duty_cycle must lie in (0, 1]");
  for (double o : g.phase_offsets)
    if (!(o >= 0.0 && o < 1.0)) Reader::fail(n, where + ".phase_offsets must lie in [0, 1)");
  return g;
}

void read_generation(const Reader& r, GenerationConfig& g) {
  r.get("frame_rate", g.frame_rate);
  r.get("solver_dt", g.solver_dt);
  r.get("horizon_periods", g.horizon_periods);
  r.get("lookahead_periods", g.lookahead_periods);
  r.get("target_height", g.target_height);
  r.get("swing_height", g.swing_height);
  r.get("raibert_gain", g.raibert_gain);
  r.get("terrain_time_constant", g.terrain_time_constant);
  r.get("queue_threshold_periods", g.queue_threshold_periods);
  r.get("gravity", g.gravity.g);
  if (r.has("hip_offsets")) {
    const YAML::Node n = r.child("hip_offsets");
    if (!n.IsSequence() || n.size() != kNumLegs)
      Reader::fail(n, r.qualified("hip_offsets") + " must list four [x, y] pairs");
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const YAML::Node p = n[leg];
      if (!p.IsSequence() || p.size() != 2) Reader::fail(p, r.qualified("hip_offsets") + " entries must be [x, y]");
      g.hip_offsets[leg] = Vec2(parse_double(p[0].Scalar()), parse_double(p[1].Scalar()));
    }
  }
  r.finish({"frame_rate", "solver_dt", "horizon_periods", "lookahead_periods", "target_height", "swing_height", "raibert_gain",
            "terrain_time_constant", "queue_threshold_periods", "gravity", "hip_offsets"});
}

void read_weights(const Reader& r, OcpWeights& w) {
  r.get("velocity", w.velocity);
  r.get("height", w.height);
  r.get("foothold", w.foothold);
  r.get("vertical_accel", w.vertical_accel);
  r.get("cop_weight", w.cop_weight);
  r.get("input_smoothness", w.input_smoothness);
  r.get("weight_sum", w.weight_sum);
  r.get("weight_nonneg", w.weight_nonneg);
  r.get("accel_bounds", w.accel_bounds);
  r.finish({"velocity", "height", "foothold", "vertical_accel", "cop_weight", "input_smoothness", "weight_sum",
            "weight_nonneg", "accel_bounds"});
}

void read_solver(const Reader& r, SolverOptions& s) {
  r.get("max_iterations", s.max_iterations);
  r.get("gradient_tolerance", s.gradient_tolerance);
  r.get("armijo", s.armijo);
  r.get("max_backtracks", s.max_backtracks);
  r.get("max_outer_iterations", s.max_outer_iterations);
  r.get("feasibility_tolerance", s.feasibility_tolerance);
  r.get("h_ddot_max", s.h_ddot_max);
  r.finish({"max_iterations", "gradient_tolerance", "armijo", "max_backtracks", "max_outer_iterations",
            "feasibility_tolerance", "h_ddot_max"});
}

void read_reward(const Reader& r, RewardConfig& c) {
  r.get("base_height", c.base_height);
  r.get("base_velocity", c.base_velocity);
  r.get("yaw_rate", c.yaw_rate);
  r.get("feet_position", c.feet_position);
  r.get("action_rate", c.action_rate);
  r.get("feet_slip", c.feet_slip);
  r.get("pitch_roll", c.pitch_roll);
  r.get("min_base_height", c.min_base_height);
  r.get("max_tilt", c.max_tilt);
  r.finish({"base_height", "base_velocity", "yaw_rate", "feet_position", "action_rate", "feet_slip", "pitch_roll",
            "min_base_height", "max_tilt"});
}

void read_randomization(const Reader& r, RandomizationConfig& c) {
  r.get("linear_impulse", c.linear_impulse);
  r.get("angular_impulse", c.angular_impulse);
  r.get("friction", c.friction);
  r.get("perlin_frequency", c.perlin_frequency);
  r.get("perlin_magnitude", c.perlin_magnitude);
  r.get("gravity_cone_deg", c.gravity_cone_deg);
  r.get("actuator_latency", c.actuator_latency);
  r.finish({"linear_impulse", "angular_impulse", "friction", "perlin_frequency", "perlin_magnitude",
            "gravity_cone_deg", "actuator_latency"});
}

void read_ppo(const Reader& r, PpoDefaults& p) {
  r.get("batch_size", p.batch_size);
  r.get("epochs", p.epochs);
  r.get("value_loss_coef", p.value_loss_coef);
  r.get("entropy_coef", p.entropy_coef);
  r.get("discount", p.discount);
  r.get("learning_rate", p.learning_rate);
  r.get("episode_length", p.episode_length);
  r.get("initial_std", p.initial_std);
  if (r.has("seeds")) {
    p.seeds.clear();
    for (double s : r.list("seeds", 0)) p.seeds.push_back(static_cast<int>(s));
  }
  r.finish({"batch_size", "epochs", "value_loss_coef", "entropy_coef", "discount", "learning_rate", "episode_length",
            "initial_std", "seeds"});
}

void positive(double x, const std::string& key) {
  if (!(x > 0.0)) throw ConfigError(key + " must be > 0");
}

// ---------------------------------------------------------------- config writing

std::string num(double x) { return format_double(x); }

std::string list(std::initializer_list<double> xs) {
  std::string s = "[";
  bool first = true;
  for (double x : xs) {
    if (!first) s += ", ";
    s += num(x);
    first = false;
  }
  return s + "]";
}

std::string list(const Vec3& v) { return list({v.x(), v.y(), v.z()}); }

// ---------------------------------------------------------------- files

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << content;
  if (!f) throw Error("cannot write " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

template <typename Row>
std::string join(const Row& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + '\n';
}

std::vector<std::string> frame_cells(const ReferenceFrame& f) {
  std::vector<std::string> c;
  c.push_back(num(f.time));
  for (int i = 0; i < 3; ++i) c.push_back(num(f.base_position[i]));
  for (int i = 0; i < 3; ++i) c.push_back(num(f.base_velocity[i]));
  c.push_back(num(f.yaw));
  c.push_back(num(f.yaw_rate));
  for (int leg = 0; leg < kNumLegs; ++leg)
    for (int i = 0; i < 3; ++i) c.push_back(num(f.feet[leg][i]));
  for (int leg = 0; leg < kNumLegs; ++leg) c.push_back(f.contact[leg] ? "1" : "0");
  for (int leg = 0; leg < kNumLegs; ++leg) c.push_back(num(f.phase[leg]));
  return c;
}

json frame_json(const ReferenceFrame& f) {
  json j;
  j["time"] = f.time;
  j["base_position"] = {f.base_position.x(), f.base_position.y(), f.base_position.z()};
  j["base_velocity"] = {f.base_velocity.x(), f.base_velocity.y(), f.base_velocity.z()};
  j["yaw"] = f.yaw;
  j["yaw_rate"] = f.yaw_rate;
  j["feet"] = json::array();
  for (const auto& p : f.feet) j["feet"].push_back({p.x(), p.y(), p.z()});
  j["contact"] = json::array();
  for (bool c : f.contact) j["contact"].push_back(c);
  j["phase"] = json::array();
  for (double p : f.phase) j["phase"].push_back(p);
  return j;
}

Vec3 vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

// nlohmann prints doubles with max_digits10 already; dump() keeps them lossless.
std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

// ---------------------------------------------------------------- ToolConfig

void ToolConfig::validate() const {
  if (gaits.empty()) throw ConfigError("gaits must not be empty");
  std::set<std::string> names;
  for (const auto& g : gaits) {
    if (!names.insert(g.name).second) throw ConfigError("gaits: duplicate gait '" + g.name + "'");
    if (!(g.period > 0.0)) throw ConfigError("gaits." + g.name + ".period must be > 0");
    if (!(g.duty_cycle > 0.0 && g.duty_cycle <= 1.0)) throw ConfigError("gaits." + g.name + ".duty_cycle must lie in (0, 1]");
    for (double o : g.phase_offsets)
      if (!(o >= 0.0 && o < 1.0)) throw ConfigError("gaits." + g.name + ".phase_offsets must lie in [0, 1)");
  }
  const GenerationConfig& g = generation;
  positive(g.frame_rate, "generation.frame_rate");
  positive(g.solver_dt, "generation.solver_dt");
  positive(g.horizon_periods, "generation.horizon_periods");
  if (!(g.lookahead_periods >= 0.0)) throw ConfigError("generation.lookahead_periods must be >= 0");
  positive(g.target_height, "generation.target_height");
  if (!(g.swing_height >= 0.0)) throw ConfigError("generation.swing_height must be >= 0");
  if (!(g.raibert_gain >= 0.0)) throw ConfigError("generation.raibert_gain must be >= 0");
  positive(g.terrain_time_constant, "generation.terrain_time_constant");
  positive(g.queue_threshold_periods, "generation.queue_threshold_periods");
  positive(g.gravity.norm(), "generation.gravity");
  try {
    g.weights.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(std::string("weights: ") + e.what());
  }
  const SolverOptions& s = g.solver;
  if (s.max_iterations < 1) throw ConfigError("solver.max_iterations must be >= 1");
  positive(s.gradient_tolerance, "solver.gradient_tolerance");
  if (!(s.armijo > 0.0 && s.armijo < 0.5)) throw ConfigError("solver.armijo must lie in (0, 0.5)");
  if (s.max_backtracks < 1) throw ConfigError("solver.max_backtracks must be >= 1");
  if (s.max_outer_iterations < 1) throw ConfigError("solver.max_outer_iterations must be >= 1");
  positive(s.feasibility_tolerance, "solver.feasibility_tolerance");
  positive(s.h_ddot_max, "solver.h_ddot_max");
  try {
    reward.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("reward: ") + e.what());
  }
  try {
    randomization.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("randomization.") + e.what());
  }
  positive(control_dt, "harness.control_dt");
  if (ppo.batch_size < 1) throw ConfigError("ppo.batch_size must be >= 1");
  if (ppo.epochs < 1) throw ConfigError("ppo.epochs must be >= 1");
  if (ppo.episode_length < 1) throw ConfigError("ppo.episode_length must be >= 1");
  if (!(ppo.discount > 0.0 && ppo.discount <= 1.0)) throw ConfigError("ppo.discount must lie in (0, 1]");
  positive(ppo.learning_rate, "ppo.learning_rate");
  positive(ppo.initial_std, "ppo.initial_std");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

HarnessConfig ToolConfig::harness() const {
  HarnessConfig h;
  h.generation = generation;
  h.reward = reward;
  h.control_dt = control_dt;
  h.latency = latency_enabled ? randomization.actuator_latency : 0.0;
  return h;
}

ToolConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ToolConfig cfg;
  if (!root || root.IsNull()) {
    cfg.validate();
    return cfg;
  }
  const Reader top(root, "");
  if (top.has("gaits")) {
    const YAML::Node list = root["gaits"];
    if (!list.IsSequence()) Reader::fail(list, "gaits must be a list");
    cfg.gaits.clear();
    for (std::size_t i = 0; i < list.size(); ++i) cfg.gaits.push_back(read_gait(list[i], i));
  }
  if (top.has("generation")) read_generation(Reader(root["generation"], "generation"), cfg.generation);
  if (top.has("weights")) read_weights(Reader(root["weights"], "weights"), cfg.generation.weights);
  if (top.has("solver")) read_solver(Reader(root["solver"], "solver"), cfg.generation.solver);
  if (top.has("reward")) read_reward(Reader(root["reward"], "reward"), cfg.reward);
  if (top.has("randomization"))
    read_randomization(Reader(root["randomization"], "randomization"), cfg.randomization);
  if (top.has("harness")) {
    const Reader h(root["harness"], "harness");
    h.get("control_dt", cfg.control_dt);
    h.get("latency_enabled", cfg.latency_enabled);
    h.finish({"control_dt", "latency_enabled"});
  }
  if (top.has("ppo")) read_ppo(Reader(root["ppo"], "ppo"), cfg.ppo);
  top.get("output_dir", cfg.output_dir);
  top.finish({"gaits", "generation", "weights", "solver", "reward", "randomization", "harness", "ppo", "output_dir"});
  cfg.validate();
  return cfg;
}

ToolConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ToolConfig& c) {
  std::ostringstream o;
  o << "output_dir: \"" << c.output_dir << "\"\n";
  o << "gaits:\n";
  for (const auto& g : c.gaits)
    o << "  - {name: " << g.name << ", period: " << num(g.period) << ", duty_cycle: " << num(g.duty_cycle)
      << ", phase_offsets: " << list({g.phase_offsets[0], g.phase_offsets[1], g.phase_offsets[2]}) << "}\n";
  const GenerationConfig& g = c.generation;
  o << "generation:\n"
    << "  frame_rate: " << num(g.frame_rate) << "\n"
    << "  solver_dt: " << num(g.solver_dt) << "\n"
    << "  horizon_periods: " << num(g.horizon_periods) << "\n"
    << "  lookahead_periods: " << num(g.lookahead_periods) << "\n"
    << "  target_height: " << num(g.target_height) << "\n"
    << "  swing_height: " << num(g.swing_height) << "\n"
    << "  raibert_gain: " << num(g.raibert_gain) << "\n"
    << "  terrain_time_constant: " << num(g.terrain_time_constant) << "\n"
    << "  queue_threshold_periods: " << num(g.queue_threshold_periods) << "\n"
    << "  gravity: " << list(g.gravity.g) << "\n"
    << "  hip_offsets: [";
  for (int leg = 0; leg < kNumLegs; ++leg)
    o << (leg ? ", " : "") << list({g.hip_offsets[leg].x(), g.hip_offsets[leg].y()});
  o << "]\n";
  const OcpWeights& w = g.weights;
  o << "weights:\n"
    << "  velocity: " << num(w.velocity) << "\n"
    << "  height: " << num(w.height) << "\n"
    << "  foothold: " << num(w.foothold) << "\n"
    << "  vertical_accel: " << num(w.vertical_accel) << "\n"
    << "  cop_weight: " << num(w.cop_weight) << "\n"
    << "  input_smoothness: " << num(w.input_smoothness) << "\n"
    << "  weight_sum: " << num(w.weight_sum) << "\n"
    << "  weight_nonneg: " << num(w.weight_nonneg) << "\n"
    << "  accel_bounds: " << num(w.accel_bounds) << "\n";
  const SolverOptions& s = g.solver;
  o << "solver:\n"
    << "  max_iterations: " << s.max_iterations << "\n"
    << "  gradient_tolerance: " << num(s.gradient_tolerance) << "\n"
    << "  armijo: " << num(s.armijo) << "\n"
    << "  max_backtracks: " << s.max_backtracks << "\n"
    << "  max_outer_iterations: " << s.max_outer_iterations << "\n"
    << "  feasibility_tolerance: " << num(s.feasibility_tolerance) << "\n"
    << "  h_ddot_max: " << num(s.h_ddot_max) << "\n";
  const RewardConfig& r = c.reward;
  o << "reward:\n"
    << "  base_height: " << num(r.base_height) << "\n"
    << "  base_velocity: " << list(r.base_velocity) << "\n"
    << "  yaw_rate: " << num(r.yaw_rate) << "\n"
    << "  feet_position: " << list(r.feet_position) << "\n"
    << "  action_rate: " << num(r.action_rate) << "\n"
    << "  feet_slip: " << num(r.feet_slip) << "\n"
    << "  pitch_roll: " << num(r.pitch_roll) << "\n"
    << "  min_base_height: " << num(r.min_base_height) << "\n"
    << "  max_tilt: " << num(r.max_tilt) << "\n";
  const RandomizationConfig& d = c.randomization;
  auto range = [](const Range& x) { return list({x.lo, x.hi}); };
  o << "randomization:\n"
    << "  linear_impulse: " << range(d.linear_impulse) << "\n"
    << "  angular_impulse: " << range(d.angular_impulse) << "\n"
    << "  friction: " << range(d.friction) << "\n"
    << "  perlin_frequency: " << range(d.perlin_frequency) << "\n"
    << "  perlin_magnitude: " << range(d.perlin_magnitude) << "\n"
    << "  gravity_cone_deg: " << num(d.gravity_cone_deg) << "\n"
    << "  actuator_latency: " << num(d.actuator_latency) << "\n";
  o << "harness:\n"
    << "  control_dt: " << num(c.control_dt) << "\n"
    << "  latency_enabled: " << (c.latency_enabled ? "true" : "false") << "\n";
  const PpoDefaults& p = c.ppo;
  o << "ppo:\n"
    << "  batch_size: " << p.batch_size << "\n"
    << "  epochs: " << p.epochs << "\n"
    << "  value_loss_coef: " << num(p.value_loss_coef) << "\n"
    << "  entropy_coef: " << num(p.entropy_coef) << "\n"
    << "  discount: " << num(p.discount) << "\n"
    << "  learning_rate: " << num(p.learning_rate) << "\n"
    << "  episode_length: " << p.episode_length << "\n"
    << "  initial_std: " << num(p.initial_std) << "\n"
    << "  seeds: [";
  for (std::size_t i = 0; i < p.seeds.size(); ++i) o << (i ? ", " : "") << p.seeds[i];
  o << "]\n";
  return o.str();
}

// ---------------------------------------------------------------- trajectories

const std::vector<std::string>& frame_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c = {"time", "base_x", "base_y", "base_z", "vel_x", "vel_y", "vel_z", "yaw", "yaw_rate"};
    for (const char* leg : kLegNames)
      for (const char* a : {"x", "y", "z"}) c.push_back(std::string("foot_") + leg + "_" + a);
    for (const char* leg : kLegNames) c.push_back(std::string("contact_") + leg);
    for (const char* leg : kLegNames) c.push_back(std::string("phase_") + leg);
    return c;
  }();
  return cols;
}

std::string frames_to_csv(const std::vector<ReferenceFrame>& frames) {
  std::string s = join(frame_columns());
  for (const auto& f : frames) s += join(frame_cells(f));
  return s;
}

std::string frames_to_json(const std::vector<ReferenceFrame>& frames) {
  json j = json::array();
  for (const auto& f : frames) j.push_back(frame_json(f));
  return dump(json{{"frames", j}});
}

std::vector<ReferenceFrame> frames_from_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || split(lines[0]) != frame_columns()) throw InvalidParameter("frames CSV header mismatch");
  std::vector<ReferenceFrame> frames;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split(lines[i]);
    if (c.size() != frame_columns().size())
      throw InvalidParameter("frames CSV line " + std::to_string(i + 1) + ": wrong column count");
    std::size_t k = 0;
    auto next = [&] { return parse_double(c[k++]); };
    ReferenceFrame f;
    f.time = next();
    for (int a = 0; a < 3; ++a) f.base_position[a] = next();
    for (int a = 0; a < 3; ++a) f.base_velocity[a] = next();
    f.yaw = next();
    f.yaw_rate = next();
    for (int leg = 0; leg < kNumLegs; ++leg)
      for (int a = 0; a < 3; ++a) f.feet[leg][a] = next();
    for (int leg = 0; leg < kNumLegs; ++leg) f.contact[leg] = next() != 0.0;
    for (int leg = 0; leg < kNumLegs; ++leg) f.phase[leg] = next();
    frames.push_back(f);
  }
  return frames;
}

std::vector<ReferenceFrame> frames_from_json(const std::string& text) {
  std::vector<ReferenceFrame> frames;
  try {
    const json root = json::parse(text);
    for (const auto& j : root.at("frames")) {
      ReferenceFrame f;
      f.time = j.at("time").get<double>();
      f.base_position = vec3_from(j.at("base_position"));
      f.base_velocity = vec3_from(j.at("base_velocity"));
      f.yaw = j.at("yaw").get<double>();
      f.yaw_rate = j.at("yaw_rate").get<double>();
      for (int leg = 0; leg < kNumLegs; ++leg) {
        f.feet[leg] = vec3_from(j.at("feet").at(leg));
        f.contact[leg] = j.at("contact").at(leg).get<bool>();
        f.phase[leg] = j.at("phase").at(leg).get<double>();
      }
      frames.push_back(f);
    }
  } catch (const json::exception& e) {
    throw InvalidParameter(std::string("frames JSON: ") + e.what());
  }
  return frames;
}

void export_trajectory(const std::vector<ReferenceFrame>& frames, const std::string& path, TrajectoryFormat format) {
  if (frames.empty()) throw InvalidParameter("nothing to export");
  write_file(path, format == TrajectoryFormat::Csv ? frames_to_csv(frames) : frames_to_json(frames));
}

std::vector<ReferenceFrame> import_trajectory(const std::string& path) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return frames_from_json(text);
  return frames_from_csv(text);
}

// ---------------------------------------------------------------- reports

std::string solve_reports_json(const std::vector<SolveReport>& reports, bool include_wall_time) {
  json arr = json::array();
  for (const auto& r : reports) {
    json j;
    j["iterations"] = r.iterations;
    j["outer_iterations"] = r.outer_iterations;
    j["converged"] = r.converged;
    j["stalled"] = r.stalled;
    j["final_cost"] = r.final_cost;
    j["gradient_norm"] = r.gradient_norm;
    j["max_weight_sum_violation"] = r.max_weight_sum_violation;
    j["min_weight"] = r.min_weight;
    j["rejected_steps"] = r.rejected_steps;
    j["cost_trace"] = r.cost_trace;
    j["trace_phase"] = r.trace_phase;
    if (include_wall_time) j["wall_time"] = r.wall_time;
    arr.push_back(j);
  }
  return dump(json{{"reports", arr}});
}

std::string reward_csv(const std::vector<double>& times, const std::vector<RewardBreakdown>& rewards) {
  if (times.size() != rewards.size()) throw InvalidParameter("reward rows and times differ in length");
  std::vector<std::string> header{"time"};
  for (const auto& c : reward_columns()) header.push_back(c);
  std::string s = join(header);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const RewardBreakdown& b = rewards[i];
    s += join(std::vector<std::string>{num(times[i]), num(b.height), num(b.velocity), num(b.yaw_rate), num(b.feet),
                                       num(b.action_rate), num(b.slip), num(b.pitch_roll), num(b.imitation()),
                                       num(b.regularizer()), num(b.total())});
  }
  return s;
}

std::string gait_diagram_csv(const std::vector<GaitInterval>& rows) {
  std::string s = "leg,interval_start,interval_end,contact_flag\n";
  for (const auto& r : rows)
    s += join(std::vector<std::string>{kLegNames[r.leg], num(r.start), num(r.end), r.contact ? "1" : "0"});
  return s;
}

std::vector<GaitInterval> gait_diagram_from_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "leg,interval_start,interval_end,contact_flag")
    throw InvalidParameter("gait diagram CSV header mismatch");
  std::vector<GaitInterval> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split(lines[i]);
    if (c.size() != 4) throw InvalidParameter("gait diagram CSV line " + std::to_string(i + 1) + ": wrong column count");
    GaitInterval r;
    r.leg = -1;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (c[0] == kLegNames[leg]) r.leg = leg;
    if (r.leg < 0) throw InvalidParameter("gait diagram CSV: unknown leg '" + c[0] + "'");
    r.start = parse_double(c[1]);
    r.end = parse_double(c[2]);
    r.contact = c[3] == "1";
    rows.push_back(r);
  }
  return rows;
}

std::string run_log_csv(const RunLog& log) {
  std::vector<std::string> header = {"time",  "x",     "y",     "z",     "vx",    "vy",    "vz",  "h_ddot",
                                     "cop_x", "cop_y", "cop_z", "imp_x", "imp_y", "imp_z", "ref_x", "ref_y",
                                     "ref_z", "ref_vx", "ref_vy", "ref_vz"};
  for (const char* leg : kLegNames) header.push_back(std::string("contact_") + leg);
  for (const char* leg : kLegNames)
    for (const char* a : {"x", "y", "z"}) header.push_back(std::string("foot_") + leg + "_" + a);
  for (const auto& c : reward_columns()) header.push_back("reward_" + c);
  header.push_back("solver_iterations");
  header.push_back("degraded");
  std::string s = join(header);
  for (const auto& st : log.steps) {
    std::vector<std::string> c;
    c.push_back(num(st.time));
    for (int a = 0; a < 3; ++a) c.push_back(num(st.state.r[a]));
    for (int a = 0; a < 3; ++a) c.push_back(num(st.state.v[a]));
    c.push_back(num(st.input.h_ddot));
    Vec3 cop = Vec3::Zero();
    int w = 0;
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (st.contact[leg] && w < static_cast<int>(st.input.weights.size())) cop += st.input.weights[w++] * st.feet[leg];
    for (int a = 0; a < 3; ++a) c.push_back(w ? num(cop[a]) : "nan");
    for (int a = 0; a < 3; ++a) c.push_back(num(st.impulse[a]));
    for (int a = 0; a < 3; ++a) c.push_back(num(st.reference.base_position[a]));
    for (int a = 0; a < 3; ++a) c.push_back(num(st.reference.base_velocity[a]));
    for (int leg = 0; leg < kNumLegs; ++leg) c.push_back(st.contact[leg] ? "1" : "0");
    for (int leg = 0; leg < kNumLegs; ++leg)
      for (int a = 0; a < 3; ++a) c.push_back(num(st.feet[leg][a]));
    const RewardBreakdown& b = st.reward;
    for (double x : {b.height, b.velocity, b.yaw_rate, b.feet, b.action_rate, b.slip, b.pitch_roll, b.imitation(),
                     b.regularizer(), b.total()})
      c.push_back(num(x));
    c.push_back(std::to_string(st.solver_iterations));
    c.push_back(st.degraded ? "1" : "0");
    s += join(c);
  }
  return s;
}

std::string run_summary_json(const RunLog& log, const TrackingReport& rep) {
  json j;
  j["gait"] = log.gait;
  j["command"] = {log.command.forward, log.command.lateral, log.command.yaw_rate};
  j["dt"] = log.dt;
  j["steps"] = log.steps.size();
  j["singularity"] = log.singularity;
  j["error"] = log.error;
  int degraded = 0, max_iter = 0;
  for (const auto& s : log.steps) {
    degraded += s.degraded;
    max_iter = std::max(max_iter, s.solver_iterations);
  }
  j["degraded_steps"] = degraded;
  j["max_solver_iterations"] = max_iter;
  j["mean_velocity_error"] = rep.mean_velocity_error;
  j["max_velocity_error"] = rep.max_velocity_error;
  j["height_rmse"] = rep.height_rmse;
  j["recovery_times"] = rep.recovery_times;
  json d = json::array();
  for (const auto& x : log.disturbances)
    d.push_back({{"time", x.time},
                 {"linear", {x.linear.x(), x.linear.y(), x.linear.z()}},
                 {"angular", {x.angular.x(), x.angular.y(), x.angular.z()}}});
  j["disturbances"] = d;
  const RewardBreakdown& b = rep.mean_reward;
  j["mean_reward"] = {{"height", b.height},         {"velocity", b.velocity}, {"yaw_rate", b.yaw_rate},
                      {"feet", b.feet},             {"action_rate", b.action_rate}, {"slip", b.slip},
                      {"pitch_roll", b.pitch_roll}};
  return dump(j);
}

}  // namespace locomimic
