#pragma once

// Config loading, trajectory and run-log serialization, and the CLI surface.

#include "locomimic/eval_harness.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace locomimic {

/// Training hyperparameters kept for reference only; nothing here trains.
struct PpoDefaults {
  int batch_size = 512;
  int epochs = 10;
  double value_loss_coef = 0.5;
  double entropy_coef = 0.01;
  double discount = 0.95;
  double learning_rate = 5e-5;
  int episode_length = 128;
  double initial_std = 0.36787944117144233;  // exp(-1)
  std::vector<int> seeds{0, 1, 10, 42, 1234};
  bool operator==(const PpoDefaults&) const = default;
};

struct ToolConfig {
  std::vector<GaitPattern> gaits = builtin_gaits();
  GenerationConfig generation;
  RewardConfig reward;
  RandomizationConfig randomization;
  double control_dt = 0.02;     // s, replanning period of the harness
  bool latency_enabled = false; // apply randomization.actuator_latency in mpc-run
  PpoDefaults ppo;
  std::string output_dir = "out";

  /// Throws ConfigError naming the offending key.
  void validate() const;
  HarnessConfig harness() const;
};

/// Parse YAML text. Empty text gives the defaults. Unknown keys, malformed
/// input and out-of-range values throw ConfigError.
ToolConfig parse_config(const std::string& text);
ToolConfig load_config(const std::string& path);
std::string serialize_config(const ToolConfig& cfg);

/// Shortest round-trippable form with 17 significant digits.
std::string format_double(double x);

enum class TrajectoryFormat { Csv, Json };

/// time, base xyz, velocity xyz, yaw, yaw_rate, 4 x foot xyz, 4 x contact, 4 x phase.
const std::vector<std::string>& frame_columns();
std::string frames_to_csv(const std::vector<ReferenceFrame>& frames);
std::string frames_to_json(const std::vector<ReferenceFrame>& frames);
std::vector<ReferenceFrame> frames_from_csv(const std::string& text);
std::vector<ReferenceFrame> frames_from_json(const std::string& text);
/// Throws InvalidParameter on empty frames, Error when the file cannot be written.
void export_trajectory(const std::vector<ReferenceFrame>& frames, const std::string& path, TrajectoryFormat format);
std::vector<ReferenceFrame> import_trajectory(const std::string& path);

std::string solve_reports_json(const std::vector<SolveReport>& reports, bool include_wall_time = false);
std::string reward_csv(const std::vector<double>& times, const std::vector<RewardBreakdown>& rewards);
std::string gait_diagram_csv(const std::vector<GaitInterval>& rows);
std::vector<GaitInterval> gait_diagram_from_csv(const std::string& text);
std::string run_log_csv(const RunLog& log);
std::string run_summary_json(const RunLog& log, const TrackingReport& report);

/// Entry point behind the executable; args excludes the program name.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace locomimic
