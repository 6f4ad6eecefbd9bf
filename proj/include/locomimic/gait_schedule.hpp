#pragma once

#include "locomimic/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace locomimic {

/// A periodic gait: period, duty cycle and the phase offsets of FR, HL, HR
/// relative to FL.
struct GaitPattern {
  std::string name;
  double period = 0.5;
  double duty_cycle = 0.5;
  std::array<double, 3> phase_offsets{0.0, 0.0, 0.0};

  /// Offset of any leg; FL is 0.
  double offset(int leg) const { return leg == 0 ? 0.0 : phase_offsets[leg - 1]; }
  double stance_duration() const { return duty_cycle * period; }
  double swing_duration() const { return (1.0 - duty_cycle) * period; }

  /// Throws InvalidParameter when a field is out of range.
  void validate() const;

  bool operator==(const GaitPattern&) const = default;
};

/// Trot, pace, pronk, bound and gallop as published in the gait table.
const std::vector<GaitPattern>& builtin_gaits();
/// Lookup in `library`, falling back to builtin_gaits(). Throws InvalidParameter.
GaitPattern find_gait(const std::string& name, const std::vector<GaitPattern>& library = {});

/// Normalized leg phase in [0,1): frac(t/period - offset). Values within 1e-9
/// of a whole cycle snap to 0 so grid times land on exact boundaries.
double leg_phase(const GaitPattern& gait, int leg, double t);
/// Stance iff phase < duty (phase == duty starts the swing).
bool in_stance(const GaitPattern& gait, int leg, double t);

/// Time of the most recent stance onset at or before t (only meaningful when
/// the leg is in stance at t).
double stance_onset(const GaitPattern& gait, int leg, double t);
/// Time of the most recent lift-off at or before t (leg in swing at t).
double swing_onset(const GaitPattern& gait, int leg, double t);

struct ContactTimeline {
  GaitPattern gait;
  double dt = 0.025;
  double start_time = 0.0;
  int steps = 0;
  /// contact[leg][k] for k in [0, steps)
  PerLeg<std::vector<bool>> contact;
  /// phase[leg][k] normalized gait phase at start_time + k*dt
  PerLeg<std::vector<double>> phase;
  /// Contact at the closing sample start_time + steps*dt; used to detect
  /// touchdowns that land exactly on the horizon end.
  PerLeg<bool> terminal_contact{};

  double time(int k) const { return start_time + k * dt; }
  int stance_count(int k) const;
};

/// Discretize a gait over `horizon_steps` samples of width dt.
ContactTimeline make_timeline(const GaitPattern& gait, double start_time, int horizon_steps, double dt);

struct LegPhase {
  double angle = 0.0;  // swing in [-pi, 0), stance in [0, pi)
  double sin = 0.0;
  double cos = 1.0;
};

PerLeg<LegPhase> phase_variables(const GaitPattern& gait, double t);

struct Footfall {
  int leg = 0;
  int step = 0;       // grid index of the first stance sample
  double time = 0.0;  // start_time + step*dt
};

/// One entry per swing->stance transition in the timeline, including a
/// touchdown that falls on the closing sample. Sorted by time, ties FL, FR, HL, HR.
std::vector<Footfall> footfall_sequence(const ContactTimeline& timeline);

/// A single row of a Hildebrand-style gait diagram.
struct GaitInterval {
  int leg = 0;
  double start = 0.0;
  double end = 0.0;
  bool contact = false;
};

/// Continuous-time stance/swing intervals of each leg over one period
/// starting at t = 0.
std::vector<GaitInterval> gait_diagram(const GaitPattern& gait);

/// Re-derive period, duty cycle and offsets from diagram rows; values are
/// snapped to a 1e-9 grid.
GaitPattern gait_from_diagram(const std::vector<GaitInterval>& rows, double period, const std::string& name = {});

}  // namespace locomimic
