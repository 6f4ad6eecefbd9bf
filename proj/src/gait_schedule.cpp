#include "locomimic/gait_schedule.hpp"

#include <algorithm>
#include <cmath>

namespace locomimic {

namespace {

constexpr double kPhaseSnap = 1e-9;

double snap(double x, double grid = 1e-9) { return std::round(x / grid) * grid; }

double frac(double x) {
  double f = x - std::floor(x);
  if (f < kPhaseSnap || 1.0 - f < kPhaseSnap) f = 0.0;
  return f;
}

}  // namespace

void GaitPattern::validate() const {
  if (!(period > 0.0)) throw InvalidParameter("gait '" + name + "': period must be > 0");
  if (!(duty_cycle > 0.0 && duty_cycle <= 1.0))
    throw InvalidParameter("gait '" + name + "': duty_cycle must lie in (0, 1]");
  for (double o : phase_offsets)
    if (!(o >= 0.0 && o < 1.0)) throw InvalidParameter("gait '" + name + "': phase offsets must lie in [0, 1)");
}

const std::vector<GaitPattern>& builtin_gaits() {
  static const std::vector<GaitPattern> gaits = {
      {"trot", 0.5, 0.5, {0.5, 0.5, 0.0}},
      {"pace", 0.5, 0.6, {0.5, 0.0, 0.5}},
      {"pronk", 0.4, 0.6, {0.0, 0.0, 0.0}},
      {"bound", 0.4, 0.6, {0.0, 0.5, 0.5}},
      {"gallop", 0.5, 0.45, {0.75, 0.5, 0.25}},
  };
  return gaits;
}

GaitPattern find_gait(const std::string& name, const std::vector<GaitPattern>& library) {
  for (const auto& g : library)
    if (g.name == name) return g;
  for (const auto& g : builtin_gaits())
    if (g.name == name) return g;
  throw InvalidParameter("unknown gait '" + name + "'");
}

double leg_phase(const GaitPattern& gait, int leg, double t) {
  return frac(t / gait.period - gait.offset(leg));
}

bool in_stance(const GaitPattern& gait, int leg, double t) {
  if (gait.duty_cycle >= 1.0) return true;
  return leg_phase(gait, leg, t) < gait.duty_cycle - kPhaseSnap;
}

double stance_onset(const GaitPattern& gait, int leg, double t) {
  return t - leg_phase(gait, leg, t) * gait.period;
}

double swing_onset(const GaitPattern& gait, int leg, double t) {
  return t - (leg_phase(gait, leg, t) - gait.duty_cycle) * gait.period;
}

int ContactTimeline::stance_count(int k) const {
  int n = 0;
  for (int leg = 0; leg < kNumLegs; ++leg) n += contact[leg][k] ? 1 : 0;
  return n;
}

ContactTimeline make_timeline(const GaitPattern& gait, double start_time, int horizon_steps, double dt) {
  gait.validate();
  if (!(dt > 0.0)) throw InvalidParameter("timeline dt must be > 0");
  if (horizon_steps < 1) throw InvalidParameter("timeline needs at least one step");

  ContactTimeline tl;
  tl.gait = gait;
  tl.dt = dt;
  tl.start_time = start_time;
  tl.steps = horizon_steps;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    tl.contact[leg].resize(horizon_steps);
    tl.phase[leg].resize(horizon_steps);
    for (int k = 0; k < horizon_steps; ++k) {
      const double t = tl.time(k);
      tl.phase[leg][k] = leg_phase(gait, leg, t);
      tl.contact[leg][k] = in_stance(gait, leg, t);
    }
    tl.terminal_contact[leg] = in_stance(gait, leg, tl.time(horizon_steps));
  }
  return tl;
}

PerLeg<LegPhase> phase_variables(const GaitPattern& gait, double t) {
  gait.validate();
  PerLeg<LegPhase> out;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double p = leg_phase(gait, leg, t);
    double angle;
    if (in_stance(gait, leg, t)) {
      angle = kPi * (p / gait.duty_cycle);
    } else {
      const double q = (p - gait.duty_cycle) / (1.0 - gait.duty_cycle);
      angle = -kPi + kPi * std::clamp(q, 0.0, 1.0);
      if (angle >= 0.0) angle = std::nextafter(0.0, -1.0);
    }
    out[leg] = {angle, std::sin(angle), std::cos(angle)};
  }
  return out;
}

std::vector<Footfall> footfall_sequence(const ContactTimeline& tl) {
  std::vector<Footfall> out;
  for (int k = 1; k <= tl.steps; ++k) {
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const bool now = k < tl.steps ? tl.contact[leg][k] : tl.terminal_contact[leg];
      if (now && !tl.contact[leg][k - 1]) out.push_back({leg, k, tl.time(k)});
    }
  }
  // Built in (step, leg) order already; keep the sort explicit for readers.
  std::stable_sort(out.begin(), out.end(), [](const Footfall& a, const Footfall& b) {
    return a.step != b.step ? a.step < b.step : a.leg < b.leg;
  });
  return out;
}

std::vector<GaitInterval> gait_diagram(const GaitPattern& gait) {
  gait.validate();
  std::vector<GaitInterval> rows;
  const double T = gait.period;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (gait.duty_cycle >= 1.0) {
      rows.push_back({leg, 0.0, T, true});
      continue;
    }
    // Boundaries in cycle units within [0, 1).
    const double on = gait.offset(leg);
    const double off = frac(on + gait.duty_cycle);
    std::vector<std::pair<double, bool>> marks = {{on, true}, {off, false}};
    std::sort(marks.begin(), marks.end());
    // Contact state at t = 0: the state set by the last mark before the wrap.
    bool state = marks.back().second;
    double cursor = 0.0;
    for (const auto& [at, becomes] : marks) {
      if (at > cursor) rows.push_back({leg, cursor * T, at * T, state});
      cursor = at;
      state = becomes;
    }
    if (cursor < 1.0) rows.push_back({leg, cursor * T, T, state});
  }
  return rows;
}

GaitPattern gait_from_diagram(const std::vector<GaitInterval>& rows, double period, const std::string& name) {
  if (!(period > 0.0)) throw InvalidParameter("diagram period must be > 0");
  GaitPattern g;
  g.name = name;
  g.period = period;
  PerLeg<double> onset{};
  PerLeg<double> stance{};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    std::vector<GaitInterval> mine;
    for (const auto& r : rows)
      if (r.leg == leg) mine.push_back(r);
    std::sort(mine.begin(), mine.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    if (mine.empty()) throw InvalidParameter("gait diagram has no rows for leg " + std::string(kLegNames[leg]));
    double total = 0.0;
    bool found = false;
    for (std::size_t i = 0; i < mine.size(); ++i) {
      if (!mine[i].contact) continue;
      total += mine[i].end - mine[i].start;
      // A stance interval is an onset unless it continues stance from the previous interval
      // (cyclically).
      const auto& prev = mine[(i + mine.size() - 1) % mine.size()];
      const bool continues = mine.size() > 1 && prev.contact;
      if (!continues && !found) {
        onset[leg] = mine[i].start;
        found = true;
      }
    }
    if (!found) onset[leg] = 0.0;
    stance[leg] = total;
  }
  g.duty_cycle = snap(stance[0] / period);
  for (int leg = 1; leg < kNumLegs; ++leg) {
    double o = snap(frac((onset[leg] - onset[0]) / period));
    if (o >= 1.0) o = 0.0;
    g.phase_offsets[leg - 1] = o;
  }
  return g;
}

}  // namespace locomimic
