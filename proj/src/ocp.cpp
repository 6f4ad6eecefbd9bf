#include "locomimic/ocp.hpp"

#include "locomimic/motion_synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace locomimic {

OcpWeights OcpWeights::scaled(double f) const {
  OcpWeights w = *this;
  for (double* p : {&w.velocity, &w.height, &w.foothold, &w.vertical_accel, &w.cop_weight,
                    &w.input_smoothness, &w.weight_sum, &w.weight_nonneg, &w.accel_bounds})
    *p *= f;
  return w;
}

void OcpWeights::validate() const {
  for (double v : {velocity, height, foothold, vertical_accel, cop_weight, input_smoothness,
                   weight_sum, weight_nonneg, accel_bounds})
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidParameter("OCP weights must be finite and >= 0");
  if (!(velocity > 0.0 || height > 0.0)) throw InvalidParameter("at least one tracking weight must be > 0");
}

Vec2 command_path(const OcpProblem& p, int k) {
  Vec2 xy = p.r0.head<2>();
  for (int i = 0; i < k; ++i) xy += p.command_velocity((i + 0.5) * p.dt()) * p.dt();
  return xy;
}

OcpStructure analyze(const OcpProblem& p) {
  const auto& tl = p.timeline;
  const int N = tl.steps;
  if (N < 1) throw InvalidParameter("OCP horizon must have at least one step");
  OcpStructure s;
  s.footfalls = footfall_sequence(tl);
  s.steps.resize(N);

  int idx = 0;
  for (int k = 0; k < N; ++k) {
    auto& st = s.steps[k];
    st.h_ddot_index = idx++;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      if (!tl.contact[leg][k]) continue;
      int source = -1;
      for (int j = 0; j < static_cast<int>(s.footfalls.size()); ++j)
        if (s.footfalls[j].leg == leg && s.footfalls[j].step <= k) source = j;
      if (source < 0 && !p.stance_feet[leg])
        throw InvalidParameter(std::string("leg ") + kLegNames[leg] + " is in stance at the horizon start but has no measured foot position");
      st.slots.push_back({leg, idx++, source});
      ++s.weight_count;
    }
  }
  s.foothold_offset = idx;
  s.size = idx + 2 * static_cast<int>(s.footfalls.size());
  s.ground_height = p.ground_height;

  const double half_stance = 0.5 * tl.gait.stance_duration();
  const double horizon = N * tl.dt;
  for (const auto& f : s.footfalls) {
    const double onset = stance_onset(tl.gait, f.leg, f.time) - tl.start_time;
    const double mid = onset + half_stance;
    const int anchor = std::clamp(static_cast<int>(std::lround(mid / tl.dt)), 0, N);
    Vec2 extra = Vec2::Zero();
    if (mid > horizon) extra = p.command_velocity(0.5 * (mid + horizon)) * (mid - horizon);
    s.nominal_anchor.push_back(anchor);
    s.nominal_extrapolation.push_back(extra);
    s.nominal_time.push_back(mid);
  }
  return s;
}

void check_dimensions(const OcpStructure& layout, const StackedControl& u) {
  const int N = static_cast<int>(layout.steps.size());
  if (static_cast<int>(u.h_ddot.size()) != N || static_cast<int>(u.weights.size()) != N)
    throw InvalidParameter("stacked control horizon does not match the problem");
  for (int k = 0; k < N; ++k)
    if (u.weights[k].size() != layout.steps[k].slots.size())
      throw InvalidParameter("stacked control weight count at step " + std::to_string(k) + " does not match the stance set");
  if (u.footholds.size() != layout.footfalls.size())
    throw InvalidParameter("stacked control foothold count does not match the footfall sequence");
}

VecX pack(const OcpStructure& layout, const StackedControl& u) {
  check_dimensions(layout, u);
  VecX flat(layout.size);
  for (std::size_t k = 0; k < layout.steps.size(); ++k) {
    const auto& st = layout.steps[k];
    flat[st.h_ddot_index] = u.h_ddot[k];
    for (std::size_t i = 0; i < st.slots.size(); ++i) flat[st.slots[i].weight_index] = u.weights[k][i];
  }
  for (std::size_t j = 0; j < u.footholds.size(); ++j)
    flat.segment<2>(layout.foothold_index(static_cast<int>(j))) = u.footholds[j].head<2>();
  return flat;
}

StackedControl unpack(const OcpStructure& layout, const VecX& flat) {
  if (flat.size() != layout.size) throw InvalidParameter("flat control vector has the wrong length");
  StackedControl u;
  const std::size_t N = layout.steps.size();
  u.h_ddot.resize(N);
  u.weights.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    const auto& st = layout.steps[k];
    u.h_ddot[k] = flat[st.h_ddot_index];
    for (const auto& slot : st.slots) u.weights[k].push_back(flat[slot.weight_index]);
  }
  for (std::size_t j = 0; j < layout.footfalls.size(); ++j) {
    const Vec2 xy = flat.segment<2>(layout.foothold_index(static_cast<int>(j)));
    u.footholds.emplace_back(xy.x(), xy.y(), layout.ground_height);
  }
  return u;
}

namespace {

Vec3 slot_position(const OcpProblem& p, const OcpStructure& layout, const VecX& flat,
                   const OcpStructure::Slot& slot) {
  if (slot.foothold < 0) return *p.stance_feet[slot.leg];
  const Vec2 xy = flat.segment<2>(layout.foothold_index(slot.foothold));
  return {xy.x(), xy.y(), layout.ground_height};
}

SupportSet support_flat(const OcpProblem& p, const OcpStructure& layout, const VecX& flat, int k) {
  SupportSet s;
  for (const auto& slot : layout.steps[k].slots) s.footholds.push_back(slot_position(p, layout, flat, slot));
  return s;
}

ControlInput input_flat(const OcpStructure& layout, const VecX& flat, int k) {
  ControlInput u;
  const auto& st = layout.steps[k];
  u.h_ddot = flat[st.h_ddot_index];
  for (const auto& slot : st.slots) u.weights.push_back(flat[slot.weight_index]);
  return u;
}

struct Multipliers {
  VecX weight_sum, nonneg, lower, upper;
};

// Stacked least-squares residuals; the cost is res.squaredNorm().
class ResidualModel {
 public:
  ResidualModel(const OcpProblem& p, const OcpStructure& layout, const OcpWeights& w, const SolverOptions& o)
      : p_(p), layout_(layout), w_(w), o_(o) {
    N_ = p.steps();
    vel_ = 0;
    height_ = vel_ + 2 * N_;
    foot_ = height_ + N_;
    hdd_reg_ = foot_ + 2 * static_cast<int>(layout.footfalls.size());
    cop_reg_ = hdd_reg_ + N_;
    smooth_ = cop_reg_ + layout.weight_count;
    sum_ = smooth_ + std::max(N_ - 1, 0);
    nonneg_ = sum_ + N_;
    lower_ = nonneg_ + layout.weight_count;
    upper_ = lower_ + N_;
    rows_ = upper_ + N_;
    penalty_scale_ = 1.0;
  }

  int rows() const { return rows_; }
  void set_penalty_scale(double s) { penalty_scale_ = s; }
  double penalty_scale() const { return penalty_scale_; }

  Multipliers zero_multipliers() const {
    return {VecX::Zero(N_), VecX::Zero(layout_.weight_count), VecX::Zero(N_), VecX::Zero(N_)};
  }

  double h_ddot_min() const { return -p_.gravity.norm(); }

  /// Returns false when the rollout hits the stance singularity.
  bool evaluate(const VecX& u, const Multipliers& m, VecX& res, MatX* jac, std::vector<Vec3>* traj = nullptr) const {
    const double dt = p_.dt();
    const double dt2 = dt * dt;
    const int n = layout_.size;
    const double gn = p_.gravity.norm();

    // P[k + 1] = r_k for k = -1 .. N
    std::vector<Vec3> P(N_ + 2);
    P[0] = p_.r_before();
    P[1] = p_.r0;
    std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> S;
    if (jac) S.assign(N_ + 2, Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n));

    for (int k = 0; k < N_; ++k) {
      const Vec3& r = P[k + 1];
      const auto& st = layout_.steps[k];
      const SupportSet support = support_flat(p_, layout_, u, k);
      const ControlInput input = input_flat(layout_, u, k);
      try {
        P[k + 2] = vhipm::discrete_step(P[k], r, input, support, dt, p_.gravity);
      } catch (const SingularityError&) {
        return false;
      }
      if (!jac) continue;
      S[k + 2] = 2.0 * S[k + 1] - S[k];
      if (support.flight()) continue;
      const Vec3 cop = vhipm::weighted_cop(support, std::span<const double>(input.weights));
      const double beta = (input.h_ddot + gn) / r.z();
      const Vec3 d = r - cop;
      Mat3 A = beta * Mat3::Identity();
      A.col(2) -= d * (beta / r.z());
      S[k + 2].noalias() += dt2 * (A * S[k + 1]);
      S[k + 2].col(st.h_ddot_index) += dt2 * d / r.z();
      for (std::size_t i = 0; i < st.slots.size(); ++i) {
        const auto& slot = st.slots[i];
        S[k + 2].col(slot.weight_index) -= dt2 * beta * support.footholds[i];
        if (slot.foothold >= 0) {
          const int c = layout_.foothold_index(slot.foothold);
          S[k + 2].block<2, 2>(0, c) -= dt2 * beta * input.weights[i] * Eigen::Matrix2d::Identity();
        }
      }
    }
    if (traj) *traj = P;

    res.setZero(rows_);
    if (jac) jac->setZero(rows_, n);

    // Velocity tracking.
    const double sv = std::sqrt(w_.velocity);
    for (int k = 1; k <= N_; ++k) {
      const Vec2 v = (P[k + 1] - P[k]).head<2>() / dt;
      const Vec2 vc = p_.command_velocity((k - 0.5) * dt);
      res.segment<2>(vel_ + 2 * (k - 1)) = sv * (v - vc);
      if (jac) jac->middleRows(vel_ + 2 * (k - 1), 2) = (sv / dt) * (S[k + 1] - S[k]).topRows(2);
    }
    // Height tracking.
    const double sh = std::sqrt(w_.height);
    const double z_target = p_.ground_height + p_.target_height;
    for (int k = 1; k <= N_; ++k) {
      res[height_ + k - 1] = sh * (P[k + 1].z() - z_target);
      if (jac) jac->row(height_ + k - 1) = sh * S[k + 1].row(2);
    }
    // Foothold regularization toward the hip projection at mid-stance.
    const double sf = std::sqrt(w_.foothold);
    for (std::size_t j = 0; j < layout_.footfalls.size(); ++j) {
      const int c = layout_.foothold_index(static_cast<int>(j));
      const int a = layout_.nominal_anchor[j];
      const int leg = layout_.footfalls[j].leg;
      const Vec2 nominal = P[a + 1].head<2>() + layout_.nominal_extrapolation[j] +
                           rotate2(p_.heading(layout_.nominal_time[j]), p_.hip_offsets[leg]);
      const int row = foot_ + 2 * static_cast<int>(j);
      res.segment<2>(row) = sf * (u.segment<2>(c) - nominal);
      if (jac) {
        jac->middleRows(row, 2) = -sf * S[a + 1].topRows(2);
        (*jac)(row, c) += sf;
        (*jac)(row + 1, c + 1) += sf;
      }
    }
    // Input regularization.
    const double sa = std::sqrt(w_.vertical_accel), sc = std::sqrt(w_.cop_weight), ss = std::sqrt(w_.input_smoothness);
    int wi = 0;
    for (int k = 0; k < N_; ++k) {
      const auto& st = layout_.steps[k];
      res[hdd_reg_ + k] = sa * u[st.h_ddot_index];
      if (jac) (*jac)(hdd_reg_ + k, st.h_ddot_index) = sa;
      const double uniform = st.slots.empty() ? 0.0 : 1.0 / static_cast<double>(st.slots.size());
      for (const auto& slot : st.slots) {
        res[cop_reg_ + wi] = sc * (u[slot.weight_index] - uniform);
        if (jac) (*jac)(cop_reg_ + wi, slot.weight_index) = sc;
        ++wi;
      }
      if (k > 0) {
        const int prev = layout_.steps[k - 1].h_ddot_index;
        res[smooth_ + k - 1] = ss * (u[st.h_ddot_index] - u[prev]);
        if (jac) {
          (*jac)(smooth_ + k - 1, st.h_ddot_index) = ss;
          (*jac)(smooth_ + k - 1, prev) = -ss;
        }
      }
    }
    // Constraint penalties with multiplier shifts.
    const double rs = w_.weight_sum * penalty_scale_, rn = w_.weight_nonneg * penalty_scale_,
                 rb = w_.accel_bounds * penalty_scale_;
    const double qs = std::sqrt(rs), qn = std::sqrt(rn), qb = std::sqrt(rb);
    wi = 0;
    const double lo = h_ddot_min(), hi = o_.h_ddot_max;
    for (int k = 0; k < N_; ++k) {
      const auto& st = layout_.steps[k];
      if (!st.slots.empty() && rs > 0.0) {
        double sum = 0.0;
        for (const auto& slot : st.slots) sum += u[slot.weight_index];
        res[sum_ + k] = qs * (sum - 1.0 + m.weight_sum[k] / rs);
        if (jac)
          for (const auto& slot : st.slots) (*jac)(sum_ + k, slot.weight_index) = qs;
      }
      for (const auto& slot : st.slots) {
        if (rn > 0.0) {
          const double shifted = u[slot.weight_index] - m.nonneg[wi] / rn;
          if (shifted < 0.0) {
            res[nonneg_ + wi] = qn * shifted;
            if (jac) (*jac)(nonneg_ + wi, slot.weight_index) = qn;
          }
        }
        ++wi;
      }
      if (rb > 0.0) {
        const double h = u[st.h_ddot_index];
        const double below = h - lo - m.lower[k] / rb;
        if (below < 0.0) {
          res[lower_ + k] = qb * below;
          if (jac) (*jac)(lower_ + k, st.h_ddot_index) = qb;
        }
        const double above = h - hi + m.upper[k] / rb;
        if (above > 0.0) {
          res[upper_ + k] = qb * above;
          if (jac) (*jac)(upper_ + k, st.h_ddot_index) = qb;
        }
      }
    }
    return true;
  }

  CostBreakdown split(const VecX& res) const {
    auto sq = [&](int from, int to) { return res.segment(from, to - from).squaredNorm(); };
    CostBreakdown b;
    b.velocity = sq(vel_, height_);
    b.height = sq(height_, foot_);
    b.foothold = sq(foot_, hdd_reg_);
    b.input = sq(hdd_reg_, sum_);
    b.penalty = sq(sum_, rows_);
    return b;
  }

  struct Violation {
    double weight_sum = 0.0;  // max |sum w - 1|
    double min_weight = 0.0;  // min w (0 if no weights)
    double bounds = 0.0;      // max excursion of h_ddot outside its range
    double worst() const { return std::max({weight_sum, -std::min(min_weight, 0.0), bounds}); }
  };

  Violation violation(const VecX& u) const {
    Violation v;
    v.min_weight = layout_.weight_count ? std::numeric_limits<double>::infinity() : 0.0;
    for (int k = 0; k < N_; ++k) {
      const auto& st = layout_.steps[k];
      double sum = 0.0;
      for (const auto& slot : st.slots) {
        sum += u[slot.weight_index];
        v.min_weight = std::min(v.min_weight, u[slot.weight_index]);
      }
      if (!st.slots.empty()) v.weight_sum = std::max(v.weight_sum, std::abs(sum - 1.0));
      const double h = u[st.h_ddot_index];
      if (w_.accel_bounds > 0.0) v.bounds = std::max({v.bounds, h_ddot_min() - h, h - o_.h_ddot_max});
    }
    return v;
  }

  void update_multipliers(const VecX& u, Multipliers& m) const {
    const double rs = w_.weight_sum * penalty_scale_, rn = w_.weight_nonneg * penalty_scale_,
                 rb = w_.accel_bounds * penalty_scale_;
    int wi = 0;
    for (int k = 0; k < N_; ++k) {
      const auto& st = layout_.steps[k];
      if (!st.slots.empty() && rs > 0.0) {
        double sum = 0.0;
        for (const auto& slot : st.slots) sum += u[slot.weight_index];
        m.weight_sum[k] += rs * (sum - 1.0);
      }
      for (const auto& slot : st.slots) {
        if (rn > 0.0) m.nonneg[wi] = std::max(0.0, m.nonneg[wi] - rn * u[slot.weight_index]);
        ++wi;
      }
      if (rb > 0.0) {
        const double h = u[st.h_ddot_index];
        m.lower[k] = std::max(0.0, m.lower[k] - rb * (h - h_ddot_min()));
        m.upper[k] = std::max(0.0, m.upper[k] + rb * (h - o_.h_ddot_max));
      }
    }
  }

 private:
  const OcpProblem& p_;
  const OcpStructure& layout_;
  OcpWeights w_;
  SolverOptions o_;
  int N_ = 0;
  int vel_ = 0, height_ = 0, foot_ = 0, hdd_reg_ = 0, cop_reg_ = 0, smooth_ = 0, sum_ = 0, nonneg_ = 0, lower_ = 0,
      upper_ = 0, rows_ = 0;
  double penalty_scale_ = 1.0;
};

}  // namespace

SupportSet support_at(const OcpProblem& p, const OcpStructure& layout, const StackedControl& u, int k) {
  SupportSet s;
  const auto& st = layout.steps.at(k);
  for (const auto& slot : st.slots)
    s.footholds.push_back(slot.foothold < 0 ? *p.stance_feet[slot.leg] : u.footholds[slot.foothold]);
  return s;
}

StackedState rollout(const OcpProblem& p, const StackedControl& u) {
  const OcpStructure layout = analyze(p);
  check_dimensions(layout, u);
  StackedState x;
  x.r.reserve(p.steps());
  Vec3 prev = p.r_before(), curr = p.r0;
  for (int k = 0; k < p.steps(); ++k) {
    ControlInput input;
    input.h_ddot = u.h_ddot[k];
    input.weights = u.weights[k];
    const Vec3 next = vhipm::discrete_step(prev, curr, input, support_at(p, layout, u, k), p.dt(), p.gravity);
    x.r.push_back(next);
    prev = curr;
    curr = next;
  }
  return x;
}

CostBreakdown cost_breakdown(const OcpProblem& p, const StackedControl& u, const OcpWeights& w,
                             const SolverOptions& o) {
  const OcpStructure layout = analyze(p);
  const ResidualModel model(p, layout, w, o);
  VecX res;
  if (!model.evaluate(pack(layout, u), model.zero_multipliers(), res, nullptr))
    throw SingularityError("rollout reached the stance singularity");
  return model.split(res);
}

double evaluate_cost(const OcpProblem& p, const StackedControl& u, const OcpWeights& w, const SolverOptions& o) {
  return cost_breakdown(p, u, w, o).total();
}

VecX cost_gradient(const OcpProblem& p, const StackedControl& u, const OcpWeights& w, const SolverOptions& o) {
  const OcpStructure layout = analyze(p);
  const ResidualModel model(p, layout, w, o);
  VecX res;
  MatX jac;
  if (!model.evaluate(pack(layout, u), model.zero_multipliers(), res, &jac))
    throw SingularityError("rollout reached the stance singularity");
  return 2.0 * jac.transpose() * res;
}

namespace {

// Vertical motion decouples (z'' = h_ddot in stance, -|g| in flight), so a
// PD on height keeps a guess away from the singularity through flights.
// Weights on the simplex whose CoP lies closest to `target` (projected gradient).
std::vector<double> closest_weights(const SupportSet& s, const Vec2& target) {
  const std::size_t m = s.footholds.size();
  std::vector<double> w(m, 1.0 / static_cast<double>(m));
  if (m == 1) return w;
  double lip = 0.0;
  for (const auto& f : s.footholds) lip += f.head<2>().squaredNorm();
  if (lip <= 0.0) return w;
  VecX x = VecX::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
  for (int it = 0; it < 200; ++it) {
    Vec2 c = Vec2::Zero();
    for (std::size_t i = 0; i < m; ++i) c += x[i] * s.footholds[i].head<2>();
    VecX y(x.size());
    for (std::size_t i = 0; i < m; ++i) y[i] = x[i] - (s.footholds[i].head<2>().dot(c - target)) / lip;
    // Euclidean projection onto the simplex.
    VecX z = y;
    std::sort(z.data(), z.data() + z.size(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      cum += z[i];
      const double t = (cum - 1.0) / static_cast<double>(i + 1);
      if (z[i] - t > 0.0) theta = t;
    }
    x = (y.array() - theta).max(0.0).matrix();
  }
  for (std::size_t i = 0; i < m; ++i) w[i] = x[i];
  return w;
}

// Closed-loop rollout that rewrites h_ddot and the CoP weights: a PD law on
// height and a CoP placed to pull the horizontal velocity toward the command.
void stabilize_guess(const OcpProblem& p, const OcpStructure& layout, StackedControl& u, double h_ddot_max) {
  const double dt = p.dt(), g = p.gravity.norm();
  const double kp = 200.0, kd = 2.0 * std::sqrt(kp);
  const double target = p.ground_height + p.target_height;
  Vec3 prev = p.r_before(), curr = p.r0;
  for (int k = 0; k < p.steps(); ++k) {
    if (!layout.steps[k].slots.empty()) {
      const Vec3 v = (curr - prev) / dt;
      u.h_ddot[k] = std::clamp(kp * (target - curr.z()) - kd * v.z(), -g, h_ddot_max);
      const double height = std::max(curr.z() - p.ground_height, 0.05);
      const double omega = std::sqrt(std::max(u.h_ddot[k] + g, 1e-3) / height);
      const Vec2 vc = p.command_velocity((k + 0.5) * dt);
      const Vec2 cop = curr.head<2>() + 2.0 * (v.head<2>() - vc) / omega;
      u.weights[k] = closest_weights(support_at(p, layout, u, k), cop);
    }
    ControlInput input;
    input.h_ddot = u.h_ddot[k];
    input.weights = u.weights[k];
    const Vec3 next = vhipm::discrete_step(prev, curr, input, support_at(p, layout, u, k), dt, p.gravity);
    prev = curr;
    curr = next;
  }
}

}  // namespace

StackedControl default_initial_guess(const OcpProblem& p) {
  const OcpStructure layout = analyze(p);
  StackedControl u;
  const int N = p.steps();
  u.h_ddot.assign(N, 0.0);
  u.weights.resize(N);
  for (int k = 0; k < N; ++k) {
    const std::size_t m = layout.steps[k].slots.size();
    u.weights[k].assign(m, 1.0 / static_cast<double>(m));
  }
  const double stance = p.timeline.gait.stance_duration();
  for (const auto& f : layout.footfalls) {
    const double s = f.step * p.dt();
    const Vec2 base = command_path(p, f.step);
    const Vec2 hip = base + rotate2(p.heading(s), p.hip_offsets[f.leg]);
    const Vec2 vc = p.command_velocity(s);
    const Vec3 foot = raibert_foothold(Vec3(hip.x(), hip.y(), p.ground_height), Vec3(p.v0.x(), p.v0.y(), 0.0),
                                       Vec3(vc.x(), vc.y(), 0.0), stance, p.raibert_gain);
    u.footholds.push_back(foot);
  }
  return u;
}

StackedControl shift_warm_start(const OcpProblem& prev, const StackedControl& prev_u, const OcpProblem& next) {
  const OcpStructure prev_layout = analyze(prev);
  check_dimensions(prev_layout, prev_u);
  const OcpStructure layout = analyze(next);
  StackedControl u = default_initial_guess(next);
  const double shift = next.timeline.start_time - prev.timeline.start_time;
  const int Np = prev.steps();
  for (int k = 0; k < next.steps(); ++k) {
    const int j = std::clamp(static_cast<int>(std::lround((k * next.dt() + shift) / prev.dt())), 0, Np - 1);
    u.h_ddot[k] = prev_u.h_ddot[j];
    const auto& a = layout.steps[k].slots;
    const auto& b = prev_layout.steps[j].slots;
    const bool same = a.size() == b.size() &&
                      std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) { return x.leg == y.leg; });
    if (same) u.weights[k] = prev_u.weights[j];
  }
  const auto& g = next.timeline.gait;
  for (std::size_t i = 0; i < layout.footfalls.size(); ++i) {
    const auto& f = layout.footfalls[i];
    const double onset = stance_onset(g, f.leg, f.time);
    for (std::size_t j = 0; j < prev_layout.footfalls.size(); ++j) {
      const auto& pf = prev_layout.footfalls[j];
      if (pf.leg == f.leg && std::abs(stance_onset(prev.timeline.gait, pf.leg, pf.time) - onset) < 1e-6) {
        u.footholds[i] = prev_u.footholds[j];
        break;
      }
    }
  }
  return u;
}

OcpSolution solve_ocp(const OcpProblem& p, const OcpWeights& w, const std::optional<StackedControl>& init,
                      const SolverOptions& o) {
  const auto t_begin = std::chrono::steady_clock::now();
  w.validate();
  const OcpStructure layout = analyze(p);
  ResidualModel model(p, layout, w, o);
  Multipliers mult = model.zero_multipliers();

  VecX u = pack(layout, init ? *init : default_initial_guess(p));
  VecX res, trial_res;
  MatX jac;
  if (!model.evaluate(u, mult, res, nullptr)) {
    StackedControl guess = default_initial_guess(p);
    u = pack(layout, guess);
    if (!model.evaluate(u, mult, res, nullptr)) {
      stabilize_guess(p, layout, guess, o.h_ddot_max);
      u = pack(layout, guess);
      if (!model.evaluate(u, mult, res, nullptr)) throw SingularityError("initial guess reaches the stance singularity");
    }
  }

  SolveReport report;
  int iterations = 0;
  double damping = 1e-8;
  bool inner_converged = false;
  double previous_violation = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < o.max_outer_iterations; ++outer) {
    report.outer_iterations = outer + 1;
    inner_converged = false;
    report.stalled = false;
    while (true) {
      model.evaluate(u, mult, res, &jac);
      const double F = res.squaredNorm();
      const VecX grad = 2.0 * jac.transpose() * res;
      report.cost_trace.push_back(F);
      report.trace_phase.push_back(outer);
      report.gradient_norm = grad.lpNorm<Eigen::Infinity>();
      if (report.gradient_norm <= o.gradient_tolerance * (1.0 + F)) {
        inner_converged = true;
        break;
      }
      if (iterations >= o.max_iterations) break;
      ++iterations;

      MatX H = MatX::Zero(layout.size, layout.size);
      H.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
      const VecX rhs = -0.5 * grad;
      bool accepted = false;
      bool flat = false;
      while (!accepted && !flat && damping < 1e12) {
        MatX Hd = H;
        Hd.diagonal().array() += damping * (H.diagonal().array() + 1e-9);
        Eigen::LLT<MatX, Eigen::Lower> llt(Hd);
        if (llt.info() != Eigen::Success) {
          damping *= 10.0;
          continue;
        }
        const VecX step = llt.solve(rhs);
        const double slope = grad.dot(step);
        if (!(slope < 0.0)) {
          damping *= 10.0;
          continue;
        }
        if (-slope <= 1e-15 * (1.0 + F)) {
          flat = true;
          break;
        }
        double alpha = 1.0;
        for (int b = 0; b < o.max_backtracks; ++b, alpha *= 0.5) {
          const VecX trial = u + alpha * step;
          if (!model.evaluate(trial, mult, trial_res, nullptr)) {
            ++report.rejected_steps;
            continue;
          }
          if (trial_res.squaredNorm() <= F + o.armijo * alpha * slope) {
            u = trial;
            accepted = true;
            break;
          }
        }
        if (accepted) {
          damping = alpha == 1.0 ? std::max(damping * 0.1, 1e-12) : damping;
        } else {
          damping *= 10.0;
        }
      }
      if (!accepted) {
        // Line-search stall. When the model predicts no representable
        // decrease the iterate is stationary to working precision.
        report.stalled = true;
        inner_converged = flat;
        break;
      }
    }

    const auto viol = model.violation(u);
    const double worst = viol.worst();
    if (inner_converged && worst <= o.feasibility_tolerance) break;
    if (!inner_converged) break;
    model.update_multipliers(u, mult);
    if (worst > 0.25 * previous_violation) model.set_penalty_scale(model.penalty_scale() * 10.0);
    previous_violation = worst;
  }

  const auto viol = model.violation(u);
  report.iterations = iterations;
  report.max_weight_sum_violation = viol.weight_sum;
  report.min_weight = viol.min_weight;
  report.converged = inner_converged && viol.weight_sum <= 1e-6 && viol.min_weight >= -1e-8;

  OcpSolution sol;
  sol.u = unpack(layout, u);
  sol.x = rollout(p, sol.u);
  sol.report = report;
  sol.report.final_cost = evaluate_cost(p, sol.u, w, o);
  sol.report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return sol;
}

}  // namespace locomimic
