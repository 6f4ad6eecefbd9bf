#pragma once

// Variable-height inverted pendulum: the CoM accelerates away from a center
// of pressure lying in the convex hull of the stance feet, with a directly
// commanded vertical acceleration.

#include "locomimic/types.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace locomimic::vhipm {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

/// Below this CoM height stance dynamics refuse to evaluate.
inline constexpr double kMinStanceHeight = 0.05;
inline constexpr double kWeightSumTolerance = 1e-9;

template <typename Scalar>
struct PendulumState {
  Vector3<Scalar> r = Vector3<Scalar>::Zero();
  Vector3<Scalar> v = Vector3<Scalar>::Zero();
};

template <typename Scalar>
struct SupportSet {
  std::vector<Vector3<Scalar>> footholds;  // 0..4 entries, empty = flight
  bool flight() const { return footholds.empty(); }
  std::size_t size() const { return footholds.size(); }
};

template <typename Scalar>
struct ControlInput {
  Scalar h_ddot = Scalar(0);
  std::vector<Scalar> weights;  // one per foothold of the active support set

  static ControlInput uniform(std::size_t n, Scalar h_ddot = Scalar(0)) {
    ControlInput u;
    u.h_ddot = h_ddot;
    u.weights.assign(n, n ? Scalar(1) / Scalar(n) : Scalar(0));
    return u;
  }
};

template <typename Scalar>
struct GravityVector {
  Vector3<Scalar> g{Scalar(0), Scalar(0), Scalar(-kStandardGravity)};
  Scalar norm() const { return g.norm(); }
};

/// Convex combination sum_i w_i s_i without any feasibility check; the
/// optimizer evaluates it at infeasible iterates.
template <typename Scalar>
Vector3<Scalar> weighted_cop(const SupportSet<Scalar>& support, std::span<const Scalar> weights) {
  if (weights.size() != support.size()) throw InvalidParameter("CoP weight count does not match support set");
  Vector3<Scalar> x = Vector3<Scalar>::Zero();
  for (std::size_t i = 0; i < support.size(); ++i) x += weights[i] * support.footholds[i];
  return x;
}

/// Center of pressure of a feasible weighting (w >= 0, sum w = 1).
template <typename Scalar>
Vector3<Scalar> compute_cop(const SupportSet<Scalar>& support, std::span<const Scalar> weights) {
  if (support.flight()) throw FlightPhaseError("CoP undefined for an empty support set");
  if (weights.size() != support.size()) throw InvalidParameter("CoP weight count does not match support set");
  Scalar sum(0);
  for (Scalar w : weights) {
    if (w < Scalar(0)) throw InvalidParameter("CoP weights must be non-negative");
    sum += w;
  }
  using std::abs;
  if (abs(sum - Scalar(1)) > Scalar(kWeightSumTolerance)) throw InvalidParameter("CoP weights must sum to one");
  return weighted_cop(support, weights);
}

/// CoM acceleration. With an empty support set the body is ballistic and
/// h_ddot is ignored.
template <typename Scalar>
Vector3<Scalar> continuous_accel(const Vector3<Scalar>& r, const ControlInput<Scalar>& u,
                                 const SupportSet<Scalar>& support,
                                 const GravityVector<Scalar>& gravity = {}) {
  if (support.flight()) return gravity.g;
  if (r.z() < Scalar(kMinStanceHeight))
    throw SingularityError("CoM height below stance singularity guard");
  const Vector3<Scalar> cop = weighted_cop(support, std::span<const Scalar>(u.weights));
  return (r - cop) * ((u.h_ddot + gravity.norm()) / r.z()) + gravity.g;
}

template <typename Scalar>
Vector3<Scalar> continuous_accel(const PendulumState<Scalar>& state, const ControlInput<Scalar>& u,
                                 const SupportSet<Scalar>& support,
                                 const GravityVector<Scalar>& gravity = {}) {
  return continuous_accel(state.r, u, support, gravity);
}

/// r_{k+1} = 2 r_k - r_{k-1} + a(r_k, u_k) dt^2
template <typename Scalar>
Vector3<Scalar> discrete_step(const Vector3<Scalar>& r_prev, const Vector3<Scalar>& r_curr,
                              const ControlInput<Scalar>& u, const SupportSet<Scalar>& support, Scalar dt,
                              const GravityVector<Scalar>& gravity = {}) {
  if (!(dt > Scalar(0))) throw InvalidParameter("integration step must be > 0");
  const Vector3<Scalar> a = continuous_accel(r_curr, u, support, gravity);
  return Scalar(2) * r_curr - r_prev + a * (dt * dt);
}

}  // namespace locomimic::vhipm

namespace locomimic {
using PendulumState = vhipm::PendulumState<double>;
using SupportSet = vhipm::SupportSet<double>;
using ControlInput = vhipm::ControlInput<double>;
using GravityVector = vhipm::GravityVector<double>;
}  // namespace locomimic
