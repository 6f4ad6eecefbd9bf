#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>

namespace locomimic {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Leg indexing is fixed everywhere: FL, FR, HL, HR.
enum class Leg : int { FL = 0, FR = 1, HL = 2, HR = 3 };

inline constexpr int kNumLegs = 4;
inline constexpr std::array<const char*, kNumLegs> kLegNames = {"FL", "FR", "HL", "HR"};

inline constexpr double kStandardGravity = 9.81;
inline constexpr double kPi = 3.14159265358979323846;

template <typename T>
using PerLeg = std::array<T, kNumLegs>;

struct VelocityCommand {
  double forward = 0.0;   // m/s, yaw frame x
  double lateral = 0.0;   // m/s, yaw frame y
  double yaw_rate = 0.0;  // rad/s
};

// Error hierarchy. Everything derives from std::runtime_error so callers that
// only care about "something failed" can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidParameter : Error {
  using Error::Error;
};
struct FlightPhaseError : Error {
  using Error::Error;
};
struct SingularityError : Error {
  using Error::Error;
};
struct OutOfBounds : Error {
  using Error::Error;
};
struct LayoutError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

/// Rotation about +z.
inline Mat3 yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

inline Vec2 rotate2(double yaw, const Vec2& v) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

}  // namespace locomimic
