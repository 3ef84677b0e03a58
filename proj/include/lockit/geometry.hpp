#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lockit {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Planar robot state in the map frame.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  Eigen::Vector2d position() const { return {x, y}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta); }
};

/// Relative odometry expressed in the frame of the previous pose.
struct OdometryDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;

  double distance() const { return std::hypot(dx, dy); }
  bool finite() const { return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dtheta); }
};

/// Motion-model composition: the pose advances by the travelled distance
/// along the updated heading (theta + dtheta).
inline Pose2 compose(const Pose2& p, const OdometryDelta& u) {
  const double d = u.distance();
  const double heading = p.theta + u.dtheta;
  return Pose2(p.x + d * std::cos(heading), p.y + d * std::sin(heading), heading);
}

/// Inverse of compose(): the delta that takes `from` to `to`.
inline OdometryDelta delta_between(const Pose2& from, const Pose2& to) {
  const double d = std::hypot(to.x - from.x, to.y - from.y);
  const double dtheta = wrap_angle(to.theta - from.theta);
  return {d * std::cos(dtheta), d * std::sin(dtheta), dtheta};
}

/// Proper rigid motion in 3D. Maps points from a source frame into a target frame.
struct RigidTransform3 {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform3 identity() { return {}; }

  static RigidTransform3 from_pose2(const Pose2& p, double z = 0.0) {
    RigidTransform3 t;
    t.rotation = Eigen::AngleAxisd(p.theta, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    t.translation = {p.x, p.y, z};
    return t;
  }

  static RigidTransform3 from_xyz_rpy(double x, double y, double z, double roll, double pitch,
                                      double yaw) {
    RigidTransform3 t;
    t.rotation = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                  Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                  Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                     .toRotationMatrix();
    t.translation = {x, y, z};
    return t;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  RigidTransform3 inverse() const {
    RigidTransform3 t;
    t.rotation = rotation.transpose();
    t.translation = -(t.rotation * translation);
    return t;
  }

  /// (*this) after `rhs`: x -> this(rhs(x)).
  RigidTransform3 operator*(const RigidTransform3& rhs) const {
    RigidTransform3 t;
    t.rotation = rotation * rhs.rotation;
    t.translation = rotation * rhs.translation + translation;
    return t;
  }

  double yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

  /// Planar projection: (x, y, yaw).
  Pose2 to_pose2() const { return Pose2(translation.x(), translation.y(), yaw()); }

  /// Angle of the rotation part, radians in [0, pi].
  double rotation_angle() const {
    const double c = std::clamp((rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
  }

  bool is_valid(double tol = 1e-9) const {
    const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
    return (rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
  }
};

/// Re-orthonormalizes a nearly orthonormal rotation.
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
  return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

}  // namespace lockit
