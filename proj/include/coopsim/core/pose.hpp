#pragma once

#include <Eigen/Core>

namespace coopsim::core {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid transform x -> rotation * x + translation. A pose named
// `world_from_sensor` maps sensor-frame points into the world frame.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  // Rotation about +z by `yaw` radians followed by translation (x, y, z).
  static Pose from_yaw(double yaw, double x = 0.0, double y = 0.0, double z = 0.0);

  // Heading of the rotated x axis in the xy plane.
  double yaw() const;

  // Orthonormal with det +1 within `tol` elementwise.
  bool is_valid(double tol = 1e-9) const;

  bool operator==(const Pose&) const = default;
};

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);
Vec3 transform_point(const Pose& p, const Vec3& x);
// Maps b-frame coordinates into the a frame: invert(world_from_a) * world_from_b.
Pose relative_pose(const Pose& world_from_a, const Pose& world_from_b);

// Wraps to (-pi, pi].
double wrap_angle(double a);

}  // namespace coopsim::core
