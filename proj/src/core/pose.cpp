#include "coopsim/core/pose.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/LU>

namespace coopsim::core {

Pose Pose::from_yaw(double yaw, double x, double y, double z) {
  Pose p;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  p.rotation << c, -s, 0.0,
                s,  c, 0.0,
                0.0, 0.0, 1.0;
  p.translation = Vec3(x, y, z);
  return p;
}

double Pose::yaw() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Mat3 gram = rotation.transpose() * rotation;
  if (((gram - Mat3::Identity()).array().abs() > tol).any()) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Vec3 transform_point(const Pose& p, const Vec3& x) { return p.rotation * x + p.translation; }

Pose relative_pose(const Pose& world_from_a, const Pose& world_from_b) {
  return compose(invert(world_from_a), world_from_b);
}

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  if (a > kPi) a -= kTwoPi;
  return a;
}

}  // namespace coopsim::core
