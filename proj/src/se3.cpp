#include "contactservo/se3.hpp"

#include <cmath>
#include <stdexcept>

namespace contactservo {

namespace {
constexpr double kSmallAngle = 1e-8;  // below this, use 2nd-order series
constexpr double kPi = 3.14159265358979323846;
}  // namespace

void Rotation::canonicalize() {
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  Rotation r;
  r.q = Eigen::Quaterniond(w, x, y, z);
  if (!r.q.coeffs().allFinite() || r.q.norm() < 1e-12)
    throw std::invalid_argument("Rotation: quaternion not normalizable");
  r.canonicalize();
  return r;
}

Rotation Rotation::from_axis_angle(const Vec3& aa) {
  if (!aa.allFinite())
    throw std::invalid_argument("Rotation: non-finite axis-angle");
  const double angle = aa.norm();
  Rotation r;
  if (angle < kSmallAngle) {
    // q = (cos a/2, sin(a/2)/a * aa); series keeps this exact to O(a^4).
    const double a2 = angle * angle;
    r.q = Eigen::Quaterniond(1.0 - a2 / 8.0, 0, 0, 0);
    r.q.vec() = (0.5 - a2 / 48.0) * aa;
  } else {
    const double half = 0.5 * angle;
    r.q = Eigen::Quaterniond(std::cos(half), 0, 0, 0);
    r.q.vec() = (std::sin(half) / angle) * aa;
  }
  r.canonicalize();
  return r;
}

Vec3 Rotation::axis_angle() const {
  const double vn = q.vec().norm();
  const double w = q.w();  // >= 0 in canonical form
  if (vn < kSmallAngle) {
    // angle/sin(angle/2) ~ 2 + angle^2/12 for small angles
    const double angle = 2.0 * std::atan2(vn, w);
    return (2.0 + angle * angle / 12.0) * q.vec();
  }
  double angle = 2.0 * std::atan2(vn, w);
  Vec3 axis = q.vec() / vn;
  if (angle >= kPi) {
    // Deterministic tie-break at the pi boundary: largest |component| of the
    // axis is made positive, angle clamped strictly below pi.
    int imax = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(axis[i]) > std::abs(axis[imax])) imax = i;
    if (axis[imax] < 0.0) axis = -axis;
    angle = kPi - 1e-12;
  }
  return angle * axis;
}

Rotation Rotation::operator*(const Rotation& rhs) const {
  Rotation r;
  r.q = q * rhs.q;
  r.canonicalize();
  return r;
}

Rotation Rotation::inverse() const {
  Rotation r;
  r.q = q.conjugate();
  r.canonicalize();
  return r;
}

TwistDelta TwistDelta::from_vector(const Vec6& v) {
  return {v.head<3>(), v.tail<3>()};
}

Vec6 TwistDelta::to_vector() const {
  Vec6 v;
  v << translation, rotation;
  return v;
}

bool TwistDelta::is_finite() const {
  return translation.allFinite() && rotation.allFinite();
}

Pose exp_delta(const TwistDelta& d) {
  if (!d.is_finite())
    throw std::invalid_argument("exp_delta: non-finite twist");
  if (d.rotation.norm() >= kPi)
    throw std::invalid_argument("exp_delta: rotation magnitude must be < pi");
  return {d.translation, Rotation::from_axis_angle(d.rotation)};
}

TwistDelta log_delta(const Pose& p) {
  return {p.translation, p.rotation.axis_angle()};
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.translation + a.rotation.rotate(b.translation),
          a.rotation * b.rotation};
}

Pose inverse(const Pose& p) {
  const Rotation ri = p.rotation.inverse();
  return {-ri.rotate(p.translation), ri};
}

Vec3 apply(const Pose& p, const Vec3& pt) {
  return p.rotation.rotate(pt) + p.translation;
}

Pose propagate_ee_frame(const Pose& t_we, const TwistDelta& a,
                        const TwistDelta& delta_a) {
  return compose(compose(t_we, exp_delta(a)), exp_delta(delta_a));
}

std::array<double, 7> pose_to_array(const Pose& p) {
  return {p.translation.x(), p.translation.y(), p.translation.z(),
          p.rotation.q.w(),  p.rotation.q.x(),  p.rotation.q.y(),
          p.rotation.q.z()};
}

Pose pose_from_array(const std::array<double, 7>& a) {
  return {Vec3(a[0], a[1], a[2]),
          Rotation::from_quaternion(a[3], a[4], a[5], a[6])};
}

}  // namespace contactservo
