#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>

namespace contactservo {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Unit quaternion kept in canonical form (norm 1, w >= 0).
struct Rotation {
  Eigen::Quaterniond q{1.0, 0.0, 0.0, 0.0};

  static Rotation identity() { return {}; }
  static Rotation from_quaternion(double w, double x, double y, double z);
  static Rotation from_axis_angle(const Vec3& aa);

  /// Canonical axis-angle (angle in [0, pi)). At angle pi the axis sign is
  /// fixed by making its largest-magnitude component positive.
  Vec3 axis_angle() const;

  Rotation operator*(const Rotation& rhs) const;
  Rotation inverse() const;
  Vec3 rotate(const Vec3& v) const { return q * v; }
  Mat3 matrix() const { return q.toRotationMatrix(); }
  void canonicalize();
};

struct Pose {
  Vec3 translation{Vec3::Zero()};
  Rotation rotation;

  static Pose identity() { return {}; }
};

/// Pose increment: translation in meters plus axis-angle rotation in radians.
/// Actions and action offsets are carried in this form.
struct TwistDelta {
  Vec3 translation{Vec3::Zero()};
  Vec3 rotation{Vec3::Zero()};

  static TwistDelta zero() { return {}; }
  static TwistDelta from_vector(const Vec6& v);
  Vec6 to_vector() const;
  bool is_finite() const;
};

Pose exp_delta(const TwistDelta& d);
TwistDelta log_delta(const Pose& p);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
Vec3 apply(const Pose& p, const Vec3& pt);

/// W_T_ee(t+1) = W_T_ee(t) * T(a) * T(delta_a).
Pose propagate_ee_frame(const Pose& t_we, const TwistDelta& a,
                        const TwistDelta& delta_a);

// Wire format helpers: poses as [tx,ty,tz,qw,qx,qy,qz], twists as 6 numbers.
std::array<double, 7> pose_to_array(const Pose& p);
Pose pose_from_array(const std::array<double, 7>& a);

}  // namespace contactservo
