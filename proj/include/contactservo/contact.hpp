#pragma once

#include <vector>

#include "contactservo/se3.hpp"

namespace contactservo {

using PointCloud = std::vector<Vec3>;
using WrenchHistory = Eigen::Matrix<double, Eigen::Dynamic, 6>;  // rows = samples

/// Contact line as two 3D endpoints (the 2x3 contact geometry).
struct ContactLine {
  Vec3 a{Vec3::Zero()};
  Vec3 b{Vec3::Zero()};

  double length() const { return (b - a).norm(); }
  Vec3 centroid() const { return 0.5 * (a + b); }
};

/// Contact feature triple: binary contact, contact line, wrench at the
/// wrist (force then torque, EE frame).
struct ContactState {
  int c_b = 0;
  ContactLine line;   // meaningful only when c_b == 1
  Vec6 wrench{Vec6::Zero()};
};

}  // namespace contactservo
