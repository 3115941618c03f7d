#pragma once

#include <optional>
#include <vector>

#include "contactservo/contact.hpp"
#include "contactservo/se3.hpp"
#include "contactservo/sim.hpp"

namespace contactservo {

/// Rigid-body contact baseline: known tool cloud in the EE frame, perfectly
/// executed commanded actions, table-penetration test.
struct RigidToolModel {
  PointCloud tool_cloud_ee;

  static RigidToolModel from_tool(const ToolSpec& tool, double spacing = 0.002);
};

struct RigidPrediction {
  int c_b = 0;
  std::optional<ContactLine> line_world;
};

/// Commanded-kinematics rollout: poses compose the actions only; at each of
/// the T+1 steps the transformed tool points below the table form the
/// penetrating set, whose farthest pair is the predicted contact line. No
/// wrench is predicted.
std::vector<RigidPrediction> rigid_rollout(const RigidToolModel& tool,
                                           const Pose& t_we0,
                                           const std::vector<TwistDelta>& actions);

}  // namespace contactservo
