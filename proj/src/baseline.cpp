#include "contactservo/baseline.hpp"

#include <stdexcept>

#include "contactservo/perception.hpp"

namespace contactservo {

RigidToolModel RigidToolModel::from_tool(const ToolSpec& tool, double spacing) {
  RigidToolModel m;
  m.tool_cloud_ee = sample_tool_cloud_ee(tool, spacing);
  return m;
}

std::vector<RigidPrediction> rigid_rollout(const RigidToolModel& tool,
                                           const Pose& t_we0,
                                           const std::vector<TwistDelta>& actions) {
  if (tool.tool_cloud_ee.empty())
    throw std::invalid_argument("rigid_rollout: empty tool cloud");

  std::vector<RigidPrediction> out;
  out.reserve(actions.size() + 1);
  Pose t_we = t_we0;
  for (std::size_t t = 0; t <= actions.size(); ++t) {
    PointCloud penetrating;
    for (const auto& p : tool.tool_cloud_ee) {
      const Vec3 q = apply(t_we, p);
      if (q.z() < 0.0) penetrating.push_back(q);
    }
    RigidPrediction pred;
    if (penetrating.size() >= 2) {
      pred.c_b = 1;
      const auto [a, b] = farthest_pair(penetrating);
      pred.line_world = ContactLine{a, b};
    } else if (!penetrating.empty()) {
      pred.c_b = 1;  // single grazing point: degenerate line
      pred.line_world = ContactLine{penetrating[0], penetrating[0]};
    }
    out.push_back(pred);
    if (t < actions.size()) t_we = compose(t_we, exp_delta(actions[t]));
  }
  return out;
}

}  // namespace contactservo
