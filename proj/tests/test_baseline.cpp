#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "contactservo/baseline.hpp"
#include "contactservo/perception.hpp"

using namespace contactservo;

namespace {

double wrist_z_for_tip(const ToolSpec& tool, double tip_z) {
  const ToolFrame f = tool_frame(tool);
  return tip_z + tool.handle_length + tool.blade_length * std::sin(f.pitch);
}

}  // namespace

TEST_CASE("rigid rollout: free space stays contact-free") {
  ToolSpec tool;
  const RigidToolModel m = RigidToolModel::from_tool(tool);
  Pose high;
  high.translation = Vec3(0, 0, wrist_z_for_tip(tool, 0.05));
  std::vector<TwistDelta> actions(4);
  for (auto& a : actions) a.translation = Vec3(0.005, 0, 0.001);
  const auto preds = rigid_rollout(m, high, actions);
  REQUIRE(preds.size() == 5);
  for (const auto& p : preds) {
    CHECK(p.c_b == 0);
    CHECK(!p.line_world.has_value());
  }
}

TEST_CASE("rigid rollout: flat press yields the penetrating-set diagonal") {
  ToolSpec tool;
  const RigidToolModel m = RigidToolModel::from_tool(tool);
  // Tip 1 mm below the table: the penetrating set is a thin full-width
  // strip at the leading edge; its farthest pair spans the strip corners.
  Pose press;
  press.translation = Vec3(0, 0, wrist_z_for_tip(tool, -0.001));
  const auto preds = rigid_rollout(m, press, {});
  REQUIRE(preds.size() == 1);
  REQUIRE(preds[0].c_b == 1);
  const ContactLine line = *preds[0].line_world;

  // Oracle: brute-force farthest pair over the penetrating set.
  PointCloud pen;
  for (const auto& p : m.tool_cloud_ee) {
    const Vec3 q = apply(press, p);
    if (q.z() < 0.0) pen.push_back(q);
  }
  const auto [oa, ob] = farthest_pair(pen);
  CHECK((line.a - oa).norm() == 0.0);
  CHECK((line.b - ob).norm() == 0.0);
  CHECK(line.length() >= tool.blade_width - 1e-6);
}

TEST_CASE("rigid rollout: rolled corner press confines the line") {
  ToolSpec tool;
  const RigidToolModel m = RigidToolModel::from_tool(tool);
  Pose press;
  press.rotation = Rotation::from_axis_angle(Vec3(0.15, 0, 0));
  press.translation = Vec3(0, 0, wrist_z_for_tip(tool, 0.0) - 0.002);
  const auto preds = rigid_rollout(m, press, {});
  REQUIRE(preds[0].c_b == 1);
  const ContactLine line = *preds[0].line_world;
  // Positive roll raises +y: contact gathers at the -y corner.
  const Vec3 corner =
      apply(press, blade_point_ee(tool, tool.blade_length,
                                  -0.5 * tool.blade_width, 0.0));
  CHECK((line.a - corner).norm() < tool.blade_width);
  CHECK((line.b - corner).norm() < tool.blade_width);
  CHECK(line.length() < 0.8 * tool.blade_width);
}

TEST_CASE("rigid rollout: deepening a flat press never shrinks the set") {
  ToolSpec tool;
  const RigidToolModel m = RigidToolModel::from_tool(tool);
  std::size_t prev = 0;
  for (double depth : {0.0005, 0.001, 0.002, 0.004, 0.008}) {
    Pose press;
    press.translation = Vec3(0, 0, wrist_z_for_tip(tool, -depth));
    std::size_t count = 0;
    for (const auto& p : m.tool_cloud_ee)
      if (apply(press, p).z() < 0.0) ++count;
    CHECK(count >= prev);
    prev = count;
  }
}

TEST_CASE("rigid rollout composes commanded actions only") {
  ToolSpec tool;
  const RigidToolModel m = RigidToolModel::from_tool(tool);
  Pose start;
  start.translation = Vec3(0, 0, wrist_z_for_tip(tool, 0.002));
  TwistDelta down;
  down.translation = Vec3(0, 0, -0.004);
  const auto preds = rigid_rollout(m, start, {down, down});
  CHECK(preds[0].c_b == 0);
  CHECK(preds[1].c_b == 1);  // tip commanded 2 mm below
  CHECK(preds[2].c_b == 1);
  // Output is independent of any compliance parameter by construction: the
  // same cloud and poses fully determine it.
  ToolSpec stiff = tool;
  stiff.bend_stiffness = 1e4;
  stiff.normal_stiffness = 1e6;
  const auto preds2 = rigid_rollout(RigidToolModel::from_tool(stiff), start,
                                    {down, down});
  for (int t = 0; t < 3; ++t) CHECK(preds2[t].c_b == preds[t].c_b);
}
