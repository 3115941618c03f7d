#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "contactservo/contact.hpp"
#include "contactservo/se3.hpp"

namespace contactservo {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fixed-point failure of the quasi-static solve; carries the last iterate.
struct SolveNonConvergence : SimError {
  SolveNonConvergence(const std::string& msg, const Pose& last)
      : SimError(msg), last_iterate(last) {}
  Pose last_iterate;
};

/// Compliant spatula: a rigid handle below the wrist, a rectangular blade
/// attached at a torsional hinge. mount_angle is the angle between handle
/// axis and blade plane; the blade pitch below horizontal (neutral EE
/// rotation) is pi/2 - mount_angle.
struct ToolSpec {
  double blade_width = 0.08;     // m, along the hinge axis
  double blade_length = 0.10;    // m, hinge to leading edge
  double handle_length = 0.12;   // m, wrist to hinge
  double mount_angle = 0.6;      // rad
  double bend_stiffness = 2.0;   // N*m/rad torsional spring at the hinge
  double normal_stiffness = 5000.0;  // N/m residual penetration spring
  double friction_mu = 0.4;
  std::string name = "train-80";

  void validate() const;
};

struct ImpedanceSpec {
  double kp_trans = 600.0;  // N/m
  double kp_rot = 30.0;     // N*m/rad

  void validate() const;
};

struct Ellipsoid {
  Vec3 center{Vec3::Zero()};
  Vec3 semi_axes{0.02, 0.02, 0.02};

  bool contains(const Vec3& p) const {
    const Vec3 d = (p - center).cwiseQuotient(semi_axes);
    return d.squaredNorm() < 1.0;
  }
};

/// Per-cell mass raster pressed onto the table.
struct MaterialGrid {
  Eigen::Vector2d origin{0.0, 0.0};  // world xy of cell (0,0) corner
  double cell_size = 0.002;          // m
  Eigen::MatrixXd mass;              // rows = x cells, cols = y cells, kg
  double drag_force = 0.0;           // N, constant motion-opposing drag

  double total_mass() const { return mass.size() ? mass.sum() : 0.0; }
  Eigen::Vector2d cell_center(int i, int j) const {
    return origin + cell_size * Eigen::Vector2d(i + 0.5, j + 0.5);
  }
};

struct SceneSpec {
  std::vector<Ellipsoid> obstacles;
  std::optional<MaterialGrid> material;
  Pose camera = []() {
    Pose c;
    c.translation = Vec3(0.55, 0.0, 0.75);
    return c;
  }();

  void validate() const;
};

/// Hinge frame of the tool in EE coordinates.
struct ToolFrame {
  Vec3 junction;
  Vec3 blade_x;  // hinge -> leading edge, undeflected
  Vec3 blade_y;  // hinge axis (blade width direction)
  Vec3 blade_n;  // blade plane normal, away from the table in neutral pose
  double pitch;  // rad below horizontal at neutral EE rotation
};

ToolFrame tool_frame(const ToolSpec& tool);

/// EE-frame position of blade material point (u in [0, blade_length],
/// v in [-width/2, width/2]) at hinge deflection `theta`.
Vec3 blade_point_ee(const ToolSpec& tool, double u, double v, double theta);

/// Undeflected tool surface cloud in the EE frame (blade sheet + handle
/// axis samples) at the given spacing. Used by the rigid-body baseline.
PointCloud sample_tool_cloud_ee(const ToolSpec& tool, double spacing);

struct SimState {
  Pose commanded_ee;  // latest commanded target pose
  Pose realized_ee;   // impedance equilibrium pose
  double blade_deflection = 0.0;  // rad
  ContactState contact;           // ground truth at the realized pose
  SceneSpec scene;
  ToolSpec tool;
  ImpedanceSpec impedance;
  int step_index = 0;
  uint64_t seed = 0;
  bool obstacle_collision = false;  // this step
  int collision_count = 0;          // cumulative
};

struct RenderParams {
  double density = 15000.0;        // points per m^2 on table/obstacles
  double tool_density_factor = 6.0;  // extra sampling on blade and handle
  double noise_sigma = 0.002;      // m, Gaussian per coordinate
  double handle_radius = 0.009;    // m
  double table_patch_radius = 0.6;  // m around the EE
  double hpr_radius_param = 1000.0;
};

SimState reset(const SceneSpec& scene, const ToolSpec& tool,
               const ImpedanceSpec& imp, const Pose& initial_pose,
               uint64_t seed);

/// Quasi-static step: the commanded target is the current realized pose
/// composed with the action; the realized pose, blade deflection and contact
/// state come from the impedance/contact equilibrium.
SimState step(const SimState& s, const TwistDelta& a);

ContactState ground_truth_contact(const SimState& s);

/// n_samples noisy wrench readings (sigma 0.05 N / 0.005 N*m), EE frame,
/// deterministic given (seed, step_index).
WrenchHistory measure_wrench(const SimState& s, int n_samples = 4);

/// Training label for the action offset: log(inv(commanded) * realized)
/// of the state the action produced.
TwistDelta realized_offset(const SimState& s_next, const TwistDelta& a);

PointCloud render_pointcloud(const SimState& s, const RenderParams& params = {});
PointCloud render_pointcloud(const SimState& s, double density,
                             double noise_sigma);

/// Dense noiseless blade scan on a regular grid, for labeling only.
PointCloud render_scan(const SimState& s);

/// Removes mass in the quadrilateral between two consecutive contact lines
/// (xy projection, endpoint pairing chosen to avoid self-intersection).
MaterialGrid sweep_material(const MaterialGrid& grid, const ContactLine& prev,
                            const ContactLine& cur);

/// Per-axis action bounds shared by data collection and control.
struct ActionBounds {
  double max_translation = 0.008;  // m per axis
  double max_rotation = 0.06;      // rad per axis

  bool contains(const TwistDelta& a, double tol = 1e-9) const;
  TwistDelta clamp(const TwistDelta& a) const;
};

/// Analytic contact summary of the deflected blade against the table plane.
/// Exposed so independent solvers/oracles can cross-check the physics.
struct BladeContactInfo {
  bool penetrating = false;
  double area = 0.0;              // m^2 of the penetrating region
  double mean_penetration = 0.0;  // m
  double width_fraction = 0.0;    // contact width / blade width
  double normal_force = 0.0;      // N
  double hinge_moment = 0.0;      // N*m of the normal force about the hinge
  Vec3 centroid_world{Vec3::Zero()};
};

BladeContactInfo evaluate_blade_contact(const ToolSpec& tool, const Pose& pose,
                                        double theta);

/// Hinge deflection satisfying the torque balance
/// contact_moment(theta) = bend_stiffness * theta.
double solve_blade_deflection(const ToolSpec& tool, const Pose& pose);

}  // namespace contactservo
