#include "contactservo/sim.hpp"

#include <algorithm>
#include <cmath>

#include "contactservo/perception.hpp"
#include "contactservo/rng.hpp"

namespace contactservo {

namespace {

// Ground-truth band; keep equal to LabelParams::band_height so scan-based
// labels and ground truth share one definition of "touching".
constexpr double kContactBand = 0.8e-3;    // m
constexpr double kMinContactLine = 1e-3;   // m, c_b = 1 iff line longer
// The hinge stops bending before the blade goes flat on the table; keeping
// this much pitch makes the contact region a thin band rather than a patch.
constexpr double kMinResidualTilt = 0.65;  // rad
constexpr double kMaxDeflection = 1.2;     // rad, absolute cap
constexpr double kWrenchNoiseForce = 0.05;   // N
constexpr double kWrenchNoiseTorque = 0.005;  // N*m

enum StreamTag : uint64_t {
  kTagWrench = 1,
  kTagRender = 2,
};

struct UV {
  double u, v;
};

// z over the blade sheet is affine: z(u, v) = z0 + gu*u + gv*v.
struct BladePlane {
  double z0, gu, gv;
  double z(const UV& p) const { return z0 + gu * p.u + gv * p.v; }
};

std::vector<UV> blade_rect(const ToolSpec& tool) {
  const double hw = 0.5 * tool.blade_width;
  return {{0.0, -hw}, {tool.blade_length, -hw}, {tool.blade_length, hw}, {0.0, hw}};
}

// Sutherland-Hodgman clip of a convex polygon against c0 + cu*u + cv*v <= 0.
std::vector<UV> clip_halfplane(const std::vector<UV>& poly, double c0,
                               double cu, double cv) {
  std::vector<UV> out;
  const int n = static_cast<int>(poly.size());
  for (int i = 0; i < n; ++i) {
    const UV& a = poly[i];
    const UV& b = poly[(i + 1) % n];
    const double fa = c0 + cu * a.u + cv * a.v;
    const double fb = c0 + cu * b.u + cv * b.v;
    const bool ina = fa <= 0.0, inb = fb <= 0.0;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double t = fa / (fa - fb);
      out.push_back({a.u + t * (b.u - a.u), a.v + t * (b.v - a.v)});
    }
  }
  return out;
}

double polygon_area(const std::vector<UV>& poly) {
  double s = 0.0;
  const int n = static_cast<int>(poly.size());
  for (int i = 0; i < n; ++i) {
    const UV& a = poly[i];
    const UV& b = poly[(i + 1) % n];
    s += a.u * b.v - b.u * a.v;
  }
  return 0.5 * std::abs(s);
}

UV polygon_centroid(const std::vector<UV>& poly) {
  double s = 0.0, cu = 0.0, cv = 0.0;
  const int n = static_cast<int>(poly.size());
  for (int i = 0; i < n; ++i) {
    const UV& a = poly[i];
    const UV& b = poly[(i + 1) % n];
    const double w = a.u * b.v - b.u * a.v;
    s += w;
    cu += (a.u + b.u) * w;
    cv += (a.v + b.v) * w;
  }
  if (std::abs(s) < 1e-18) {  // degenerate: fall back to vertex mean
    for (const auto& p : poly) { cu += p.u; cv += p.v; }
    const double n_inv = poly.empty() ? 0.0 : 1.0 / poly.size();
    return {cu * n_inv, cv * n_inv};
  }
  return {cu / (3.0 * s), cv / (3.0 * s)};
}

/// Geometry of the blade at a candidate wrist pose and deflection.
struct BladeEval {
  BladePlane plane;
  Vec3 junction_w;
  Vec3 hinge_axis_w;  // world direction of blade_y
  Mat3 rot;           // wrist rotation matrix
  Vec3 bx_w, bn_w;    // world blade axes at deflection 0
};

BladeEval eval_blade(const ToolSpec& tool, const Pose& pose, double theta) {
  const ToolFrame f = tool_frame(tool);
  BladeEval e;
  e.rot = pose.rotation.matrix();
  e.junction_w = e.rot * f.junction + pose.translation;
  e.hinge_axis_w = e.rot * f.blade_y;
  e.bx_w = e.rot * f.blade_x;
  e.bn_w = e.rot * f.blade_n;
  const Vec3 dir = std::cos(theta) * e.bx_w + std::sin(theta) * e.bn_w;
  e.plane.z0 = e.junction_w.z();
  e.plane.gu = dir.z();
  e.plane.gv = e.hinge_axis_w.z();
  return e;
}

Vec3 uv_to_world(const BladeEval& e, const ToolSpec& tool, double theta,
                 const UV& p) {
  const Vec3 dir = std::cos(theta) * e.bx_w + std::sin(theta) * e.bn_w;
  (void)tool;
  return e.junction_w + p.u * dir + p.v * e.hinge_axis_w;
}

struct ContactEval {
  bool penetrating = false;
  double area = 0.0;
  double mean_pen = 0.0;
  double frac = 0.0;  // contact width fraction of the blade width
  UV centroid{0.0, 0.0};
  Vec3 centroid_w{Vec3::Zero()};
  double normal_force = 0.0;
  double hinge_moment = 0.0;  // of the normal force, positive lifts the tip
};

ContactEval eval_contact(const ToolSpec& tool, const BladeEval& e,
                         double theta) {
  ContactEval c;
  const std::vector<UV> pen =
      clip_halfplane(blade_rect(tool), e.plane.z0, e.plane.gu, e.plane.gv);
  if (pen.size() < 3) return c;
  c.area = polygon_area(pen);
  if (c.area < 1e-12) return c;
  c.penetrating = true;
  c.centroid = polygon_centroid(pen);
  c.mean_pen = -e.plane.z(c.centroid);  // exact mean of the linear depth
  double vmin = pen[0].v, vmax = pen[0].v;
  for (const auto& p : pen) {
    vmin = std::min(vmin, p.v);
    vmax = std::max(vmax, p.v);
  }
  c.frac = std::min(1.0, (vmax - vmin) / tool.blade_width);
  c.normal_force = tool.normal_stiffness * std::max(0.0, c.mean_pen) * c.frac;
  c.centroid_w = uv_to_world(e, tool, theta, c.centroid);
  const Vec3 m = (c.centroid_w - e.junction_w).cross(Vec3(0, 0, c.normal_force));
  c.hinge_moment = m.dot(-e.hinge_axis_w);
  return c;
}

/// Hinge deflection from torque balance: the contact moment about the hinge
/// equals the torsional spring moment. Monotone in theta; bisection.
double max_deflection(const ToolSpec& tool) {
  const double pitch = 0.5 * M_PI - tool.mount_angle;
  return std::clamp(pitch - kMinResidualTilt, 0.0, kMaxDeflection);
}

double solve_deflection(const ToolSpec& tool, const Pose& pose) {
  const auto balance = [&](double theta) {
    const BladeEval e = eval_blade(tool, pose, theta);
    const ContactEval c = eval_contact(tool, e, theta);
    return c.hinge_moment - tool.bend_stiffness * theta;
  };
  if (balance(0.0) <= 0.0) return 0.0;
  double lo = 0.0, hi = max_deflection(tool);
  if (hi <= 0.0) return 0.0;
  if (balance(hi) > 0.0) return hi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (balance(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct WrenchEval {
  Vec6 wrench_w = Vec6::Zero();  // force, torque at the wrist, world frame
  double theta = 0.0;
  ContactEval contact;
};

WrenchEval eval_wrench(const SimState& s, const Pose& pose,
                       const Vec3& tangent_dir) {
  WrenchEval w;
  w.theta = solve_deflection(s.tool, pose);
  const BladeEval e = eval_blade(s.tool, pose, w.theta);
  w.contact = eval_contact(s.tool, e, w.theta);
  if (!w.contact.penetrating) return w;

  Vec3 force = Vec3(0, 0, w.contact.normal_force);
  force += -s.tool.friction_mu * w.contact.normal_force * tangent_dir;
  if (s.scene.material && s.scene.material->drag_force > 0.0)
    force += -s.scene.material->drag_force * tangent_dir;
  const Vec3 torque = (w.contact.centroid_w - pose.translation).cross(force);
  w.wrench_w.head<3>() = force;
  w.wrench_w.tail<3>() = torque;
  return w;
}

Pose displaced_pose(const Pose& cmd, const Vec6& x) {
  Pose p;
  p.translation = cmd.translation + x.head<3>();
  p.rotation = Rotation::from_axis_angle(x.tail<3>()) * cmd.rotation;
  return p;
}

/// Impedance equilibrium: K x = wrench(pose(x)). Damped Newton with a
/// finite-difference Jacobian; x = 0 is exact out of contact.
struct Equilibrium {
  Pose realized;
  WrenchEval wrench;
};

Equilibrium solve_equilibrium(const SimState& s, const Pose& cmd,
                              const Vec3& tangent_dir) {
  Vec6 kgain;
  kgain << s.impedance.kp_trans, s.impedance.kp_trans, s.impedance.kp_trans,
      s.impedance.kp_rot, s.impedance.kp_rot, s.impedance.kp_rot;

  Vec6 x = Vec6::Zero();
  const auto residual = [&](const Vec6& xi, WrenchEval* out) {
    const WrenchEval w = eval_wrench(s, displaced_pose(cmd, xi), tangent_dir);
    if (out) *out = w;
    return Vec6(kgain.cwiseProduct(xi) - w.wrench_w);
  };

  WrenchEval w;
  Vec6 res = residual(x, &w);
  if (res.norm() < 1e-12) return {cmd, w};  // free space: exact

  for (int it = 0; it < 20; ++it) {
    Eigen::Matrix<double, 6, 6> jac;
    const double fd = 1e-7;
    for (int k = 0; k < 6; ++k) {
      Vec6 xp = x;
      xp[k] += fd;
      jac.col(k) = (residual(xp, nullptr) - res) / fd;
    }
    Vec6 dx = jac.fullPivLu().solve(-res);
    double step = 1.0;
    Vec6 x_next;
    Vec6 res_next;
    WrenchEval w_next;
    for (int bt = 0; bt < 8; ++bt) {
      x_next = x + step * dx;
      res_next = residual(x_next, &w_next);
      if (res_next.norm() < res.norm() || bt == 7) break;
      step *= 0.5;
    }
    const Vec6 delta = x_next - x;
    x = x_next;
    res = res_next;
    w = w_next;
    if (delta.head<3>().norm() < 1e-7 && delta.tail<3>().norm() < 1e-7)
      return {displaced_pose(cmd, x), w};
  }
  throw SolveNonConvergence("quasi-static solve did not converge",
                            displaced_pose(cmd, x));
}

/// Ground-truth contact line: farthest vertex pair of the blade region with
/// z in [0, kContactBand]. The region is the rectangle clipped by two
/// parallel lines, so every vertex lies on the rectangle boundary. Falls
/// back to the surface-clamped penetration region if the blade sits fully
/// below the table.
ContactState ground_truth(const ToolSpec& tool, const Pose& realized,
                          double theta, const Vec6& wrench_w) {
  ContactState out;
  const BladeEval e = eval_blade(tool, realized, theta);
  const Mat3 rt = realized.rotation.matrix().transpose();
  out.wrench.head<3>() = rt * wrench_w.head<3>();
  out.wrench.tail<3>() = rt * wrench_w.tail<3>();

  const std::vector<UV> rect = blade_rect(tool);
  std::vector<UV> band = clip_halfplane(rect, e.plane.z0 - kContactBand,
                                        e.plane.gu, e.plane.gv);
  band = clip_halfplane(band, -e.plane.z0, -e.plane.gu, -e.plane.gv);

  ContactLine line;
  bool have_line = false;
  if (band.size() >= 2) {
    PointCloud pts;
    for (const auto& p : band) pts.push_back(uv_to_world(e, tool, theta, p));
    const auto [a, b] = farthest_pair(pts);
    line.a = a;
    line.b = b;
    have_line = true;
  } else {
    const std::vector<UV> pen =
        clip_halfplane(rect, e.plane.z0, e.plane.gu, e.plane.gv);
    if (pen.size() >= 2) {
      PointCloud pts;
      for (const auto& p : pen) {
        Vec3 q = uv_to_world(e, tool, theta, p);
        q.z() = 0.0;
        pts.push_back(q);
      }
      const auto [a, b] = farthest_pair(pts);
      line.a = a;
      line.b = b;
      have_line = true;
    }
  }

  if (have_line && line.length() > kMinContactLine) {
    out.c_b = 1;
    // Canonical endpoint order keeps labels deterministic.
    const Vec3 lo = line.a, hi = line.b;
    const bool swap = (hi.x() != lo.x())   ? hi.x() < lo.x()
                      : (hi.y() != lo.y()) ? hi.y() < lo.y()
                                           : hi.z() < lo.z();
    out.line = swap ? ContactLine{hi, lo} : ContactLine{lo, hi};
  }
  return out;
}

Vec3 frozen_tangent(const Pose& prev_realized, const Pose& cmd) {
  Vec3 d = cmd.translation - prev_realized.translation;
  d.z() = 0.0;
  const double n = d.norm();
  return n < 1e-9 ? Vec3::Zero() : Vec3(d / n);
}

bool tool_collides(const SimState& s, const Pose& pose, double theta) {
  if (s.scene.obstacles.empty()) return false;
  const ToolSpec& tool = s.tool;
  const BladeEval e = eval_blade(tool, pose, theta);
  const int nu = 21, nv = 17;
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      const UV p{tool.blade_length * i / (nu - 1.0),
                 tool.blade_width * (j / (nv - 1.0) - 0.5)};
      const Vec3 q = uv_to_world(e, tool, theta, p);
      for (const auto& ob : s.scene.obstacles)
        if (ob.contains(q)) return true;
    }
  for (int i = 0; i <= 12; ++i) {
    const Vec3 q = apply(pose, (i / 12.0) * tool_frame(tool).junction);
    for (const auto& ob : s.scene.obstacles)
      if (ob.contains(q)) return true;
  }
  return false;
}

}  // namespace

BladeContactInfo evaluate_blade_contact(const ToolSpec& tool, const Pose& pose,
                                        double theta) {
  const BladeEval e = eval_blade(tool, pose, theta);
  const ContactEval c = eval_contact(tool, e, theta);
  BladeContactInfo info;
  info.penetrating = c.penetrating;
  info.area = c.area;
  info.mean_penetration = c.mean_pen;
  info.width_fraction = c.frac;
  info.normal_force = c.normal_force;
  info.hinge_moment = c.hinge_moment;
  info.centroid_world = c.centroid_w;
  return info;
}

double solve_blade_deflection(const ToolSpec& tool, const Pose& pose) {
  return solve_deflection(tool, pose);
}

void ToolSpec::validate() const {
  const bool ok = blade_width > 0 && blade_length > 0 && handle_length > 0 &&
                  mount_angle > 0 && bend_stiffness > 0 &&
                  normal_stiffness > 0 && friction_mu >= 0 &&
                  friction_mu <= 2.0;
  if (!ok) throw SimError("ToolSpec: invalid parameters for tool '" + name + "'");
}

void ImpedanceSpec::validate() const {
  if (kp_trans <= 0 || kp_rot <= 0)
    throw SimError("ImpedanceSpec: gains must be positive");
}

void SceneSpec::validate() const {
  for (const auto& ob : obstacles)
    if ((ob.semi_axes.array() <= 0).any())
      throw SimError("SceneSpec: obstacle semi-axes must be positive");
  if (camera.translation.z() <= 0)
    throw SimError("SceneSpec: camera must be above the table");
  if (material) {
    if (material->cell_size <= 0) throw SimError("MaterialGrid: cell_size <= 0");
    if (material->mass.size() && material->mass.minCoeff() < 0)
      throw SimError("MaterialGrid: negative mass");
  }
}

ToolFrame tool_frame(const ToolSpec& tool) {
  ToolFrame f;
  f.pitch = 0.5 * M_PI - tool.mount_angle;
  f.junction = Vec3(0, 0, -tool.handle_length);
  f.blade_x = Vec3(std::cos(f.pitch), 0, -std::sin(f.pitch));
  f.blade_y = Vec3(0, 1, 0);
  f.blade_n = Vec3(std::sin(f.pitch), 0, std::cos(f.pitch));
  return f;
}

Vec3 blade_point_ee(const ToolSpec& tool, double u, double v, double theta) {
  const ToolFrame f = tool_frame(tool);
  const Vec3 dir = std::cos(theta) * f.blade_x + std::sin(theta) * f.blade_n;
  return f.junction + u * dir + v * f.blade_y;
}

PointCloud sample_tool_cloud_ee(const ToolSpec& tool, double spacing) {
  PointCloud out;
  const int nu = std::max(2, static_cast<int>(std::lround(tool.blade_length / spacing)) + 1);
  const int nv = std::max(2, static_cast<int>(std::lround(tool.blade_width / spacing)) + 1);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j)
      out.push_back(blade_point_ee(tool, tool.blade_length * i / (nu - 1.0),
                                   tool.blade_width * (j / (nv - 1.0) - 0.5),
                                   0.0));
  const ToolFrame f = tool_frame(tool);
  const int nh = std::max(2, static_cast<int>(std::lround(tool.handle_length / spacing)) + 1);
  for (int i = 0; i < nh; ++i) out.push_back((i / (nh - 1.0)) * f.junction);
  return out;
}

bool ActionBounds::contains(const TwistDelta& a, double tol) const {
  return a.translation.cwiseAbs().maxCoeff() <= max_translation + tol &&
         a.rotation.cwiseAbs().maxCoeff() <= max_rotation + tol;
}

TwistDelta ActionBounds::clamp(const TwistDelta& a) const {
  TwistDelta out = a;
  for (int i = 0; i < 3; ++i) {
    out.translation[i] =
        std::clamp(out.translation[i], -max_translation, max_translation);
    out.rotation[i] = std::clamp(out.rotation[i], -max_rotation, max_rotation);
  }
  return out;
}

SimState reset(const SceneSpec& scene, const ToolSpec& tool,
               const ImpedanceSpec& imp, const Pose& initial_pose,
               uint64_t seed) {
  tool.validate();
  imp.validate();
  scene.validate();

  SimState s;
  s.scene = scene;
  s.tool = tool;
  s.impedance = imp;
  s.seed = seed;
  s.commanded_ee = initial_pose;
  s.realized_ee = initial_pose;

  for (const auto& p : sample_tool_cloud_ee(tool, 0.005)) {
    const Vec3 q = apply(initial_pose, p);
    if (q.z() < 1e-4)
      throw SimError("reset: initial pose intersects the table");
    for (const auto& ob : scene.obstacles)
      if (ob.contains(q)) throw SimError("reset: initial pose hits an obstacle");
  }
  s.contact = ground_truth(tool, initial_pose, 0.0, Vec6::Zero());
  if (s.contact.c_b)
    throw SimError("reset: initial pose already in contact");
  return s;
}

SimState step(const SimState& s, const TwistDelta& a) {
  const ActionBounds bounds;
  if (!a.is_finite() || !bounds.contains(a, 1e-9))
    throw SimError("step: action outside per-step bounds");

  SimState next = s;
  const Pose cmd = compose(s.realized_ee, exp_delta(a));
  const Vec3 tangent = frozen_tangent(s.realized_ee, cmd);

  const Equilibrium eq = solve_equilibrium(s, cmd, tangent);
  next.commanded_ee = cmd;
  next.realized_ee = eq.realized;
  next.blade_deflection = eq.wrench.theta;
  next.contact = ground_truth(s.tool, eq.realized, eq.wrench.theta,
                              eq.wrench.wrench_w);
  next.step_index = s.step_index + 1;
  next.obstacle_collision = tool_collides(s, eq.realized, eq.wrench.theta);
  next.collision_count = s.collision_count + (next.obstacle_collision ? 1 : 0);

  if (next.scene.material && s.contact.c_b && next.contact.c_b)
    next.scene.material = sweep_material(*next.scene.material, s.contact.line,
                                         next.contact.line);
  return next;
}

ContactState ground_truth_contact(const SimState& s) { return s.contact; }

WrenchHistory measure_wrench(const SimState& s, int n_samples) {
  if (n_samples < 1) throw SimError("measure_wrench: n_samples < 1");
  RngStream rng = RngStream::of(s.seed, kTagWrench, s.step_index);
  WrenchHistory h(n_samples, 6);
  for (int i = 0; i < n_samples; ++i)
    for (int k = 0; k < 6; ++k)
      h(i, k) = s.contact.wrench[k] +
                rng.gaussian(0.0, k < 3 ? kWrenchNoiseForce : kWrenchNoiseTorque);
  return h;
}

TwistDelta realized_offset(const SimState& s_next, const TwistDelta& a) {
  (void)a;  // commanded_ee already includes the action
  return log_delta(compose(inverse(s_next.commanded_ee), s_next.realized_ee));
}

PointCloud render_pointcloud(const SimState& s, const RenderParams& params) {
  if (params.density <= 0) throw SimError("render: density must be positive");
  RngStream rng = RngStream::of(s.seed, kTagRender, s.step_index);
  PointCloud pts;

  const ToolSpec& tool = s.tool;
  const BladeEval e = eval_blade(tool, s.realized_ee, s.blade_deflection);
  const double tool_density = params.density * params.tool_density_factor;

  const int n_blade = std::max(
      1, static_cast<int>(std::lround(tool_density * tool.blade_width * tool.blade_length)));
  for (int i = 0; i < n_blade; ++i) {
    const UV p{rng.uniform(0.0, tool.blade_length),
               rng.uniform(-0.5 * tool.blade_width, 0.5 * tool.blade_width)};
    pts.push_back(uv_to_world(e, tool, s.blade_deflection, p));
  }

  const ToolFrame f = tool_frame(tool);
  const double handle_area = 2.0 * M_PI * params.handle_radius * tool.handle_length;
  const int n_handle = std::max(1, static_cast<int>(std::lround(tool_density * handle_area)));
  const Vec3 axis = f.junction.normalized();
  const Vec3 e1 = Vec3(1, 0, 0), e2 = axis.cross(e1).normalized();
  const Vec3 e1p = e2.cross(axis).normalized();
  for (int i = 0; i < n_handle; ++i) {
    const double t = rng.uniform(0.0, tool.handle_length);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const Vec3 p_ee = t * axis + params.handle_radius *
                                     (std::cos(phi) * e1p + std::sin(phi) * e2);
    pts.push_back(apply(s.realized_ee, p_ee));
  }

  const double table_area = M_PI * params.table_patch_radius * params.table_patch_radius;
  const int n_table = std::max(1, static_cast<int>(std::lround(params.density * table_area)));
  for (int i = 0; i < n_table; ++i) {
    const double r = params.table_patch_radius * std::sqrt(rng.uniform(0.0, 1.0));
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    pts.push_back(Vec3(s.realized_ee.translation.x() + r * std::cos(phi),
                       s.realized_ee.translation.y() + r * std::sin(phi), 0.0));
  }

  for (const auto& ob : s.scene.obstacles) {
    const double p = 1.6075;
    const double ap = std::pow(ob.semi_axes.x(), p), bp = std::pow(ob.semi_axes.y(), p),
                 cp = std::pow(ob.semi_axes.z(), p);
    const double area = 4.0 * M_PI * std::pow((ap * bp + ap * cp + bp * cp) / 3.0, 1.0 / p);
    const int n_ob = std::max(1, static_cast<int>(std::lround(params.density * area)));
    for (int i = 0; i < n_ob; ++i) {
      Vec3 d(rng.gaussian(0, 1), rng.gaussian(0, 1), rng.gaussian(0, 1));
      if (d.norm() < 1e-9) d = Vec3(0, 0, 1);
      d.normalize();
      pts.push_back(ob.center + ob.semi_axes.cwiseProduct(d));
    }
  }

  const std::vector<int> vis =
      hpr_visible(pts, s.scene.camera.translation, params.hpr_radius_param);
  PointCloud out;
  out.reserve(vis.size());
  for (int i : vis) {
    Vec3 p = pts[i];
    if (params.noise_sigma > 0)
      p += Vec3(rng.gaussian(0, params.noise_sigma),
                rng.gaussian(0, params.noise_sigma),
                rng.gaussian(0, params.noise_sigma));
    out.push_back(p);
  }
  return out;
}

PointCloud render_pointcloud(const SimState& s, double density,
                             double noise_sigma) {
  RenderParams p;
  p.density = density;
  p.noise_sigma = noise_sigma;
  return render_pointcloud(s, p);
}

PointCloud render_scan(const SimState& s) {
  // Regular 1 mm grid over the deflected blade, edges included; noiseless.
  const ToolSpec& tool = s.tool;
  const BladeEval e = eval_blade(tool, s.realized_ee, s.blade_deflection);
  const double spacing = 1e-3;
  const int nu = std::max(2, static_cast<int>(std::lround(tool.blade_length / spacing)) + 1);
  const int nv = std::max(2, static_cast<int>(std::lround(tool.blade_width / spacing)) + 1);
  PointCloud out;
  out.reserve(static_cast<std::size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j)
      out.push_back(uv_to_world(e, tool, s.blade_deflection,
                                {tool.blade_length * i / (nu - 1.0),
                                 tool.blade_width * (j / (nv - 1.0) - 0.5)}));
  return out;
}

MaterialGrid sweep_material(const MaterialGrid& grid, const ContactLine& prev,
                            const ContactLine& cur) {
  // Endpoint pairing minimizing total travel avoids the bowtie quad.
  const double direct = (cur.a - prev.a).norm() + (cur.b - prev.b).norm();
  const double crossed = (cur.b - prev.a).norm() + (cur.a - prev.b).norm();
  const Vec3& c0 = direct <= crossed ? cur.a : cur.b;
  const Vec3& c1 = direct <= crossed ? cur.b : cur.a;

  const std::array<Eigen::Vector2d, 4> quad = {
      Eigen::Vector2d(prev.a.x(), prev.a.y()), Eigen::Vector2d(prev.b.x(), prev.b.y()),
      Eigen::Vector2d(c1.x(), c1.y()), Eigen::Vector2d(c0.x(), c0.y())};

  double area = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto& a = quad[i];
    const auto& b = quad[(i + 1) % 4];
    area += a.x() * b.y() - b.x() * a.y();
  }
  area = 0.5 * std::abs(area);
  if (area < grid.cell_size * grid.cell_size) return grid;  // degenerate

  MaterialGrid out = grid;
  const int nx = static_cast<int>(grid.mass.rows());
  const int ny = static_cast<int>(grid.mass.cols());
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const Eigen::Vector2d c = grid.cell_center(i, j);
      bool inside = false;  // even-odd rule
      for (int k = 0, m = 3; k < 4; m = k++) {
        const auto& a = quad[k];
        const auto& b = quad[m];
        if ((a.y() > c.y()) != (b.y() > c.y()) &&
            c.x() < (b.x() - a.x()) * (c.y() - a.y()) / (b.y() - a.y()) + a.x())
          inside = !inside;
      }
      if (inside) out.mass(i, j) = 0.0;
    }
  return out;
}

}  // namespace contactservo
