#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "contactservo/contact.hpp"
#include "contactservo/rng.hpp"
#include "contactservo/se3.hpp"

namespace contactservo {

/// Axis-aligned crop region in the end effector frame. The default covers a
/// 0.5 m cube centered 10 cm below the EE origin so the contact event is
/// always inside it.
struct ClipBox {
  Vec3 side_lengths{0.5, 0.5, 0.5};
  Vec3 offset{0.0, 0.0, -0.1};

  /// Closed-box test on EE-frame coordinates (boundary points included).
  bool contains(const Vec3& p_ee) const {
    const Vec3 d = (p_ee - offset).cwiseAbs() - 0.5 * side_lengths;
    return d.maxCoeff() <= 0.0;
  }
};

enum class LabelSource { kLineFound, kForceOnly, kNone };

struct LabeledContact {
  int c_b = 0;
  std::optional<ContactLine> c_l_world;
  LabelSource source = LabelSource::kNone;
};

struct LabelParams {
  double band_height = 0.8e-3;     // keep points with 0 < z < band_height
  double cluster_radius = 10e-3;   // single-linkage merge radius
  double min_line_length = 5e-3;   // below this no line is reported
};

/// Transforms world points into the EE frame and keeps those inside the box.
/// Order-preserving; may return an empty set.
PointCloud clip_to_ee_frame(const PointCloud& points_world, const Pose& t_we,
                            const ClipBox& box);

/// Pair of points at maximal Euclidean distance. Ties are broken by
/// lexicographic comparison of the (ordered) pair; the result is returned in
/// lexicographic order. Throws std::invalid_argument for fewer than 2 points.
std::pair<Vec3, Vec3> farthest_pair(const PointCloud& points);

/// Exact single-linkage clustering at `radius` (grid-accelerated; exact for
/// radius <= grid cell size). Returns per-point cluster ids, 0-based.
std::vector<int> single_linkage_clusters(const PointCloud& points,
                                         double radius);

/// Scan-based contact line labeling: band filter above the table, clip
/// around the EE, largest cluster, farthest pair.
LabeledContact label_contact_line(const PointCloud& scan_world,
                                  const Pose& t_we,
                                  const LabelParams& params = {},
                                  const ClipBox& box = {});

/// Merges force/torque evidence into the binary label: contact if a line was
/// found or the mean |F_z| over the history exceeds the threshold.
LabeledContact label_binary(const LabeledContact& labeled,
                            const WrenchHistory& wrench_history,
                            double force_threshold = 0.5);

/// Katz spherical-flip visibility. Returns sorted indices of points visible
/// from the viewpoint. Throws std::invalid_argument if the viewpoint
/// coincides with a point, DegenerateHullError for a coincident cloud.
std::vector<int> hpr_visible(const PointCloud& points, const Vec3& viewpoint,
                             double radius_param = 1000.0);

struct AugmentConfig {
  int min_ellipsoids = 1;
  int max_ellipsoids = 3;
  double semi_axis_min = 0.01;
  double semi_axis_max = 0.04;
  double center_radius = 0.15;       // around the tool contact region (xy)
  double surface_density = 60000.0;  // samples per m^2 of ellipsoid surface
  double hpr_radius_param = 1000.0;
};

/// Occlusion augmentation: drops ellipsoids near the contact region onto the
/// table, samples their surfaces, and removes points hidden from the camera.
PointCloud augment_occlusion(const PointCloud& points_world,
                             const Pose& camera, const Vec3& contact_center,
                             RngStream& rng, const AugmentConfig& cfg = {});

}  // namespace contactservo
