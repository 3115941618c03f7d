#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "contactservo/hull.hpp"
#include "contactservo/perception.hpp"

using namespace contactservo;

namespace {

// Ray-casting visibility oracle: a point is occluded if any other point's
// disk of radius `blocker_radius` (facing the viewpoint) intersects the
// view ray strictly in front of it.
std::vector<int> raycast_visible(const PointCloud& pts, const Vec3& vp,
                                 double blocker_radius) {
  std::vector<int> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 ray = pts[i] - vp;
    const double ti = ray.norm();
    const Vec3 dir = ray / ti;
    bool occluded = false;
    for (std::size_t j = 0; j < pts.size() && !occluded; ++j) {
      if (j == i) continue;
      const Vec3 q = pts[j] - vp;
      const double t = q.dot(dir);
      if (t <= 1e-9 || t >= ti - 1e-9) continue;
      const double off = (q - t * dir).norm();
      occluded = off < blocker_radius;
    }
    if (!occluded) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::pair<Vec3, Vec3> brute_force_farthest(const PointCloud& pts) {
  double best = -1.0;
  std::pair<Vec3, Vec3> bp{pts[0], pts[1]};
  auto lex = [](const Vec3& a, const Vec3& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
  };
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = (pts[i] - pts[j]).squaredNorm();
      Vec3 lo = pts[i], hi = pts[j];
      if (lex(hi, lo)) std::swap(lo, hi);
      if (d > best || (d == best && (lex(lo, bp.first) ||
                                     (!lex(bp.first, lo) && lex(hi, bp.second))))) {
        best = d;
        bp = {lo, hi};
      }
    }
  return bp;
}

}  // namespace

TEST_CASE("clip_to_ee_frame basics and tie-break") {
  PointCloud pts{{0.1, 0.0, -0.1}, {0.0, 0.0, -0.3}, {1.0, 0.0, 0.0}};
  ClipBox box;
  const PointCloud out = clip_to_ee_frame(pts, Pose::identity(), box);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == pts[0]);  // order preserved
  CHECK(out[1] == pts[1]);

  // Point exactly on a box face is included (closed box).
  PointCloud face{{0.25, 0.0, -0.1}};
  CHECK(clip_to_ee_frame(face, Pose::identity(), box).size() == 1);
}

TEST_CASE("clip_to_ee_frame is invariant under common rigid motions") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  PointCloud pts;
  for (int i = 0; i < 200; ++i) pts.push_back(Vec3(u(rng), u(rng), u(rng)));
  Pose t_we = exp_delta({Vec3(0.02, -0.01, 0.05), Vec3(0.1, 0.2, -0.3)});
  const PointCloud base = clip_to_ee_frame(pts, t_we, ClipBox{});

  for (int trial = 0; trial < 20; ++trial) {
    const Pose g = exp_delta({Vec3(u(rng), u(rng), u(rng)),
                              Vec3(u(rng), u(rng), u(rng))});
    PointCloud moved;
    for (const auto& p : pts) moved.push_back(apply(g, p));
    const PointCloud out = clip_to_ee_frame(moved, compose(g, t_we), ClipBox{});
    REQUIRE(out.size() == base.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK((out[i] - base[i]).norm() < 1e-12);
  }
}

TEST_CASE("farthest_pair on collinear points") {
  PointCloud pts{{0, 0, 0.001}, {0.01, 0, 0.001}, {0.02, 0, 0.001}};
  const auto [a, b] = farthest_pair(pts);
  CHECK(a == Vec3(0, 0, 0.001));
  CHECK(b == Vec3(0.02, 0, 0.001));
}

TEST_CASE("farthest_pair square tie-break picks lexicographic diagonal") {
  PointCloud pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const auto [a, b] = farthest_pair(pts);
  CHECK(a == Vec3(0, 0, 0));
  CHECK(b == Vec3(1, 1, 0));
}

TEST_CASE("farthest_pair matches brute force oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud pts;
  for (int i = 0; i < 500; ++i) pts.push_back(Vec3(u(rng), u(rng), u(rng)));
  const auto got = farthest_pair(pts);
  const auto want = brute_force_farthest(pts);
  CHECK(got.first == want.first);
  CHECK(got.second == want.second);
}

TEST_CASE("farthest_pair rejects tiny inputs") {
  CHECK_THROWS_AS(farthest_pair(PointCloud{{0, 0, 0}}), std::invalid_argument);
}

TEST_CASE("single linkage matches direct union on constructed input") {
  // Two tight blobs 5 cm apart plus one far outlier.
  PointCloud pts;
  for (int i = 0; i < 10; ++i) pts.push_back(Vec3(0.001 * i, 0, 0));
  for (int i = 0; i < 7; ++i) pts.push_back(Vec3(0.05 + 0.001 * i, 0, 0));
  pts.push_back(Vec3(0.5, 0.5, 0));
  const auto labels = single_linkage_clusters(pts, 0.01);
  for (int i = 1; i < 10; ++i) CHECK(labels[i] == labels[0]);
  for (int i = 11; i < 17; ++i) CHECK(labels[i] == labels[10]);
  CHECK(labels[0] != labels[10]);
  CHECK(labels[17] != labels[0]);
  CHECK(labels[17] != labels[10]);
}

TEST_CASE("label_contact_line on constructed band") {
  // A strip of points along y near z=0 and a one-point noise blob 10 cm away.
  PointCloud scan;
  for (int i = 0; i <= 80; ++i)
    scan.push_back(Vec3(0.0, -0.04 + 0.001 * i, 0.0005));
  scan.push_back(Vec3(0.1, 0.1, 0.0005));  // noise
  scan.push_back(Vec3(0.0, 0.0, 0.05));    // above the band
  scan.push_back(Vec3(0.0, 0.0, 0.0));     // exactly on the table: excluded

  Pose t_we = Pose::identity();
  t_we.translation = Vec3(0.0, 0.0, 0.2);
  const LabeledContact lab = label_contact_line(scan, t_we);
  REQUIRE(lab.c_b == 1);
  REQUIRE(lab.source == LabelSource::kLineFound);
  const ContactLine l = *lab.c_l_world;
  CHECK((l.a - Vec3(0, -0.04, 0.0005)).norm() < 1e-12);
  CHECK((l.b - Vec3(0, 0.04, 0.0005)).norm() < 1e-12);

  // Empty band -> no contact.
  const LabeledContact none =
      label_contact_line(PointCloud{{0, 0, 0.05}}, t_we);
  CHECK(none.c_b == 0);
  CHECK(none.source == LabelSource::kNone);
}

TEST_CASE("label_binary forcefallback") {
  WrenchHistory quiet = WrenchHistory::Zero(4, 6);
  WrenchHistory pressing = WrenchHistory::Zero(4, 6);
  pressing.col(2).setConstant(-2.0);

  LabeledContact with_line;
  with_line.c_b = 1;
  with_line.source = LabelSource::kLineFound;
  with_line.c_l_world = ContactLine{Vec3(0, 0, 0), Vec3(0.05, 0, 0)};
  CHECK(label_binary(with_line, quiet).c_b == 1);

  LabeledContact no_line;
  const LabeledContact forced = label_binary(no_line, pressing);
  CHECK(forced.c_b == 1);
  CHECK(forced.source == LabelSource::kForceOnly);
  CHECK(!forced.c_l_world.has_value());

  WrenchHistory noise = WrenchHistory::Zero(4, 6);
  noise.col(2).setConstant(0.03);
  CHECK(label_binary(no_line, noise).c_b == 0);
}

TEST_CASE("hpr single point is visible") {
  const auto vis = hpr_visible(PointCloud{{0.3, 0, 0}}, Vec3(0, 0, 0));
  REQUIRE(vis.size() == 1);
  CHECK(vis[0] == 0);
}

TEST_CASE("hpr rejects viewpoint on a point and coincident clouds") {
  CHECK_THROWS_AS(hpr_visible(PointCloud{{0, 0, 0}}, Vec3(0, 0, 0)),
                  std::invalid_argument);
  PointCloud same{{0.1, 0, 0}, {0.1, 0, 0}, {0.1, 0, 0}};
  CHECK_THROWS_AS(hpr_visible(same, Vec3(0, 0, 1)), DegenerateHullError);
}

TEST_CASE("hpr occludes a point behind a dense flat patch") {
  PointCloud pts;
  const double d = 0.5;
  // Occluder: dense 20 cm square patch at x = d, centered on the +x axis.
  for (int i = -20; i <= 20; ++i)
    for (int j = -20; j <= 20; ++j)
      pts.push_back(Vec3(d, 0.005 * i, 0.005 * j));
  const int target = static_cast<int>(pts.size());
  pts.push_back(Vec3(2.0 * d, 0.0013, 0.0007));  // directly behind the patch
  const int side = static_cast<int>(pts.size());
  pts.push_back(Vec3(2.0 * d, 0.9, 0.0));  // behind but well off-axis

  const auto vis = hpr_visible(pts, Vec3::Zero());
  CHECK(std::find(vis.begin(), vis.end(), target) == vis.end());
  CHECK(std::find(vis.begin(), vis.end(), side) != vis.end());
}

TEST_CASE("hpr agrees with ray casting on a sphere scene") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  PointCloud pts;
  const Vec3 center(0, 0, 0);
  const double radius = 0.5;
  for (int i = 0; i < 5000; ++i) {
    Vec3 dir(g(rng), g(rng), g(rng));
    dir.normalize();
    pts.push_back(center + radius * dir);
  }
  const Vec3 vp(0, 0, 3.0);

  const auto vis = hpr_visible(pts, vp);
  std::vector<char> hpr_flag(pts.size(), 0);
  for (int i : vis) hpr_flag[i] = 1;

  // Oracle: front hemisphere towards the viewpoint is visible. Points very
  // close to the silhouette are excluded from the comparison.
  int agree = 0, considered = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double cosang = (pts[i] - center).normalized().dot((vp - center).normalized());
    const double silhouette = radius / (vp - center).norm();
    if (std::abs(cosang - silhouette) < 0.08) continue;
    const bool front = cosang > silhouette;
    ++considered;
    if (front == static_cast<bool>(hpr_flag[i])) ++agree;
  }
  REQUIRE(considered > 1000);
  CHECK(static_cast<double>(agree) / considered >= 0.95);
}

TEST_CASE("augment_occlusion basics") {
  PointCloud pts;
  for (int i = 0; i < 500; ++i)
    pts.push_back(Vec3(-0.25 + 0.001 * i, 0.0, 0.001));
  Pose camera;
  camera.translation = Vec3(0.0, 0.0, 1.0);

  AugmentConfig zero;
  zero.min_ellipsoids = zero.max_ellipsoids = 0;
  RngStream r0 = RngStream::of(1, 2, 3);
  const PointCloud same = augment_occlusion(pts, camera, Vec3::Zero(), r0, zero);
  REQUIRE(same.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(same[i] == pts[i]);

  // Deterministic per seed.
  AugmentConfig cfg;
  RngStream ra = RngStream::of(7, 7);
  RngStream rb = RngStream::of(7, 7);
  const PointCloud a = augment_occlusion(pts, camera, Vec3::Zero(), ra, cfg);
  const PointCloud b = augment_occlusion(pts, camera, Vec3::Zero(), rb, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  RngStream rc = RngStream::of(8, 8);
  const PointCloud c = augment_occlusion(pts, camera, Vec3::Zero(), rc, cfg);
  const bool differs = c.size() != a.size();
  CHECK(differs);
}

TEST_CASE("augment_occlusion ellipsoid on the camera ray removes points") {
  // Points on the table below the camera; an ellipsoid forced onto the ray
  // between camera and the cloud center must hide some of them.
  PointCloud pts;
  for (int i = -15; i <= 15; ++i)
    for (int j = -15; j <= 15; ++j)
      pts.push_back(Vec3(0.004 * i, 0.004 * j, 0.0));
  Pose camera;
  camera.translation = Vec3(0.0, 0.0, 0.6);

  AugmentConfig cfg;
  cfg.min_ellipsoids = cfg.max_ellipsoids = 1;
  cfg.center_radius = 0.0;  // exactly at the contact center
  cfg.semi_axis_min = cfg.semi_axis_max = 0.03;
  RngStream rng = RngStream::of(42);
  const PointCloud out = augment_occlusion(pts, camera, Vec3::Zero(), rng, cfg);

  int kept_original = 0;
  for (const auto& p : out)
    if (p.z() == 0.0) ++kept_original;
  CHECK(kept_original < static_cast<int>(pts.size()));
  CHECK(out.size() > pts.size() / 2);  // ellipsoid samples joined the cloud
}
