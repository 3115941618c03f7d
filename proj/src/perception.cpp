#include "contactservo/perception.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "contactservo/hull.hpp"

namespace contactservo {

namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);  // smaller index wins: deterministic roots
    parent[b] = a;
  }
};

uint64_t cell_key(int64_t ix, int64_t iy, int64_t iz) {
  return mix64(static_cast<uint64_t>(ix) * 0x9e3779b97f4a7c15ull ^
               mix64(static_cast<uint64_t>(iy)) ^
               mix64(mix64(static_cast<uint64_t>(iz))));
}

}  // namespace

PointCloud clip_to_ee_frame(const PointCloud& points_world, const Pose& t_we,
                            const ClipBox& box) {
  const Pose t_ew = inverse(t_we);
  PointCloud out;
  out.reserve(points_world.size());
  for (const auto& p : points_world) {
    const Vec3 p_ee = apply(t_ew, p);
    if (box.contains(p_ee)) out.push_back(p_ee);
  }
  return out;
}

std::pair<Vec3, Vec3> farthest_pair(const PointCloud& points) {
  if (points.size() < 2)
    throw std::invalid_argument("farthest_pair: need at least 2 points");
  const int n = static_cast<int>(points.size());
  double best = -1.0;
  std::pair<Vec3, Vec3> best_pair{points[0], points[1]};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d2 = (points[i] - points[j]).squaredNorm();
      if (d2 < best) continue;
      Vec3 lo = points[i], hi = points[j];
      if (lex_less(hi, lo)) std::swap(lo, hi);
      if (d2 > best) {
        best = d2;
        best_pair = {lo, hi};
      } else {  // exact tie: smallest pair lexicographically
        if (lex_less(lo, best_pair.first) ||
            (!lex_less(best_pair.first, lo) && lex_less(hi, best_pair.second)))
          best_pair = {lo, hi};
      }
    }
  return best_pair;
}

std::vector<int> single_linkage_clusters(const PointCloud& points,
                                         double radius) {
  const int n = static_cast<int>(points.size());
  std::vector<int> labels(n, -1);
  if (n == 0) return labels;
  const double cell = std::max(radius, 1e-6);
  const double r2 = radius * radius;

  std::unordered_map<uint64_t, std::vector<int>> grid;
  grid.reserve(static_cast<std::size_t>(n) * 2);
  std::vector<std::array<int64_t, 3>> cells(n);
  for (int i = 0; i < n; ++i) {
    cells[i] = {static_cast<int64_t>(std::floor(points[i].x() / cell)),
                static_cast<int64_t>(std::floor(points[i].y() / cell)),
                static_cast<int64_t>(std::floor(points[i].z() / cell))};
    grid[cell_key(cells[i][0], cells[i][1], cells[i][2])].push_back(i);
  }

  UnionFind uf(n);
  for (int i = 0; i < n; ++i)
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(
              cell_key(cells[i][0] + dx, cells[i][1] + dy, cells[i][2] + dz));
          if (it == grid.end()) continue;
          for (int j : it->second)
            if (j > i && (points[i] - points[j]).squaredNorm() <= r2)
              uf.unite(i, j);
        }

  std::unordered_map<int, int> root_to_label;
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    auto [it, inserted] = root_to_label.try_emplace(r, next);
    if (inserted) ++next;
    labels[i] = it->second;
  }
  return labels;
}

LabeledContact label_contact_line(const PointCloud& scan_world,
                                  const Pose& t_we, const LabelParams& params,
                                  const ClipBox& box) {
  const Pose t_ew = inverse(t_we);
  PointCloud band;
  band.reserve(256);
  for (const auto& p : scan_world) {
    if (p.z() <= 0.0 || p.z() >= params.band_height) continue;
    if (!box.contains(apply(t_ew, p))) continue;
    band.push_back(p);
  }
  LabeledContact out;
  if (band.size() < 2) return out;

  const std::vector<int> labels =
      single_linkage_clusters(band, params.cluster_radius);
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> count(k, 0);
  for (int l : labels) ++count[l];
  const int largest = static_cast<int>(
      std::max_element(count.begin(), count.end()) - count.begin());

  PointCloud cluster;
  cluster.reserve(count[largest]);
  for (std::size_t i = 0; i < band.size(); ++i)
    if (labels[i] == largest) cluster.push_back(band[i]);
  if (cluster.size() < 2) return out;

  const auto [a, b] = farthest_pair(cluster);
  if ((b - a).norm() <= params.min_line_length) return out;
  out.c_b = 1;
  out.c_l_world = ContactLine{a, b};
  out.source = LabelSource::kLineFound;
  return out;
}

LabeledContact label_binary(const LabeledContact& labeled,
                            const WrenchHistory& wrench_history,
                            double force_threshold) {
  LabeledContact out = labeled;
  if (out.source == LabelSource::kLineFound) {
    out.c_b = 1;
    return out;
  }
  const double mean_fz = wrench_history.col(2).cwiseAbs().mean();
  if (mean_fz > force_threshold) {
    out.c_b = 1;
    out.source = LabelSource::kForceOnly;
    out.c_l_world.reset();
  } else {
    out.c_b = 0;
    out.source = LabelSource::kNone;
    out.c_l_world.reset();
  }
  return out;
}

std::vector<int> hpr_visible(const PointCloud& points, const Vec3& viewpoint,
                             double radius_param) {
  const int n = static_cast<int>(points.size());
  if (n < 1) throw std::invalid_argument("hpr_visible: empty point set");

  double max_norm = 0.0;
  for (const auto& p : points) {
    const double d = (p - viewpoint).norm();
    if (d < 1e-12)
      throw std::invalid_argument("hpr_visible: viewpoint coincides with a point");
    max_norm = std::max(max_norm, d);
  }
  if (n <= 3) {
    bool coincident = true;
    for (const auto& p : points) coincident &= (p - points[0]).norm() < 1e-15;
    if (n > 1 && coincident)
      throw DegenerateHullError("hpr_visible: coincident points");
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    return all;
  }

  const double R = radius_param * max_norm;
  std::vector<Vec3> flipped;
  flipped.reserve(n + 1);
  for (const auto& p : points) {
    const Vec3 q = p - viewpoint;
    const double d = q.norm();
    flipped.push_back(q * (2.0 * R / d - 1.0));
  }
  flipped.push_back(Vec3::Zero());  // the viewpoint itself

  // Exact duplicates collapse to one representative; visibility is shared.
  std::vector<int> rep(n + 1);
  {
    std::unordered_map<uint64_t, std::vector<int>> seen;
    for (int i = 0; i <= n; ++i) {
      const uint64_t h = mix64(mix64(std::bit_cast<uint64_t>(flipped[i].x())) ^
                               mix64(std::bit_cast<uint64_t>(flipped[i].y())) ^
                               std::bit_cast<uint64_t>(flipped[i].z()));
      rep[i] = i;
      auto& bucket = seen[h];
      for (int j : bucket)
        if (flipped[j] == flipped[i]) {
          rep[i] = j;
          break;
        }
      if (rep[i] == i) bucket.push_back(i);
    }
  }
  std::vector<Vec3> unique_pts;
  std::vector<int> unique_of(n + 1, -1);
  for (int i = 0; i <= n; ++i)
    if (rep[i] == i) {
      unique_of[i] = static_cast<int>(unique_pts.size());
      unique_pts.push_back(flipped[i]);
    }

  const std::vector<int> verts = convex_hull_vertices(unique_pts);
  std::vector<char> vertex_flag(unique_pts.size(), 0);
  for (int v : verts) vertex_flag[v] = 1;

  std::vector<int> visible;
  for (int i = 0; i < n; ++i)
    if (vertex_flag[unique_of[rep[i]]]) visible.push_back(i);
  return visible;
}

PointCloud augment_occlusion(const PointCloud& points_world,
                             const Pose& camera, const Vec3& contact_center,
                             RngStream& rng, const AugmentConfig& cfg) {
  const int count =
      cfg.min_ellipsoids >= cfg.max_ellipsoids
          ? cfg.min_ellipsoids
          : cfg.min_ellipsoids +
                static_cast<int>(rng.integer(
                    static_cast<uint64_t>(cfg.max_ellipsoids - cfg.min_ellipsoids + 1)));
  if (count <= 0) return points_world;

  PointCloud all = points_world;
  for (int e = 0; e < count; ++e) {
    Vec3 semi;
    for (int k = 0; k < 3; ++k)
      semi[k] = rng.uniform(cfg.semi_axis_min, cfg.semi_axis_max);
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double rad = cfg.center_radius * std::sqrt(rng.uniform(0.0, 1.0));
    const Vec3 center(contact_center.x() + rad * std::cos(ang),
                      contact_center.y() + rad * std::sin(ang),
                      semi.z());  // resting on the table

    // Thomsen approximation of the ellipsoid area for the sample budget.
    const double p = 1.6075;
    const double ap = std::pow(semi.x(), p), bp = std::pow(semi.y(), p),
                 cp = std::pow(semi.z(), p);
    const double area =
        4.0 * M_PI * std::pow((ap * bp + ap * cp + bp * cp) / 3.0, 1.0 / p);
    const int n_samples = std::max(1, static_cast<int>(std::lround(area * cfg.surface_density)));
    for (int s = 0; s < n_samples; ++s) {
      Vec3 d(rng.gaussian(0, 1), rng.gaussian(0, 1), rng.gaussian(0, 1));
      if (d.norm() < 1e-9) d = Vec3(0, 0, 1);
      d.normalize();
      all.push_back(center + semi.cwiseProduct(d));
    }
  }

  const std::vector<int> vis =
      hpr_visible(all, camera.translation, cfg.hpr_radius_param);
  PointCloud out;
  out.reserve(vis.size());
  for (int i : vis) out.push_back(all[i]);
  return out;
}

}  // namespace contactservo
