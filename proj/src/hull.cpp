#include "contactservo/hull.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace contactservo {

namespace {

struct Face {
  int v[3];
  int neigh[3];  // neigh[k] shares the directed edge (v[k], v[(k+1)%3])
  Vec3 normal;   // unit outward
  double offset;  // plane: normal . x = offset
  std::vector<int> conflicts;
  bool alive = true;
};

double signed_dist(const Face& f, const Vec3& p) {
  return f.normal.dot(p) - f.offset;
}

class IncrementalHull {
 public:
  explicit IncrementalHull(const std::vector<Vec3>& pts) : pts_(pts) {
    double scale = 0.0;
    for (const auto& p : pts_) scale = std::max(scale, p.cwiseAbs().maxCoeff());
    eps_ = std::max(1e-12, 1e-10 * scale);
  }

  std::vector<int> run() {
    const int n = static_cast<int>(pts_.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const Vec3 &pa = pts_[a], &pb = pts_[b];
      if (pa.x() != pb.x()) return pa.x() < pb.x();
      if (pa.y() != pb.y()) return pa.y() < pb.y();
      return pa.z() < pb.z();
    });

    init_tetrahedron(order);
    for (int idx : order) {
      if (used_[idx]) continue;
      insert_point(idx);
    }

    std::vector<char> on_hull(n, 0);
    for (const auto& f : faces_)
      if (f.alive)
        for (int k = 0; k < 3; ++k) on_hull[f.v[k]] = 1;
    std::vector<int> out;
    for (int i = 0; i < n; ++i)
      if (on_hull[i]) out.push_back(i);
    return out;
  }

 private:
  void set_plane(Face& f) {
    Vec3 n = (pts_[f.v[1]] - pts_[f.v[0]]).cross(pts_[f.v[2]] - pts_[f.v[0]]);
    const double len = n.norm();
    if (len > 1e-300) n /= len;
    f.normal = n;
    f.offset = n.dot(pts_[f.v[0]]);
  }

  void init_tetrahedron(const std::vector<int>& order) {
    const int n = static_cast<int>(order.size());
    used_.assign(pts_.size(), false);
    conflict_face_.assign(pts_.size(), -1);
    if (n < 4) throw DegenerateHullError("hull: fewer than 4 points");

    const int a = order.front();
    int b = -1;
    double best = eps_;
    for (int idx : order) {
      const double d = (pts_[idx] - pts_[a]).norm();
      if (d > best) { best = d; b = idx; }
    }
    if (b < 0) throw DegenerateHullError("hull: all points coincident");

    int c = -1;
    best = eps_ * (pts_[b] - pts_[a]).norm();
    for (int idx : order) {
      const double d = (pts_[b] - pts_[a]).cross(pts_[idx] - pts_[a]).norm();
      if (d > best) { best = d; c = idx; }
    }
    if (c < 0) throw DegenerateHullError("hull: all points collinear");

    int d4 = -1;
    const Vec3 nrm = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]).normalized();
    best = eps_;
    for (int idx : order) {
      const double d = std::abs(nrm.dot(pts_[idx] - pts_[a]));
      if (d > best) { best = d; d4 = idx; }
    }
    if (d4 < 0) throw DegenerateHullError("hull: all points coplanar");

    const Vec3 interior = 0.25 * (pts_[a] + pts_[b] + pts_[c] + pts_[d4]);
    const std::array<std::array<int, 3>, 4> tris = {
        {{a, b, c}, {a, c, d4}, {a, d4, b}, {b, d4, c}}};
    for (const auto& t : tris) {
      Face f;
      f.v[0] = t[0]; f.v[1] = t[1]; f.v[2] = t[2];
      f.neigh[0] = f.neigh[1] = f.neigh[2] = -1;
      set_plane(f);
      if (signed_dist(f, interior) > 0) {
        std::swap(f.v[1], f.v[2]);
        set_plane(f);
      }
      faces_.push_back(std::move(f));
    }
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 3; ++k) {
        const int u = faces_[i].v[k], v = faces_[i].v[(k + 1) % 3];
        for (int j = 0; j < 4; ++j) {
          if (j == i) continue;
          for (int m = 0; m < 3; ++m)
            if (faces_[j].v[m] == v && faces_[j].v[(m + 1) % 3] == u)
              faces_[i].neigh[k] = j;
        }
      }
    used_[a] = used_[b] = used_[c] = used_[d4] = true;

    for (std::size_t i = 0; i < pts_.size(); ++i) {
      if (used_[i]) continue;
      for (int f = 0; f < 4; ++f)
        if (signed_dist(faces_[f], pts_[i]) > eps_) {
          faces_[f].conflicts.push_back(static_cast<int>(i));
          conflict_face_[i] = f;
          break;
        }
    }
  }

  void insert_point(int idx) {
    const int start = conflict_face_[idx];
    used_[idx] = true;
    if (start < 0) return;  // interior point
    const Vec3& p = pts_[idx];

    // BFS over the faces visible from p. Epoch stamps avoid per-insertion
    // clearing of the whole face table.
    ++epoch_;
    seen_.resize(faces_.size() + 8, 0);
    vis_flag_.resize(faces_.size() + 8, 0);
    std::vector<int> visible;
    std::vector<int> stack{start};
    seen_[start] = epoch_;
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      if (!faces_[f].alive || signed_dist(faces_[f], p) <= eps_) continue;
      visible.push_back(f);
      vis_flag_[f] = epoch_;
      for (int k = 0; k < 3; ++k) {
        const int g = faces_[f].neigh[k];
        if (g >= 0 && seen_[g] != epoch_) { seen_[g] = epoch_; stack.push_back(g); }
      }
    }
    if (visible.empty()) return;

    // Horizon edges keep the winding they had on the visible side, so the
    // cone faces (u, v, p) are outward without any flip.
    struct HEdge { int u, v, outside; };
    std::vector<HEdge> horizon;
    for (int f : visible)
      for (int k = 0; k < 3; ++k) {
        const int g = faces_[f].neigh[k];
        if (g >= 0 && vis_flag_[g] != epoch_)
          horizon.push_back({faces_[f].v[k], faces_[f].v[(k + 1) % 3], g});
      }

    std::vector<int> orphans;
    for (int f : visible) {
      faces_[f].alive = false;
      for (int q : faces_[f].conflicts)
        if (!used_[q]) {
          orphans.push_back(q);
          conflict_face_[q] = -1;
        }
      faces_[f].conflicts.clear();
    }

    std::vector<int> fresh;
    fresh.reserve(horizon.size());
    for (const auto& e : horizon) {
      Face f;
      f.v[0] = e.u; f.v[1] = e.v; f.v[2] = idx;
      f.neigh[0] = e.outside;
      f.neigh[1] = f.neigh[2] = -1;
      set_plane(f);
      faces_.push_back(std::move(f));
      const int nf = static_cast<int>(faces_.size()) - 1;
      Face& out = faces_[e.outside];
      for (int m = 0; m < 3; ++m)
        if (out.v[m] == e.v && out.v[(m + 1) % 3] == e.u) out.neigh[m] = nf;
      fresh.push_back(nf);
    }
    // Stitch cone side edges: (v_i, p) pairs with (p, u_j) where u_j == v_i.
    for (std::size_t i = 0; i < fresh.size(); ++i)
      for (std::size_t j = 0; j < fresh.size(); ++j) {
        if (i == j) continue;
        Face& fi = faces_[fresh[i]];
        const Face& fj = faces_[fresh[j]];
        if (fi.v[1] == fj.v[0]) fi.neigh[1] = fresh[j];
        if (fi.v[0] == fj.v[1]) fi.neigh[2] = fresh[j];
      }

    for (int q : orphans)
      for (int nf : fresh)
        if (signed_dist(faces_[nf], pts_[q]) > eps_) {
          faces_[nf].conflicts.push_back(q);
          conflict_face_[q] = nf;
          break;
        }
  }

  const std::vector<Vec3>& pts_;
  std::vector<Face> faces_;
  std::vector<bool> used_;
  std::vector<int> conflict_face_;
  std::vector<int> seen_;
  std::vector<int> vis_flag_;
  int epoch_ = 0;
  double eps_ = 1e-12;
};

}  // namespace

std::vector<int> convex_hull_vertices(const std::vector<Vec3>& pts) {
  IncrementalHull hull(pts);
  return hull.run();
}

}  // namespace contactservo
