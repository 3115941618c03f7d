#pragma once

#include <stdexcept>
#include <vector>

#include "contactservo/se3.hpp"

namespace contactservo {

struct DegenerateHullError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Indices of the points that are vertices of the 3D convex hull.
/// Deterministic: insertion follows lexicographic point order; quadruples
/// whose orientation determinant falls below the scaled error bound are
/// treated as coplanar and resolved toward "not visible".
/// Throws DegenerateHullError if the points do not span 3D space.
std::vector<int> convex_hull_vertices(const std::vector<Vec3>& pts);

}  // namespace contactservo
