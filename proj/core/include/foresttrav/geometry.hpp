#pragma once

#include <vector>

#include "foresttrav/types.hpp"

namespace foresttrav {

// Oriented box in world coordinates.
struct Obb {
  Vec3 center = Vec3::Zero();
  Mat3 rot = Mat3::Identity();  // columns are the box axes
  Vec3 half = Vec3::Zero();
};

// Box spanning the local domain [lo, hi] placed at `pose`.
Obb make_obb(const Pose& pose, const Vec3& local_lo, const Vec3& local_hi);

bool point_in_obb(const Obb& box, const Vec3& p);

// Separating-axis test between the box and the cell [key*res, (key+1)*res].
// Both solids are shrunk by `shrink` per face first, so zero-volume face or
// edge contact does not count as intersection.
// Distance from a point to the box surface (0 inside).
double point_obb_distance(const Obb& box, const Vec3& p);

// Closed SAT between two oriented boxes (touching counts as intersecting).
bool obb_intersects_obb(const Obb& a, const Obb& b);

bool obb_intersects_cell(const Obb& box, const VoxelKey& key, double resolution,
                         double shrink = 1e-9);

// All cells sharing positive volume with the box, sorted by key.
std::vector<VoxelKey> rasterize_obb(const Obb& box, double resolution);

}  // namespace foresttrav
