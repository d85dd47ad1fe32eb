#include "foresttrav/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace foresttrav {

Obb make_obb(const Pose& pose, const Vec3& local_lo, const Vec3& local_hi) {
  Obb box;
  box.rot = pose.orientation.toRotationMatrix();
  box.half = 0.5 * (local_hi - local_lo);
  box.center = pose.position + box.rot * (0.5 * (local_lo + local_hi));
  return box;
}

bool point_in_obb(const Obb& box, const Vec3& p) {
  const Vec3 local = box.rot.transpose() * (p - box.center);
  return std::abs(local.x()) <= box.half.x() &&
         std::abs(local.y()) <= box.half.y() &&
         std::abs(local.z()) <= box.half.z();
}

double point_obb_distance(const Obb& box, const Vec3& p) {
  const Vec3 local = box.rot.transpose() * (p - box.center);
  const Vec3 clamped = local.cwiseMax(-box.half).cwiseMin(box.half);
  return (local - clamped).norm();
}

bool obb_intersects_obb(const Obb& a, const Obb& b) {
  const Vec3 d = a.center - b.center;
  auto separated = [&](const Vec3& axis) {
    const double len2 = axis.squaredNorm();
    if (len2 < 1e-24) return false;
    const double dist = std::abs(d.dot(axis));
    double ra = 0.0, rb = 0.0;
    for (int i = 0; i < 3; ++i) {
      ra += std::abs((a.rot.col(i) * a.half[i]).dot(axis));
      rb += std::abs((b.rot.col(i) * b.half[i]).dot(axis));
    }
    return dist > ra + rb;
  };
  for (int i = 0; i < 3; ++i) {
    if (separated(a.rot.col(i))) return false;
    if (separated(b.rot.col(i))) return false;
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (separated(a.rot.col(i).cross(b.rot.col(j)))) return false;
    }
  }
  return true;
}

bool obb_intersects_cell(const Obb& box, const VoxelKey& key, double resolution,
                         double shrink) {
  const Vec3 a_half =
      (box.half - Vec3::Constant(shrink)).cwiseMax(Vec3::Zero());
  const Vec3 b_half = Vec3::Constant(std::max(0.5 * resolution - shrink, 0.0));
  const Vec3 b_center = key_to_center(key, resolution);

  // SAT for a rotated box A against an axis-aligned box B: world axes, box
  // axes, and their cross products.
  const Mat3& r = box.rot;
  const Vec3 d = box.center - b_center;

  auto separated = [&](const Vec3& axis) {
    const double len2 = axis.squaredNorm();
    if (len2 < 1e-24) return false;  // degenerate cross product
    const double dist = std::abs(d.dot(axis));
    const double ra = std::abs((r.col(0) * a_half.x()).dot(axis)) +
                      std::abs((r.col(1) * a_half.y()).dot(axis)) +
                      std::abs((r.col(2) * a_half.z()).dot(axis));
    const double rb = b_half.x() * std::abs(axis.x()) +
                      b_half.y() * std::abs(axis.y()) +
                      b_half.z() * std::abs(axis.z());
    return dist > ra + rb;
  };

  for (int i = 0; i < 3; ++i) {
    if (separated(Vec3::Unit(i))) return false;
    if (separated(r.col(i))) return false;
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (separated(Vec3::Unit(i).cross(r.col(j)))) return false;
    }
  }
  return true;
}

std::vector<VoxelKey> rasterize_obb(const Obb& box, double resolution) {
  Vec3 lo = box.center, hi = box.center;
  for (int sx = -1; sx <= 1; sx += 2) {
    for (int sy = -1; sy <= 1; sy += 2) {
      for (int sz = -1; sz <= 1; sz += 2) {
        const Vec3 corner = box.center + box.rot * Vec3(sx * box.half.x(),
                                                        sy * box.half.y(),
                                                        sz * box.half.z());
        lo = lo.cwiseMin(corner);
        hi = hi.cwiseMax(corner);
      }
    }
  }
  const VoxelKey k_lo = point_to_key(lo, resolution);
  const VoxelKey k_hi = point_to_key(hi, resolution);

  std::vector<VoxelKey> cells;
  for (int32_t x = k_lo.x; x <= k_hi.x; ++x) {
    for (int32_t y = k_lo.y; y <= k_hi.y; ++y) {
      for (int32_t z = k_lo.z; z <= k_hi.z; ++z) {
        const VoxelKey key{x, y, z};
        if (obb_intersects_cell(box, key, resolution)) cells.push_back(key);
      }
    }
  }
  return cells;
}

}  // namespace foresttrav
