#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <functional>

namespace foresttrav {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Integer voxel index. A point p belongs to the half-open cell
// [k*res, (k+1)*res) per axis, i.e. k = floor(p / res).
struct VoxelKey {
  int32_t x = 0;
  int32_t y = 0;
  int32_t z = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

inline VoxelKey point_to_key(const Vec3& p, double resolution) {
  return VoxelKey{static_cast<int32_t>(std::floor(p.x() / resolution)),
                  static_cast<int32_t>(std::floor(p.y() / resolution)),
                  static_cast<int32_t>(std::floor(p.z() / resolution))};
}

inline Vec3 key_to_center(const VoxelKey& k, double resolution) {
  return Vec3((k.x + 0.5) * resolution, (k.y + 0.5) * resolution,
              (k.z + 0.5) * resolution);
}

inline Vec3 key_to_min_corner(const VoxelKey& k, double resolution) {
  return Vec3(k.x * resolution, k.y * resolution, k.z * resolution);
}

struct VoxelKeyHash {
  size_t operator()(const VoxelKey& k) const noexcept {
    // Large-prime mix; identical keys across runs hash identically.
    uint64_t h = static_cast<uint32_t>(k.x) * 73856093ULL;
    h ^= static_cast<uint32_t>(k.y) * 19349669ULL;
    h ^= static_cast<uint32_t>(k.z) * 83492791ULL;
    return static_cast<size_t>(h * 0x9E3779B97F4A7C15ULL >> 16);
  }
};

// Rigid pose; z of `position` sits at the robot's ground contact plane.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

enum class TravLabel : int8_t { kNonTraversable = 0, kTraversable = 1, kUnlabeled = -1 };

}  // namespace foresttrav
