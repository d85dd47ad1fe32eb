#include "foresttrav/collision_layer.hpp"

#include <algorithm>
#include <cmath>

#include "foresttrav/error.hpp"
#include "foresttrav/geometry.hpp"

namespace foresttrav {

const double kHandLabelNt = std::log(0.7 / 0.3);
const double kExperienceNt = std::log(0.85 / 0.15);

std::vector<VoxelKey> collision_region(const Pose& pose,
                                       const RobotGeometry& geom,
                                       TravLabel observed, double resolution) {
  if (observed == TravLabel::kUnlabeled) {
    throw std::invalid_argument("collision_region: observation must be TR or NT");
  }
  Vec3 lo, hi;
  if (observed == TravLabel::kTraversable) {
    // Full body footprint; the pose z sits at the ground contact plane.
    lo = Vec3(-0.5 * geom.length, -0.5 * geom.width, 0.0);
    hi = Vec3(0.5 * geom.length, 0.5 * geom.width, geom.height);
  } else {
    // Slab ahead of the front face.
    lo = Vec3(0.5 * geom.length, -0.5 * geom.width, 0.0);
    hi = Vec3(0.5 * geom.length + geom.d_ext, 0.5 * geom.width, geom.height);
  }
  auto cells = rasterize_obb(make_obb(pose, lo, hi), resolution);
  std::sort(cells.begin(), cells.end());
  return cells;
}

double CollisionLayer::Cell::value() const {
  const double l =
      rebase + hand * kHandLabelNt +
      (static_cast<double>(exp_nt) - static_cast<double>(exp_tr)) * kExperienceNt;
  return std::clamp(l, kCollisionClampMin, kCollisionClampMax);
}

void CollisionLayer::Cell::clamp_rebase() {
  const double l =
      rebase + hand * kHandLabelNt +
      (static_cast<double>(exp_nt) - static_cast<double>(exp_tr)) * kExperienceNt;
  if (l > kCollisionClampMax || l < kCollisionClampMin) {
    rebase = std::clamp(l, kCollisionClampMin, kCollisionClampMax);
    hand = 0;
    exp_tr = 0;
    exp_nt = 0;
  }
}

CollisionLayer::CollisionLayer(double resolution) : resolution_(resolution) {
  if (resolution <= 0.0) {
    throw std::invalid_argument("collision layer resolution must be positive");
  }
}

void CollisionLayer::init_from_hand_labels(
    const std::vector<LabeledVoxel>& hand_labels) {
  if (hand_initialized_ || !cells_.empty()) {
    throw DataError("hand labels must seed an empty collision layer");
  }
  std::unordered_map<VoxelKey, TravLabel, VoxelKeyHash> seen;
  std::vector<VoxelKey> conflicts;
  for (const LabeledVoxel& v : hand_labels) {
    if (v.label == TravLabel::kUnlabeled) continue;
    const auto [it, inserted] = seen.emplace(v.key, v.label);
    if (!inserted && it->second != v.label) conflicts.push_back(v.key);
  }
  if (!conflicts.empty()) {
    std::sort(conflicts.begin(), conflicts.end());
    conflicts.erase(std::unique(conflicts.begin(), conflicts.end()),
                    conflicts.end());
    std::string msg = "conflicting hand labels at keys:";
    for (const VoxelKey& k : conflicts) {
      msg += " (" + std::to_string(k.x) + "," + std::to_string(k.y) + "," +
             std::to_string(k.z) + ")";
    }
    throw DataError(msg);
  }
  for (const auto& [key, label] : seen) {
    Cell& cell = cells_[key];
    cell.hand = (label == TravLabel::kNonTraversable) ? 1 : -1;
  }
  hand_initialized_ = true;
}

void CollisionLayer::update_experience(const Pose& pose,
                                       const RobotGeometry& geom,
                                       TravLabel observed) {
  for (const VoxelKey& key :
       collision_region(pose, geom, observed, resolution_)) {
    Cell& cell = cells_[key];
    if (observed == TravLabel::kTraversable) {
      ++cell.exp_tr;
    } else {
      ++cell.exp_nt;
    }
    cell.experienced = true;
    cell.clamp_rebase();
  }
}

double CollisionLayer::log_odds(const VoxelKey& key) const {
  const auto it = cells_.find(key);
  return it == cells_.end() ? 0.0 : it->second.value();
}

LabeledVoxelCloud CollisionLayer::finalize_labels(const VoxelMap& map) const {
  LabeledVoxelCloud cloud;
  cloud.resolution = resolution_;
  for (const VoxelKey& key : map.sorted_active_keys()) {
    LabeledVoxel out;
    out.key = key;
    const auto it = cells_.find(key);
    if (it == cells_.end()) {
      out.label = TravLabel::kUnlabeled;
    } else {
      const double l = it->second.value();
      out.label = l > 0.0   ? TravLabel::kNonTraversable
                  : l < 0.0 ? TravLabel::kTraversable
                            : TravLabel::kUnlabeled;
      out.source = it->second.experienced ? LabelSource::kExperience
                                          : LabelSource::kHand;
    }
    cloud.voxels.push_back(out);
  }
  return cloud;
}

}  // namespace foresttrav
