#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "foresttrav/types.hpp"
#include "foresttrav/voxel_map.hpp"

namespace foresttrav {

// Log-odds increments toward non-traversable. Hand labels seed a weak prior;
// one robot experience outweighs it, so lived evidence overrides annotation.
extern const double kHandLabelNt;   // +ln(0.7/0.3)
extern const double kExperienceNt;  // +ln(0.85/0.15)
inline constexpr double kCollisionClampMin = -6.0;
inline constexpr double kCollisionClampMax = 6.0;

struct RobotGeometry {
  double length = 0.8;  // forward extent, x in body frame
  double width = 0.6;
  double height = 0.5;
  double d_ext = 0.2;  // lookahead depth of the front collision slab
};

enum class LabelSource : uint8_t { kHand = 0, kExperience = 1 };

struct LabeledVoxel {
  VoxelKey key;
  TravLabel label = TravLabel::kUnlabeled;
  LabelSource source = LabelSource::kHand;
};

struct LabeledVoxelCloud {
  double resolution = 0.0;
  std::vector<LabeledVoxel> voxels;
};

struct PoseEvent {
  double t = 0.0;
  Pose pose;
  // kTraversable: the robot occupied this pose without incident.
  // kNonTraversable: a collision was registered at this pose.
  TravLabel state = TravLabel::kTraversable;
};

// Cells the robot body (traversable evidence) or its front slab
// (collision evidence) covers at `pose`; positive-volume overlap, keys sorted.
std::vector<VoxelKey> collision_region(const Pose& pose,
                                       const RobotGeometry& geom,
                                       TravLabel observed, double resolution);

// Per-voxel collision log-odds fused from hand labels and robot experience.
// Positive values mean non-traversable. Like the occupancy layer, the value
// is a pure function of integer update counts between clamp events, so
// clamp-free event permutations fuse bit-identically.
class CollisionLayer {
 public:
  explicit CollisionLayer(double resolution);

  double resolution() const { return resolution_; }

  // Seeds priors on an empty layer. Throws DataError when a key carries both
  // labels, listing the offending keys.
  void init_from_hand_labels(const std::vector<LabeledVoxel>& hand_labels);

  // Applies one pose observation to every cell of its collision region.
  void update_experience(const Pose& pose, const RobotGeometry& geom,
                         TravLabel observed);

  // Log-odds for a key (0 when never touched).
  double log_odds(const VoxelKey& key) const;
  size_t cell_count() const { return cells_.size(); }

  // Thresholds the fused layer over the map's active voxels: l > 0 -> NT,
  // l < 0 -> TR, untouched or exactly 0 -> unlabeled.
  LabeledVoxelCloud finalize_labels(const VoxelMap& map) const;

 private:
  struct Cell {
    double rebase = 0.0;
    int8_t hand = 0;  // +1 hand NT prior, -1 hand TR prior
    uint32_t exp_tr = 0;
    uint32_t exp_nt = 0;
    bool experienced = false;

    double value() const;
    void clamp_rebase();
  };

  double resolution_;
  bool hand_initialized_ = false;
  std::unordered_map<VoxelKey, Cell, VoxelKeyHash> cells_;
};

}  // namespace foresttrav
