#pragma once

#include <array>
#include <memory>
#include <unordered_map>
#include <vector>

#include "foresttrav/types.hpp"

namespace foresttrav {

// Occupancy update increments and saturation bound (p_hit = 0.7,
// p_miss = 0.4, p clamped to [0.02, 0.98]).
extern const double kLogOddsHit;
extern const double kLogOddsMiss;
inline constexpr double kLogOddsMin = -3.92;
inline constexpr double kLogOddsMax = 3.92;

// Mahalanobis gate for ray-vs-distribution hit/miss counting.
inline constexpr double kNdtGate = 2.0;
// Minimum sample count before a voxel's distribution is considered formed.
inline constexpr uint32_t kNdtMinPoints = 3;

struct VoxelStats {
  uint32_t n_points = 0;
  Vec3 sum = Vec3::Zero();
  Mat3 second_moment = Mat3::Zero();  // sum of outer products p * p^T

  // Occupancy is kept as integer update counts since the last saturation
  // event plus the saturated base value. The clamped log-odds is then a pure
  // function of the counts, so any integration order of the same update
  // multiset yields bit-identical values between saturation events.
  double occ_rebase = 0.0;
  uint32_t occ_hit_updates = 0;
  uint32_t occ_miss_updates = 0;

  double intensity_mean = 0.0;
  double intensity_m2 = 0.0;  // Welford sum of squared deviations

  uint32_t n_hit = 0;
  uint32_t n_miss = 0;
  uint32_t n_multi_return = 0;

  bool active() const { return n_points >= 1; }
  Vec3 mean() const { return sum / static_cast<double>(n_points); }
  // Sample covariance (1/(n-1)); zero matrix for n < 2.
  Mat3 covariance() const;
  double log_odds() const;
  double occupancy_probability() const;
  // Sample variance of endpoint intensities (1/(n-1)); 0 for n < 2.
  double intensity_variance() const;

  void apply_occupancy_hit();
  void apply_occupancy_miss();
};

// Feature layout per voxel: the lower-triangular Cholesky factor of the
// regularized point covariance, occupancy state, intensity moments and ray
// interaction counts.
enum FeatureIndex : int {
  kFeatS11 = 0,
  kFeatS21 = 1,
  kFeatS22 = 2,
  kFeatS31 = 3,
  kFeatS32 = 4,
  kFeatS33 = 5,
  kFeatNOcc = 6,
  kFeatLOcc = 7,
  kFeatMeanIntensity = 8,
  kFeatVarIntensity = 9,
  kFeatNHit = 10,
  kFeatNMiss = 11,
  kFeatNMultiReturn = 12,
};
inline constexpr int kFeatureDim = 13;
using FeatureVector = std::array<float, kFeatureDim>;

// S entries are zero for voxels with fewer than two points (the covariance is
// defined as zero there); otherwise S * S^T reproduces the regularized
// covariance.
FeatureVector compute_features(const VoxelStats& stats);

struct FeatureMap {
  double resolution = 0.0;
  std::vector<VoxelKey> keys;
  std::vector<FeatureVector> features;
};

// Sparse probabilistic voxel map fusing lidar returns. Writes are
// single-threaded; concurrent readers must work on snapshots.
class VoxelMap {
 public:
  using Storage = std::unordered_map<VoxelKey, VoxelStats, VoxelKeyHash>;

  explicit VoxelMap(double resolution);

  double resolution() const { return resolution_; }

  // Fuses one lidar return: occupancy miss + NDT miss test on every
  // pass-through cell, occupancy hit + moment/intensity updates and the NDT
  // hit test on the endpoint cell. num_returns >= 2 marks the endpoint as a
  // multi-return. Throws std::invalid_argument on degenerate segments.
  void integrate_ray(const Vec3& origin, const Vec3& endpoint, float intensity,
                     uint8_t num_returns = 1);

  const VoxelStats* find(const VoxelKey& key) const;
  size_t voxel_count() const { return voxels_.size(); }
  size_t active_voxel_count() const;
  const Storage& voxels() const { return voxels_; }
  std::vector<VoxelKey> sorted_active_keys() const;

  // Active voxels whose centers lie in the half-open box
  // [center - extent/2, center + extent/2), keys sorted.
  FeatureMap extract_feature_map(const Vec3& center, const Vec3& extent) const;
  // All active voxels, keys sorted.
  FeatureMap extract_all_features() const;

  std::shared_ptr<const VoxelMap> snapshot() const {
    return std::make_shared<const VoxelMap>(*this);
  }

 private:
  friend VoxelMap load_map(const std::string& path);
  double resolution_;
  Storage voxels_;
};

// Hit/miss test helpers, exposed for the evaluation module and tests.
// Minimum Mahalanobis distance of segment [p0, p1] to the voxel's
// regularized NDT distribution.
double segment_mahalanobis(const VoxelStats& stats, const Vec3& p0,
                           const Vec3& p1);
double point_mahalanobis(const VoxelStats& stats, const Vec3& p);

}  // namespace foresttrav
