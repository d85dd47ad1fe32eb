#include "foresttrav/voxel_map.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "foresttrav/covariance.hpp"
#include "foresttrav/raycast.hpp"

namespace foresttrav {

const double kLogOddsHit = std::log(0.7 / 0.3);
const double kLogOddsMiss = std::log(0.4 / 0.6);

Mat3 VoxelStats::covariance() const {
  if (n_points < 2) return Mat3::Zero();
  const Vec3 mu = mean();
  Mat3 cov = (second_moment - sum * mu.transpose()) /
             static_cast<double>(n_points - 1);
  return 0.5 * (cov + cov.transpose());
}

double VoxelStats::log_odds() const {
  const double l = occ_rebase + occ_hit_updates * kLogOddsHit +
                   occ_miss_updates * kLogOddsMiss;
  return std::clamp(l, kLogOddsMin, kLogOddsMax);
}

double VoxelStats::occupancy_probability() const {
  return 1.0 / (1.0 + std::exp(-log_odds()));
}

double VoxelStats::intensity_variance() const {
  if (n_points < 2) return 0.0;
  return intensity_m2 / static_cast<double>(n_points - 1);
}

namespace {

// Re-bases the count representation when the clamp saturates, so later
// updates move away from the bound immediately.
void rebase_if_saturated(VoxelStats& s) {
  const double l = s.occ_rebase + s.occ_hit_updates * kLogOddsHit +
                   s.occ_miss_updates * kLogOddsMiss;
  if (l > kLogOddsMax || l < kLogOddsMin) {
    s.occ_rebase = std::clamp(l, kLogOddsMin, kLogOddsMax);
    s.occ_hit_updates = 0;
    s.occ_miss_updates = 0;
  }
}

}  // namespace

void VoxelStats::apply_occupancy_hit() {
  ++occ_hit_updates;
  rebase_if_saturated(*this);
}

void VoxelStats::apply_occupancy_miss() {
  ++occ_miss_updates;
  rebase_if_saturated(*this);
}

FeatureVector compute_features(const VoxelStats& stats) {
  FeatureVector f{};
  if (stats.n_points >= 2) {
    const Mat3 s = cholesky_lower(regularize_covariance(stats.covariance()));
    f[kFeatS11] = static_cast<float>(s(0, 0));
    f[kFeatS21] = static_cast<float>(s(1, 0));
    f[kFeatS22] = static_cast<float>(s(1, 1));
    f[kFeatS31] = static_cast<float>(s(2, 0));
    f[kFeatS32] = static_cast<float>(s(2, 1));
    f[kFeatS33] = static_cast<float>(s(2, 2));
  }
  f[kFeatNOcc] = static_cast<float>(stats.n_points);
  f[kFeatLOcc] = static_cast<float>(stats.log_odds());
  f[kFeatMeanIntensity] = static_cast<float>(stats.intensity_mean);
  f[kFeatVarIntensity] = static_cast<float>(stats.intensity_variance());
  f[kFeatNHit] = static_cast<float>(stats.n_hit);
  f[kFeatNMiss] = static_cast<float>(stats.n_miss);
  f[kFeatNMultiReturn] = static_cast<float>(stats.n_multi_return);
  return f;
}

VoxelMap::VoxelMap(double resolution) : resolution_(resolution) {
  if (resolution <= 0.0) {
    throw std::invalid_argument("voxel map resolution must be positive");
  }
}

namespace {

// Inverse of the regularized covariance applied to r.
double mahalanobis_sq(const VoxelStats& stats, const Vec3& r) {
  const Mat3 cov = regularize_covariance(stats.covariance());
  Eigen::LLT<Mat3> llt(cov);
  const Vec3 w = llt.solve(r);
  return r.dot(w);
}

}  // namespace

double point_mahalanobis(const VoxelStats& stats, const Vec3& p) {
  return std::sqrt(mahalanobis_sq(stats, p - stats.mean()));
}

double segment_mahalanobis(const VoxelStats& stats, const Vec3& p0,
                           const Vec3& p1) {
  const Mat3 cov = regularize_covariance(stats.covariance());
  Eigen::LLT<Mat3> llt(cov);
  const Vec3 mu = stats.mean();
  const Vec3 a = p0 - mu;
  const Vec3 b = p1 - p0;
  const double bb = b.dot(llt.solve(b));
  double t = 0.0;
  if (bb > 0.0) {
    t = std::clamp(-a.dot(llt.solve(b)) / bb, 0.0, 1.0);
  }
  const Vec3 r = a + t * b;
  return std::sqrt(r.dot(llt.solve(r)));
}

void VoxelMap::integrate_ray(const Vec3& origin, const Vec3& endpoint,
                             float intensity, uint8_t num_returns) {
  struct Visit {
    VoxelKey key;
    double t0, t1;
  };
  // Typical rays stay well under this; avoids reallocation churn.
  thread_local std::vector<Visit> visits;
  visits.clear();
  raycast_intervals(origin, endpoint, resolution_,
                    [](const VoxelKey& k, double t0, double t1) {
                      visits.push_back({k, t0, t1});
                    });

  const Vec3 dir = endpoint - origin;
  const size_t last = visits.size() - 1;
  for (size_t i = 0; i < visits.size(); ++i) {
    VoxelStats& s = voxels_[visits[i].key];
    const bool ended_here = (i == last);
    if (ended_here) {
      s.apply_occupancy_hit();
      // Ray tested against the distribution as it stood before this return.
      if (s.n_points >= kNdtMinPoints &&
          point_mahalanobis(s, endpoint) <= kNdtGate) {
        ++s.n_hit;
      }
      s.sum += endpoint;
      s.second_moment += endpoint * endpoint.transpose();
      ++s.n_points;
      const double delta = intensity - s.intensity_mean;
      s.intensity_mean += delta / static_cast<double>(s.n_points);
      s.intensity_m2 += delta * (intensity - s.intensity_mean);
      if (num_returns >= 2) ++s.n_multi_return;
    } else {
      s.apply_occupancy_miss();
      if (s.n_points >= kNdtMinPoints) {
        const Vec3 p0 = origin + visits[i].t0 * dir;
        const Vec3 p1 = origin + visits[i].t1 * dir;
        if (segment_mahalanobis(s, p0, p1) <= kNdtGate) ++s.n_miss;
      }
    }
  }
}

const VoxelStats* VoxelMap::find(const VoxelKey& key) const {
  const auto it = voxels_.find(key);
  return it == voxels_.end() ? nullptr : &it->second;
}

size_t VoxelMap::active_voxel_count() const {
  size_t n = 0;
  for (const auto& [key, stats] : voxels_) {
    if (stats.active()) ++n;
  }
  return n;
}

std::vector<VoxelKey> VoxelMap::sorted_active_keys() const {
  std::vector<VoxelKey> keys;
  keys.reserve(voxels_.size());
  for (const auto& [key, stats] : voxels_) {
    if (stats.active()) keys.push_back(key);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

FeatureMap VoxelMap::extract_feature_map(const Vec3& center,
                                         const Vec3& extent) const {
  const Vec3 lo = center - 0.5 * extent;
  const Vec3 hi = center + 0.5 * extent;
  FeatureMap out;
  out.resolution = resolution_;
  for (const auto& [key, stats] : voxels_) {
    if (!stats.active()) continue;
    const Vec3 c = key_to_center(key, resolution_);
    if (c.x() >= lo.x() && c.x() < hi.x() && c.y() >= lo.y() &&
        c.y() < hi.y() && c.z() >= lo.z() && c.z() < hi.z()) {
      out.keys.push_back(key);
    }
  }
  std::sort(out.keys.begin(), out.keys.end());
  out.features.reserve(out.keys.size());
  for (const VoxelKey& key : out.keys) {
    out.features.push_back(compute_features(voxels_.at(key)));
  }
  return out;
}

FeatureMap VoxelMap::extract_all_features() const {
  FeatureMap out;
  out.resolution = resolution_;
  out.keys = sorted_active_keys();
  out.features.reserve(out.keys.size());
  for (const VoxelKey& key : out.keys) {
    out.features.push_back(compute_features(voxels_.at(key)));
  }
  return out;
}

}  // namespace foresttrav
