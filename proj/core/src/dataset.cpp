#include "foresttrav/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "foresttrav/error.hpp"

namespace foresttrav {

std::vector<CubeSample> split_cubes(const FeatureMap& map,
                                    const LabelMap& labels,
                                    std::size_t min_sites) {
  std::vector<CubeSample> out;
  if (map.keys.empty()) return out;
  if (map.keys.size() != map.features.size()) {
    throw std::invalid_argument("feature map keys and features disagree");
  }

  VoxelKey anchor = map.keys.front();
  for (const VoxelKey& k : map.keys) {
    anchor.x = std::min(anchor.x, k.x);
    anchor.y = std::min(anchor.y, k.y);
    anchor.z = std::min(anchor.z, k.z);
  }

  std::map<std::tuple<int32_t, int32_t, int32_t>, CubeSample> cubes;
  for (std::size_t i = 0; i < map.keys.size(); ++i) {
    const VoxelKey& k = map.keys[i];
    const int32_t cx = (k.x - anchor.x) / kCubeSize;
    const int32_t cy = (k.y - anchor.y) / kCubeSize;
    const int32_t cz = (k.z - anchor.z) / kCubeSize;
    CubeSample& cube = cubes[{cx, cy, cz}];
    cube.origin = VoxelKey{anchor.x + cx * kCubeSize,
                           anchor.y + cy * kCubeSize,
                           anchor.z + cz * kCubeSize};
    cube.coords.push_back({static_cast<std::uint8_t>(k.x - cube.origin.x),
                           static_cast<std::uint8_t>(k.y - cube.origin.y),
                           static_cast<std::uint8_t>(k.z - cube.origin.z)});
    cube.features.push_back(map.features[i]);
    const auto it = labels.find(k);
    cube.labels.push_back(it == labels.end() ? TravLabel::kUnlabeled
                                             : it->second);
  }

  for (auto& [index, cube] : cubes) {
    if (cube.size() >= min_sites) out.push_back(std::move(cube));
  }
  return out;
}

FeatureVector NormalizationStats::apply(const FeatureVector& f) const {
  FeatureVector out;
  for (int i = 0; i < kFeatureDim; ++i) {
    out[i] = (f[i] - mean[i]) / stddev[i];
  }
  return out;
}

NormalizationStats compute_normalization(
    const std::vector<CubeSample>& cubes) {
  std::array<double, kFeatureDim> sum{};
  std::array<double, kFeatureDim> sum_sq{};
  std::size_t n = 0;
  for (const CubeSample& cube : cubes) {
    for (const FeatureVector& f : cube.features) {
      for (int i = 0; i < kFeatureDim; ++i) {
        sum[i] += f[i];
        sum_sq[i] += static_cast<double>(f[i]) * f[i];
      }
      ++n;
    }
  }
  if (n == 0) {
    throw DataError("normalization needs at least one occupied site");
  }
  NormalizationStats stats;
  for (int i = 0; i < kFeatureDim; ++i) {
    const double mean = sum[i] / static_cast<double>(n);
    const double var =
        std::max(0.0, sum_sq[i] / static_cast<double>(n) - mean * mean);
    stats.mean[i] = static_cast<float>(mean);
    stats.stddev[i] = static_cast<float>(std::max(std::sqrt(var), 1e-8));
  }
  return stats;
}

AugmentPlan AugmentPlan::identity(std::size_t num_sites) {
  AugmentPlan plan;
  plan.keep.assign(num_sites, true);
  return plan;
}

AugmentPlan draw_augment_plan(std::size_t num_sites, Rng& rng) {
  AugmentPlan plan;
  plan.keep.resize(num_sites);
  for (std::size_t i = 0; i < num_sites; ++i) {
    plan.keep[i] = !rng.bernoulli(0.05);
  }
  plan.mirror_x = rng.bernoulli(0.5);
  plan.mirror_y = rng.bernoulli(0.5);
  plan.quarter_turns = static_cast<int>(rng.uniform_int(0, 3));
  if (rng.bernoulli(0.5)) {
    plan.translate_axis = static_cast<int>(rng.uniform_int(0, 2));
    const int sign = rng.bernoulli(0.5) ? 1 : -1;
    plan.translate_offset = sign * static_cast<int>(rng.uniform_int(1, 10));
  }
  return plan;
}

CubeSample apply_augment(const CubeSample& cube, const AugmentPlan& plan) {
  if (plan.keep.size() != cube.size()) {
    throw std::invalid_argument("augment plan sized for a different cube");
  }
  if (cube.features.size() != cube.size() || cube.labels.size() != cube.size()) {
    throw std::invalid_argument("cube arrays are not index-aligned");
  }
  CubeSample out;
  out.origin = cube.origin;
  for (std::size_t s = 0; s < cube.size(); ++s) {
    if (!plan.keep[s]) continue;
    int c[3] = {cube.coords[s][0], cube.coords[s][1], cube.coords[s][2]};
    if (plan.mirror_x) c[0] = kCubeSize - 1 - c[0];
    if (plan.mirror_y) c[1] = kCubeSize - 1 - c[1];
    for (int q = 0; q < plan.quarter_turns; ++q) {
      const int i = c[0];
      c[0] = kCubeSize - 1 - c[1];
      c[1] = i;
    }
    if (plan.translate_axis >= 0) {
      c[plan.translate_axis] += plan.translate_offset;
      if (c[plan.translate_axis] < 0 || c[plan.translate_axis] >= kCubeSize) {
        continue;
      }
    }
    out.coords.push_back({static_cast<std::uint8_t>(c[0]),
                          static_cast<std::uint8_t>(c[1]),
                          static_cast<std::uint8_t>(c[2])});
    out.features.push_back(cube.features[s]);
    out.labels.push_back(cube.labels[s]);
  }
  return out;
}

DatasetManifest kfold_split(
    const std::vector<std::pair<std::string, std::uint32_t>>& scene_cubes,
    const std::string& test_scene, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs at least 2 folds");

  DatasetManifest manifest;
  manifest.test_scene = test_scene;
  std::vector<std::uint32_t> train;
  std::uint32_t global = 0;
  for (const auto& [id, count] : scene_cubes) {
    manifest.scene_ids.push_back(id);
    manifest.cube_counts.push_back(count);
    for (std::uint32_t c = 0; c < count; ++c, ++global) {
      if (id != test_scene) train.push_back(global);
    }
  }
  if (train.size() < static_cast<std::size_t>(k)) {
    throw DataError("fewer training cubes (" + std::to_string(train.size()) +
                    ") than folds (" + std::to_string(k) + ")");
  }

  Rng rng(seed);
  for (std::size_t i = train.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int64_t>(i)));
    std::swap(train[i], train[j]);
  }
  manifest.folds.assign(static_cast<std::size_t>(k), {});
  for (std::size_t i = 0; i < train.size(); ++i) {
    manifest.folds[i % static_cast<std::size_t>(k)].push_back(train[i]);
  }
  for (auto& fold : manifest.folds) std::sort(fold.begin(), fold.end());
  return manifest;
}

}  // namespace foresttrav
