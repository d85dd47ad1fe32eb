#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "foresttrav/eval.hpp"
#include "foresttrav/rng.hpp"
#include "foresttrav/voxel_map.hpp"

namespace foresttrav {

inline constexpr int kCubeSize = 32;
// Cubes with fewer occupied sites carry too little context to train on.
inline constexpr std::size_t kMinCubeSites = 150;

struct CubeSample {
  VoxelKey origin;  // map key of the cube's (0, 0, 0) corner
  std::vector<std::array<std::uint8_t, 3>> coords;  // unique, in [0, 32)^3
  std::vector<FeatureVector> features;              // index-aligned
  std::vector<TravLabel> labels;                    // index-aligned

  std::size_t size() const { return coords.size(); }
};

// Tiles the map's active voxels into disjoint 32^3 blocks anchored at the
// componentwise minimum active key. Every active voxel lands in exactly one
// block; blocks with fewer than `min_sites` sites are dropped. Voxels absent
// from `labels` come back unlabeled. Site order follows `map.keys`.
std::vector<CubeSample> split_cubes(const FeatureMap& map,
                                    const LabelMap& labels,
                                    std::size_t min_sites = kMinCubeSites);

// Per-feature zero-mean scaling constants, population (1/N) convention,
// standard deviation floored at 1e-8.
struct NormalizationStats {
  std::array<float, kFeatureDim> mean{};
  std::array<float, kFeatureDim> stddev{};

  FeatureVector apply(const FeatureVector& f) const;
};

// Stats over every site of the given cubes. Callers pass training folds
// only. Throws DataError when there are no sites.
NormalizationStats compute_normalization(const std::vector<CubeSample>& cubes);

// One sampled augmentation, split from its application so tests can pin
// specific paths. Draw order: per-site keep flags, mirror x, mirror y,
// quarter turns, translation gate, then axis/sign/offset when translating.
struct AugmentPlan {
  std::vector<bool> keep;    // pruning survival per input site
  bool mirror_x = false;     // i -> 31 - i
  bool mirror_y = false;     // j -> 31 - j
  int quarter_turns = 0;     // gravity-axis rotation: (i, j) -> (31 - j, i)
  int translate_axis = -1;   // 0..2, -1 = no translation
  int translate_offset = 0;  // signed voxels, magnitude 1..10

  static AugmentPlan identity(std::size_t num_sites);
};

AugmentPlan draw_augment_plan(std::size_t num_sites, Rng& rng);

// Applies prune -> mirror -> rotate -> translate; translated sites leaving
// [0, 32)^3 are discarded. Features and labels follow their sites; feature
// values are not re-derived. The result may fall below kMinCubeSites —
// training skips such cubes for the epoch.
CubeSample apply_augment(const CubeSample& cube, const AugmentPlan& plan);

inline CubeSample augment(const CubeSample& cube, Rng& rng) {
  return apply_augment(cube, draw_augment_plan(cube.size(), rng));
}

// Scene-level bookkeeping for cross-validation. Global cube indices count
// through `scene_ids` order; the held-out test scene's cubes join no fold.
struct DatasetManifest {
  std::vector<std::string> scene_ids;
  std::vector<std::uint32_t> cube_counts;  // aligned with scene_ids
  std::string test_scene;
  std::vector<std::vector<std::uint32_t>> folds;
};

// Shuffles (seeded) the non-test cubes into k near-equal folds (sizes differ
// by at most one). Throws ConfigError for k < 2 and DataError when fewer
// training cubes than folds exist.
DatasetManifest kfold_split(
    const std::vector<std::pair<std::string, std::uint32_t>>& scene_cubes,
    const std::string& test_scene, int k, std::uint64_t seed);

}  // namespace foresttrav
