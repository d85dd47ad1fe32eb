#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "foresttrav/types.hpp"
#include "foresttrav/voxel_map.hpp"

namespace foresttrav {

// Traversable is the positive class throughout.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
};

using LabelMap = std::unordered_map<VoxelKey, TravLabel, VoxelKeyHash>;
using ProbabilityMap = std::unordered_map<VoxelKey, float, VoxelKeyHash>;

// Scores predictions against labels over the keys present in both maps.
// Throws DataError when the intersection is empty.
ConfusionCounts confusion(const LabelMap& predictions, const LabelMap& labels);

// Matthews correlation coefficient; 0 when any marginal is empty.
double mcc(const ConfusionCounts& c);

// F1 with traversable as positive; 0 when the denominator vanishes.
double f1(const ConfusionCounts& c);

using ColumnKey = std::pair<std::int32_t, std::int32_t>;

// Vertical index over active voxels: per (x, y) column, keys sorted by z.
// The lowest active voxel of a column is its ground voxel.
struct ColumnIndex {
  double resolution = 0.1;
  std::map<ColumnKey, std::vector<VoxelKey>> columns;

  static ColumnIndex build(const std::vector<VoxelKey>& active_keys,
                           double resolution);

  const std::vector<VoxelKey>* column(std::int32_t x, std::int32_t y) const;
  VoxelKey ground(std::int32_t x, std::int32_t y) const;  // throws DataError

  // Number of voxels in the evaluation slab above (and including) ground.
  int slab_height() const;
};

// Per-column vegetation density: occupied fraction of the 1 m slab starting
// at the ground voxel (inclusive).
std::map<ColumnKey, double> vegetation_density(const ColumnIndex& index);

// Mean of the per-column densities; 0 for an empty index.
double mean_vegetation_density(const ColumnIndex& index);

struct DensityBin {
  double lo = 0.0;
  double hi = 0.0;
  double mcc = 0.0;
  std::uint64_t count = 0;
  bool degenerate = false;  // zero-denominator MCC reported as 0
};

// MCC stratified by the density of the column each evaluated voxel falls
// into. Bins partition [0, 1] with equal widths; density 1.0 lands in the
// last bin. Voxels above the density slab still inherit their column score.
std::vector<DensityBin> mcc_by_density(const LabelMap& predictions,
                                       const LabelMap& labels,
                                       const ColumnIndex& index,
                                       int num_bins = 10);

struct CtcConfig {
  double slope_limit_deg = 30.0;
  double roughness_limit = 0.001;  // smallest eigenvalue, m^2
};

// Slope/roughness heuristic on the per-voxel distribution. Voxels with
// fewer than three points are conservatively non-traversable.
TravLabel ctc_classify(const VoxelStats& stats, const CtcConfig& cfg = {});

// Feature subsets used for the ablation study.
enum class FeatureSet {
  kOcc,           // [n_occ, l_occ]
  kNdtTm,         // [slope, roughness, permeability, mean_int, var_int]
  kFtmGeometric,  // kNdtTm + [linearity, planarity, sphericity]
  kForestTrav,    // full 13-feature vector
};

std::size_t feature_set_dim(FeatureSet set);
const char* feature_set_name(FeatureSet set);

struct AblationFeatures {
  std::vector<float> values;
  bool shape_valid = true;  // eigen-derived entries are zero when false
};

AblationFeatures ablation_features(const VoxelStats& stats, FeatureSet set);

// Collapses a probability field to a 2D grid: a column is traversable only
// when every voxel of its ground slab clears the threshold.
std::map<ColumnKey, TravLabel> compress_2d(const ProbabilityMap& probabilities,
                                           const ColumnIndex& index,
                                           double threshold = 0.5);

struct TemporalPoint {
  double t = 0.0;
  double mcc = 0.0;
  double f1 = 0.0;
  double coverage = 0.0;
  bool has_metrics = false;  // false when the snapshot was empty
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;       // sample stddev, 1/(k-1)
  bool single_fold = false;  // stddev undefined, reported as 0
};

MetricSummary kfold_report(const std::vector<double>& per_fold_values);

}  // namespace foresttrav
