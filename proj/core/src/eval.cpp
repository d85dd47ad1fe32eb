#include "foresttrav/eval.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "foresttrav/covariance.hpp"
#include "foresttrav/error.hpp"

namespace foresttrav {

ConfusionCounts confusion(const LabelMap& predictions, const LabelMap& labels) {
  ConfusionCounts c;
  for (const auto& [key, predicted] : predictions) {
    const auto it = labels.find(key);
    if (it == labels.end()) continue;
    const bool pred_tr = predicted == TravLabel::kTraversable;
    const bool label_tr = it->second == TravLabel::kTraversable;
    if (pred_tr && label_tr) {
      ++c.tp;
    } else if (pred_tr && !label_tr) {
      ++c.fp;
    } else if (!pred_tr && label_tr) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  if (c.total() == 0) {
    throw DataError("confusion: predictions and labels share no voxels");
  }
  return c;
}

double mcc(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn);
  const double fn = static_cast<double>(c.fn);
  const double f0 = tp + fp;
  const double f1 = tp + fn;
  const double f2 = tn + fp;
  const double f3 = tn + fn;
  if (f0 == 0.0 || f1 == 0.0 || f2 == 0.0 || f3 == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(f0 * f1 * f2 * f3);
}

double f1(const ConfusionCounts& c) {
  const double den = static_cast<double>(2 * c.tp + c.fp + c.fn);
  if (den == 0.0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / den;
}

ColumnIndex ColumnIndex::build(const std::vector<VoxelKey>& active_keys,
                               double resolution) {
  ColumnIndex index;
  index.resolution = resolution;
  for (const auto& key : active_keys) {
    index.columns[{key.x, key.y}].push_back(key);
  }
  for (auto& [xy, keys] : index.columns) {
    std::sort(keys.begin(), keys.end(),
              [](const VoxelKey& a, const VoxelKey& b) { return a.z < b.z; });
  }
  return index;
}

const std::vector<VoxelKey>* ColumnIndex::column(std::int32_t x,
                                                 std::int32_t y) const {
  const auto it = columns.find({x, y});
  return it == columns.end() ? nullptr : &it->second;
}

VoxelKey ColumnIndex::ground(std::int32_t x, std::int32_t y) const {
  const auto* keys = column(x, y);
  if (keys == nullptr || keys->empty()) {
    throw DataError("ColumnIndex: no active voxels in column (" +
                    std::to_string(x) + "," + std::to_string(y) + ")");
  }
  return keys->front();
}

int ColumnIndex::slab_height() const {
  return std::max(1, static_cast<int>(std::lround(1.0 / resolution)));
}

std::map<ColumnKey, double> vegetation_density(const ColumnIndex& index) {
  std::map<ColumnKey, double> out;
  const int n_total = index.slab_height();
  for (const auto& [xy, keys] : index.columns) {
    if (keys.empty()) continue;
    const std::int32_t ground_z = keys.front().z;
    int n_meas = 0;
    for (const auto& key : keys) {
      if (key.z < ground_z + n_total) ++n_meas;
    }
    out[xy] = static_cast<double>(n_meas) / n_total;
  }
  return out;
}

double mean_vegetation_density(const ColumnIndex& index) {
  const auto densities = vegetation_density(index);
  if (densities.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [xy, rho] : densities) sum += rho;
  return sum / static_cast<double>(densities.size());
}

std::vector<DensityBin> mcc_by_density(const LabelMap& predictions,
                                       const LabelMap& labels,
                                       const ColumnIndex& index,
                                       int num_bins) {
  if (num_bins < 1) throw DataError("mcc_by_density: num_bins must be >= 1");
  const auto densities = vegetation_density(index);
  std::vector<ConfusionCounts> per_bin(num_bins);
  for (const auto& [key, predicted] : predictions) {
    const auto label_it = labels.find(key);
    if (label_it == labels.end()) continue;
    const auto rho_it = densities.find({key.x, key.y});
    if (rho_it == densities.end()) {
      throw DataError("mcc_by_density: evaluated voxel lies in a column "
                      "missing from the index");
    }
    int bin = static_cast<int>(rho_it->second * num_bins);
    bin = std::clamp(bin, 0, num_bins - 1);
    auto& c = per_bin[bin];
    const bool pred_tr = predicted == TravLabel::kTraversable;
    const bool label_tr = label_it->second == TravLabel::kTraversable;
    if (pred_tr && label_tr) {
      ++c.tp;
    } else if (pred_tr && !label_tr) {
      ++c.fp;
    } else if (!pred_tr && label_tr) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  std::vector<DensityBin> out(num_bins);
  for (int i = 0; i < num_bins; ++i) {
    out[i].lo = static_cast<double>(i) / num_bins;
    out[i].hi = static_cast<double>(i + 1) / num_bins;
    out[i].count = per_bin[i].total();
    out[i].mcc = mcc(per_bin[i]);
    const auto& c = per_bin[i];
    out[i].degenerate = c.tp + c.fp == 0 || c.tp + c.fn == 0 ||
                        c.tn + c.fp == 0 || c.tn + c.fn == 0;
  }
  return out;
}

namespace {

struct EigenShape {
  Vec3 eigenvalues;   // ascending
  Vec3 normal;        // eigenvector of the smallest eigenvalue
};

EigenShape eigen_shape(const VoxelStats& stats) {
  const Mat3 sigma = regularize_covariance(stats.covariance());
  Eigen::SelfAdjointEigenSolver<Mat3> solver(sigma);
  EigenShape shape;
  shape.eigenvalues = solver.eigenvalues();
  shape.normal = solver.eigenvectors().col(0);
  return shape;
}

double slope_deg(const Vec3& normal) {
  const double cos_angle = std::min(1.0, std::abs(normal.z()));
  return std::acos(cos_angle) * 180.0 / M_PI;
}

}  // namespace

TravLabel ctc_classify(const VoxelStats& stats, const CtcConfig& cfg) {
  if (stats.n_points < 3) return TravLabel::kNonTraversable;
  const EigenShape shape = eigen_shape(stats);
  const double roughness = shape.eigenvalues(0);
  if (slope_deg(shape.normal) > cfg.slope_limit_deg ||
      roughness > cfg.roughness_limit) {
    return TravLabel::kNonTraversable;
  }
  return TravLabel::kTraversable;
}

std::size_t feature_set_dim(FeatureSet set) {
  switch (set) {
    case FeatureSet::kOcc:
      return 2;
    case FeatureSet::kNdtTm:
      return 5;
    case FeatureSet::kFtmGeometric:
      return 8;
    case FeatureSet::kForestTrav:
      return kFeatureDim;
  }
  return 0;
}

const char* feature_set_name(FeatureSet set) {
  switch (set) {
    case FeatureSet::kOcc:
      return "occ";
    case FeatureSet::kNdtTm:
      return "ndt_tm";
    case FeatureSet::kFtmGeometric:
      return "ftm_geometric";
    case FeatureSet::kForestTrav:
      return "foresttrav";
  }
  return "unknown";
}

AblationFeatures ablation_features(const VoxelStats& stats, FeatureSet set) {
  AblationFeatures out;
  if (set == FeatureSet::kOcc) {
    out.values = {static_cast<float>(stats.n_points),
                  static_cast<float>(stats.log_odds())};
    return out;
  }
  if (set == FeatureSet::kForestTrav) {
    const FeatureVector f = compute_features(stats);
    out.values.assign(f.begin(), f.end());
    out.shape_valid = stats.n_points >= 2;
    return out;
  }

  out.shape_valid = stats.n_points >= 3;
  double slope = 0.0, roughness = 0.0;
  double linearity = 0.0, planarity = 0.0, sphericity = 0.0;
  if (out.shape_valid) {
    const EigenShape shape = eigen_shape(stats);
    slope = slope_deg(shape.normal);
    roughness = shape.eigenvalues(0);
    const double l1 = shape.eigenvalues(2);
    const double l2 = shape.eigenvalues(1);
    const double l3 = shape.eigenvalues(0);
    linearity = (l1 - l2) / l1;
    planarity = (l2 - l3) / l1;
    sphericity = l3 / l1;
  }
  const std::uint64_t rays = stats.n_hit + stats.n_miss;
  const double permeability =
      rays == 0 ? 0.0 : static_cast<double>(stats.n_hit) / rays;
  out.values = {static_cast<float>(slope), static_cast<float>(roughness),
                static_cast<float>(permeability),
                static_cast<float>(stats.intensity_mean),
                static_cast<float>(stats.intensity_variance())};
  if (set == FeatureSet::kFtmGeometric) {
    out.values.push_back(static_cast<float>(linearity));
    out.values.push_back(static_cast<float>(planarity));
    out.values.push_back(static_cast<float>(sphericity));
  }
  return out;
}

std::map<ColumnKey, TravLabel> compress_2d(const ProbabilityMap& probabilities,
                                           const ColumnIndex& index,
                                           double threshold) {
  std::map<ColumnKey, TravLabel> out;
  const int n_total = index.slab_height();
  for (const auto& [xy, keys] : index.columns) {
    if (keys.empty()) continue;
    const std::int32_t ground_z = keys.front().z;
    bool traversable = true;
    for (const auto& key : keys) {
      if (key.z >= ground_z + n_total) continue;
      const auto it = probabilities.find(key);
      if (it == probabilities.end()) {
        throw DataError("compress_2d: no probability for voxel (" +
                        std::to_string(key.x) + "," + std::to_string(key.y) +
                        "," + std::to_string(key.z) + ")");
      }
      if (it->second < threshold) {
        traversable = false;
        break;
      }
    }
    out[xy] =
        traversable ? TravLabel::kTraversable : TravLabel::kNonTraversable;
  }
  return out;
}

MetricSummary kfold_report(const std::vector<double>& per_fold_values) {
  MetricSummary summary;
  const std::size_t k = per_fold_values.size();
  if (k == 0) throw DataError("kfold_report: no folds");
  double sum = 0.0;
  for (const double v : per_fold_values) sum += v;
  summary.mean = sum / static_cast<double>(k);
  if (k == 1) {
    summary.single_fold = true;
    return summary;
  }
  double ss = 0.0;
  for (const double v : per_fold_values) {
    ss += (v - summary.mean) * (v - summary.mean);
  }
  summary.stddev = std::sqrt(ss / static_cast<double>(k - 1));
  return summary;
}

}  // namespace foresttrav
