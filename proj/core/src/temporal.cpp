#include "foresttrav/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>

#include "foresttrav/error.hpp"

namespace foresttrav {

std::vector<TemporalPoint> temporal_eval(const std::vector<RayRecord>& rays,
                                         std::vector<UNetModel>& models,
                                         const LabelMap& reference,
                                         double resolution, double dt) {
  if (dt <= 0.0 || resolution <= 0.0) {
    throw ConfigError("temporal evaluation needs positive dt and resolution");
  }
  if (models.empty()) {
    throw ConfigError("temporal evaluation needs at least one model");
  }

  LabelMap labeled;
  labeled.reserve(reference.size());
  for (const auto& [key, label] : reference) {
    if (label != TravLabel::kUnlabeled) labeled.emplace(key, label);
  }
  if (labeled.empty()) {
    throw DataError("temporal evaluation reference holds no labeled voxel");
  }

  std::vector<TemporalPoint> series;
  if (rays.empty()) return series;

  std::vector<std::size_t> order(rays.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rays[a].t < rays[b].t;
  });

  const double t_end = rays[order.back()].t;
  const int num_snapshots = std::max(1, static_cast<int>(std::ceil(t_end / dt)));

  VoxelMap map(resolution);
  std::size_t next = 0;
  for (int k = 1; k <= num_snapshots; ++k) {
    const double t_snap = static_cast<double>(k) * dt;
    while (next < order.size() && rays[order[next]].t <= t_snap) {
      const RayRecord& ray = rays[order[next]];
      map.integrate_ray(ray.origin, ray.endpoint,
                        static_cast<float>(ray.intensity), ray.num_returns);
      ++next;
    }

    TemporalPoint point;
    point.t = t_snap;
    const FeatureMap snapshot = map.extract_all_features();
    if (!snapshot.keys.empty()) {
      const ProbabilityMap probabilities = ensemble_predict(models, snapshot);
      LabelMap predictions;
      predictions.reserve(probabilities.size());
      std::size_t covered = 0;
      for (const auto& [key, p] : probabilities) {
        predictions.emplace(
            key, p > 0.5f ? TravLabel::kTraversable : TravLabel::kNonTraversable);
        if (labeled.count(key) != 0) ++covered;
      }
      point.coverage =
          static_cast<double>(covered) / static_cast<double>(labeled.size());
      if (covered != 0) {
        const ConfusionCounts counts = confusion(predictions, labeled);
        point.mcc = mcc(counts);
        point.f1 = f1(counts);
        point.has_metrics = true;
      }
    }
    series.push_back(point);
  }
  return series;
}

}  // namespace foresttrav
