#pragma once

#include <vector>

#include "foresttrav/eval.hpp"
#include "foresttrav/sim.hpp"
#include "foresttrav/unet.hpp"

namespace foresttrav {

// Replays logged rays into a fresh map at `resolution` and snapshots it at
// every multiple of `dt` seconds of ray time up to the last ray. Each
// snapshot's active voxels are classified by the ensemble (vote fraction
// > 0.5 = traversable) and scored against the labeled entries of `reference`
// restricted to the snapshot's active keys; coverage is the fraction of
// labeled reference keys the snapshot has activated. Snapshots without any
// scoreable voxel carry no metrics. Rays are replayed in time order.
// Throws ConfigError on non-positive dt or resolution and DataError when
// `reference` holds no labeled key.
std::vector<TemporalPoint> temporal_eval(const std::vector<RayRecord>& rays,
                                         std::vector<UNetModel>& models,
                                         const LabelMap& reference,
                                         double resolution, double dt = 5.0);

}  // namespace foresttrav
