#pragma once

#include <string>
#include <vector>

#include "foresttrav/collision_layer.hpp"

namespace foresttrav {

// CSV lines "i,j,k,label" with label TR or NT; '#' lines are comments.
// Unlabeled entries are skipped on write. `allow_unknown` additionally
// accepts (and emits) UNKNOWN rows, used for fused label clouds.
std::vector<LabeledVoxel> load_label_csv(const std::string& path,
                                         bool allow_unknown = false);
void save_label_csv(const std::vector<LabeledVoxel>& labels,
                    const std::string& path, bool write_unknown = false);

// Binary pose/collision event log, magic "FTEV": f64 t, f32 position xyz,
// f32 quaternion wxyz, u8 state (1 = traversed, 0 = collision).
void save_events(const std::vector<PoseEvent>& events, const std::string& path);
std::vector<PoseEvent> load_events(const std::string& path);

}  // namespace foresttrav
