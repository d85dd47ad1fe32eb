#pragma once

#include <string>

#include "foresttrav/voxel_map.hpp"

namespace foresttrav {

// Binary voxel map file, magic "FTVM". Voxels are written in sorted key
// order, so equal maps produce byte-identical files.
void save_map(const VoxelMap& map, const std::string& path);
VoxelMap load_map(const std::string& path);

}  // namespace foresttrav
