#include "foresttrav/map_io.hpp"

#include <algorithm>
#include <fstream>

#include "foresttrav/error.hpp"
#include "foresttrav/io_util.hpp"

namespace foresttrav {

namespace {
constexpr char kMagic[4] = {'F', 'T', 'V', 'M'};
constexpr uint16_t kVersion = 1;
}  // namespace

void save_map(const VoxelMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open map file for writing: " + path);

  write_magic(out, kMagic);
  write_le<uint16_t>(out, kVersion);
  write_le<double>(out, map.resolution());
  write_le<uint64_t>(out, map.voxel_count());

  std::vector<VoxelKey> keys;
  keys.reserve(map.voxel_count());
  for (const auto& [key, stats] : map.voxels()) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  for (const VoxelKey& key : keys) {
    const VoxelStats& s = *map.find(key);
    write_le<int32_t>(out, key.x);
    write_le<int32_t>(out, key.y);
    write_le<int32_t>(out, key.z);
    write_le<uint32_t>(out, s.n_points);
    for (int i = 0; i < 3; ++i) write_le<double>(out, s.sum[i]);
    // Unique second-moment entries, row-major lower triangle.
    write_le<double>(out, s.second_moment(0, 0));
    write_le<double>(out, s.second_moment(1, 0));
    write_le<double>(out, s.second_moment(1, 1));
    write_le<double>(out, s.second_moment(2, 0));
    write_le<double>(out, s.second_moment(2, 1));
    write_le<double>(out, s.second_moment(2, 2));
    write_le<float>(out, static_cast<float>(s.log_odds()));
    write_le<float>(out, static_cast<float>(s.intensity_mean));
    write_le<float>(out, static_cast<float>(s.intensity_variance()));
    write_le<uint32_t>(out, s.n_hit);
    write_le<uint32_t>(out, s.n_miss);
    write_le<uint32_t>(out, s.n_multi_return);
  }
  if (!out) throw FormatError("write failure on map file: " + path);
}

VoxelMap load_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open map file: " + path);

  expect_magic(in, kMagic, "map file");
  expect_version(in, kVersion, "map file");
  const double resolution = read_le<double>(in, "resolution");
  if (!(resolution > 0.0)) {
    throw FormatError("map file has non-positive resolution");
  }
  const uint64_t count = read_le<uint64_t>(in, "voxel count");

  VoxelMap map(resolution);
  map.voxels_.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    VoxelKey key;
    key.x = read_le<int32_t>(in, "voxel key");
    key.y = read_le<int32_t>(in, "voxel key");
    key.z = read_le<int32_t>(in, "voxel key");
    VoxelStats s;
    s.n_points = read_le<uint32_t>(in, "n_points");
    for (int a = 0; a < 3; ++a) s.sum[a] = read_le<double>(in, "sum");
    const double xx = read_le<double>(in, "second moment");
    const double xy = read_le<double>(in, "second moment");
    const double yy = read_le<double>(in, "second moment");
    const double xz = read_le<double>(in, "second moment");
    const double yz = read_le<double>(in, "second moment");
    const double zz = read_le<double>(in, "second moment");
    s.second_moment << xx, xy, xz, xy, yy, yz, xz, yz, zz;
    s.occ_rebase = read_le<float>(in, "log odds");
    const double intensity_mean = read_le<float>(in, "intensity mean");
    const double intensity_var = read_le<float>(in, "intensity variance");
    s.intensity_mean = intensity_mean;
    s.intensity_m2 =
        s.n_points >= 2 ? intensity_var * (s.n_points - 1) : 0.0;
    s.n_hit = read_le<uint32_t>(in, "n_hit");
    s.n_miss = read_le<uint32_t>(in, "n_miss");
    s.n_multi_return = read_le<uint32_t>(in, "n_multi_return");
    map.voxels_.emplace(key, s);
  }
  return map;
}

}  // namespace foresttrav
