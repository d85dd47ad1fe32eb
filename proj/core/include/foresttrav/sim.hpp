#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "foresttrav/collision_layer.hpp"
#include "foresttrav/config_file.hpp"
#include "foresttrav/rng.hpp"
#include "foresttrav/types.hpp"

namespace foresttrav {

// Continuous terrain surface, bilinear between grid samples. Queries
// outside the grid clamp to the border.
struct Heightfield {
  double x0 = 0.0;
  double y0 = 0.0;
  double cell = 0.5;
  int nx = 2;
  int ny = 2;
  std::vector<double> z;  // row-major, nx * ny

  double height(double x, double y) const;
  double max_height() const;
};

enum class ElementShape : std::uint8_t {
  kCylinder = 0,      // trunk: vertical, position = base center
  kCapsule = 1,       // branch: segment from position along axis, radius
  kBladeCluster = 2,  // grass: vertical cylinder volume
  kBox = 3,           // rigid obstacle, base-centred like the robot box
};

struct SceneElement {
  ElementShape shape = ElementShape::kCylinder;
  Pose pose;
  // cylinder/blade: (radius, -, height); capsule: (length, radius, -);
  // box: full extents (lx, ly, lz).
  Vec3 dimensions = Vec3::Zero();
  TravLabel tau = TravLabel::kNonTraversable;
  double p_pass = 0.0;
  double intensity_mean = 100.0;
  double intensity_std = 10.0;
  bool thin = false;  // thin elements may split a passing beam in two
};

struct IntensityProfile {
  double mean = 100.0;
  double std = 10.0;
};

struct Scene {
  double extent_x = 8.0;
  double extent_y = 8.0;
  Heightfield ground;
  IntensityProfile ground_intensity;
  std::vector<SceneElement> elements;
};

struct SceneConfig {
  double extent_x = 8.0;
  double extent_y = 8.0;
  double trunk_density = 0.15;   // elements per m^2
  double branch_density = 0.4;
  double box_density = 0.02;
  double grass_density = 0.5;    // used when target_density is unset
  double target_density = 0.0;   // >0: calibrate grass so mean rho_V matches
  double terrain_amplitude = 0.15;
  double resolution = 0.1;       // voxel size for calibration and labels
  double branch_nt_fraction = 0.5;

  static SceneConfig from_config(const ConfigFile& cfg);
  void validate() const;  // throws ConfigError
};

// Deterministic scene synthesis. When target_density is set the grass
// cluster count is calibrated so the ground-truth mean vegetation density
// lands within +-0.05 of it (prefix-nested placement keeps the search
// monotone).
Scene generate_scene(const SceneConfig& config, std::uint64_t seed);

// Oracle occupancy labels: a voxel touching any non-traversable element is
// NT; voxels touching only traversable elements or the ground surface are
// TR; everything else is omitted.
LabeledVoxelCloud ground_truth_voxelize(const Scene& scene, double resolution);

// Mean per-column vegetation density of the oracle voxelization.
double measured_mean_density(const Scene& scene, double resolution);

struct LidarSpec {
  int rings = 16;
  double min_elevation_deg = -15.0;
  double max_elevation_deg = 15.0;
  int azimuth_steps = 180;
  double max_range = 20.0;
  double range_noise = 0.01;    // sigma_r, m
  double scan_period = 0.2;     // s between scans in a mission
  double sensor_height = 0.7;   // mount height above the robot base, m

  static LidarSpec from_config(const ConfigFile& cfg);
  void validate() const;
};

struct RayRecord {
  double t = 0.0;
  Vec3 origin = Vec3::Zero();
  Vec3 endpoint = Vec3::Zero();
  double intensity = 0.0;
  std::uint8_t return_number = 1;
  std::uint8_t num_returns = 1;
};

// First surface parameter along origin + t * dir (unit length) within
// (near, max_range], if the beam meets the element at all.
std::optional<double> ray_element_entry(const SceneElement& element,
                                        const Vec3& origin, const Vec3& dir,
                                        double max_range);

// Walks one beam through the scene: solid surfaces return, permeable
// elements pass with probability p_pass, and a passing beam may split at a
// thin element into first/second returns (capped at two).
void trace_beam(const Scene& scene, double t, const Vec3& origin,
                const Vec3& dir, const LidarSpec& spec, Rng& rng,
                std::vector<RayRecord>& out);

// One full sweep over the spec's angular pattern from the sensor pose.
std::vector<RayRecord> simulate_scan(const Scene& scene,
                                     const Pose& sensor_pose,
                                     const LidarSpec& spec,
                                     std::uint64_t seed);

// Sweep variant for callers that own the clock and the random stream.
void simulate_scan(const Scene& scene, const Pose& sensor_pose,
                   const LidarSpec& spec, double t, Rng& rng,
                   std::vector<RayRecord>& out);

}  // namespace foresttrav
