#pragma once

#include <string>
#include <vector>

#include "foresttrav/sim.hpp"

namespace foresttrav {

struct MissionConfig {
  double speed = 0.5;             // m/s forward
  double dt = 0.05;               // control step, s
  double turn_rate = 1.5;         // rad/s in place
  double tr_event_period = 0.5;   // s of free travel between TR pose events
  double waypoint_tolerance = 0.3;
  double backoff = 0.3;           // m reversed after a collision
  double detour_leg = 1.2;        // m of sideways travel per detour
  double punch_distance = 3.0;    // m driven straight once a corridor opens
  double waypoint_budget = 90.0;  // s per waypoint before giving up

  static MissionConfig from_config(const ConfigFile& cfg);
  void validate() const;
};

struct MissionResult {
  std::vector<RayRecord> rays;
  std::vector<PoseEvent> events;  // TR cruise poses and NT collision poses
  std::vector<std::string> warnings;
  double duration = 0.0;
};

// Drives the robot through the waypoints (x, y; z snaps to the terrain) at
// fixed speed, scanning at the lidar rate. A front-slab contact with a
// non-traversable element logs a collision event and starts an engagement:
// the robot backs off and detours perpendicular to the first blocked heading
// with alternating, growing legs, probing that heading as it goes; once the
// corridor opens it punches straight through before resuming target seek.
// Waypoints that stay unreachable within the budget produce a warning and
// are skipped.
MissionResult simulate_mission(const Scene& scene,
                               const std::vector<Vec3>& waypoints,
                               const RobotGeometry& geom,
                               const LidarSpec& spec,
                               const MissionConfig& cfg, std::uint64_t seed);

// True when the front collision slab at `pose` touches a non-traversable
// element. Exposed for tests.
bool front_slab_blocked(const Scene& scene, const Pose& pose,
                        const RobotGeometry& geom);

}  // namespace foresttrav
