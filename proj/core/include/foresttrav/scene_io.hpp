#pragma once

#include <string>
#include <vector>

#include "foresttrav/sim.hpp"

namespace foresttrav {

// Scene snapshot, magic "FTSC". Deterministic byte layout: heightfield grid
// followed by elements in order.
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

// Ray log, magic "FTRL": the records a mapping run replays.
void save_ray_log(const std::vector<RayRecord>& rays, const std::string& path);
std::vector<RayRecord> load_ray_log(const std::string& path);

}  // namespace foresttrav
