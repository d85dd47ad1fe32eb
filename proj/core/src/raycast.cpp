#include "foresttrav/raycast.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <stdexcept>

namespace foresttrav {

void raycast_intervals(
    const Vec3& origin, const Vec3& endpoint, double resolution,
    const std::function<void(const VoxelKey&, double, double)>& visit) {
  const Vec3 dir = endpoint - origin;
  if (dir.norm() < 1e-12) {
    throw std::invalid_argument("raycast: degenerate segment (length < 1e-12 m)");
  }
  if (resolution <= 0.0) {
    throw std::invalid_argument("raycast: resolution must be positive");
  }

  int32_t cur[3];
  int32_t last[3];
  int32_t step[3];
  double t_max[3];
  double t_delta[3];
  {
    const VoxelKey k0 = point_to_key(origin, resolution);
    const VoxelKey k1 = point_to_key(endpoint, resolution);
    cur[0] = k0.x; cur[1] = k0.y; cur[2] = k0.z;
    last[0] = k1.x; last[1] = k1.y; last[2] = k1.z;
  }

  for (int i = 0; i < 3; ++i) {
    if (dir[i] > 0.0) {
      step[i] = 1;
      const double boundary = (cur[i] + 1) * resolution;
      t_max[i] = (boundary - origin[i]) / dir[i];
      t_delta[i] = resolution / dir[i];
    } else if (dir[i] < 0.0) {
      step[i] = -1;
      const double boundary = cur[i] * resolution;
      t_max[i] = (boundary - origin[i]) / dir[i];
      t_delta[i] = resolution / -dir[i];
    } else {
      step[i] = 0;
      t_max[i] = std::numeric_limits<double>::infinity();
      t_delta[i] = std::numeric_limits<double>::infinity();
    }
  }

  // Bound on boundary crossings between start and end cell.
  int64_t remaining = 3;
  for (int i = 0; i < 3; ++i) remaining += std::abs(int64_t(last[i]) - cur[i]);

  double t_prev = 0.0;
  while (true) {
    if (cur[0] == last[0] && cur[1] == last[1] && cur[2] == last[2]) {
      visit(VoxelKey{cur[0], cur[1], cur[2]}, t_prev, 1.0);
      return;
    }
    assert(remaining-- > 0 && "raycast failed to reach the endpoint cell");
    if (remaining < 0) {  // release-build safety net
      visit(VoxelKey{last[0], last[1], last[2]}, t_prev, 1.0);
      return;
    }
    const double t_next = std::min({t_max[0], t_max[1], t_max[2]});
    const double t_exit = std::clamp(t_next, t_prev, 1.0);
    visit(VoxelKey{cur[0], cur[1], cur[2]}, t_prev, t_exit);
    // Advance every axis whose boundary is crossed at t_next. Exact corner
    // and edge crossings produce bit-equal t_max values and step together.
    for (int i = 0; i < 3; ++i) {
      if (t_max[i] == t_next) {
        cur[i] += step[i];
        t_max[i] += t_delta[i];
      }
    }
    t_prev = t_exit;
  }
}

std::vector<VoxelKey> raycast_cells(const Vec3& origin, const Vec3& endpoint,
                                    double resolution) {
  std::vector<VoxelKey> cells;
  raycast_intervals(origin, endpoint, resolution,
                    [&cells](const VoxelKey& k, double, double) {
                      cells.push_back(k);
                    });
  return cells;
}

}  // namespace foresttrav
