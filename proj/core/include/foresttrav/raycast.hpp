#pragma once

#include <functional>
#include <vector>

#include "foresttrav/types.hpp"

namespace foresttrav {

// Ordered cells pierced by the segment [origin, endpoint], first cell contains
// the origin, last contains the endpoint. Cells are half-open boxes
// [k*res, (k+1)*res). Throws std::invalid_argument on segments shorter than
// 1e-12 m.
std::vector<VoxelKey> raycast_cells(const Vec3& origin, const Vec3& endpoint,
                                    double resolution);

// Traversal with the segment parameter interval [t_entry, t_exit] (t in
// [0, 1]) each cell occupies. When the segment crosses a cell corner or edge
// exactly, all tied axes advance together, so corner-touching cells that the
// segment only grazes with zero length are not visited.
void raycast_intervals(
    const Vec3& origin, const Vec3& endpoint, double resolution,
    const std::function<void(const VoxelKey&, double t_entry, double t_exit)>&
        visit);

}  // namespace foresttrav
