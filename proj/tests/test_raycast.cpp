#include "foresttrav/raycast.hpp"

#include <doctest.h>

#include "foresttrav/rng.hpp"
#include "support/oracles.hpp"

using namespace foresttrav;

TEST_CASE("axis-aligned segment crosses ten cells") {
  const auto cells =
      raycast_cells(Vec3(0.05, 0.05, 0.05), Vec3(0.95, 0.05, 0.05), 0.1);
  REQUIRE(cells.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(cells[i] == VoxelKey{i, 0, 0});
  }
}

TEST_CASE("reversed segment yields the reversed cell list") {
  const Vec3 a(0.05, 0.05, 0.05), b(0.95, 0.05, 0.05);
  auto forward = raycast_cells(a, b, 0.1);
  const auto backward = raycast_cells(b, a, 0.1);
  std::reverse(forward.begin(), forward.end());
  CHECK(forward == backward);
}

TEST_CASE("diagonal through exact cell corners skips edge-adjacent cells") {
  const Vec3 a(0.05, 0.05, 0.05), b(0.25, 0.25, 0.05);
  const auto cells = raycast_cells(a, b, 0.1);
  const auto expected = testing::sampled_ray_cells(a, b, 0.1);
  CHECK(cells == expected);
  REQUIRE(cells.size() == 3);
  CHECK(cells[0] == VoxelKey{0, 0, 0});
  CHECK(cells[1] == VoxelKey{1, 1, 0});
  CHECK(cells[2] == VoxelKey{2, 2, 0});
}

TEST_CASE("degenerate segment is rejected") {
  CHECK_THROWS_AS(raycast_cells(Vec3(0.1, 0.2, 0.3), Vec3(0.1, 0.2, 0.3), 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(raycast_cells(Vec3::Zero(), Vec3(1, 0, 0), 0.0),
                  std::invalid_argument);
}

TEST_CASE("random segments match the dense sampling oracle") {
  Rng rng(20240811);
  for (int trial = 0; trial < 300; ++trial) {
    const Vec3 a(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                 rng.uniform(-1.0, 1.0));
    const Vec3 b(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                 rng.uniform(-1.0, 1.0));
    if ((b - a).norm() < 1e-6) continue;
    const auto cells = raycast_cells(a, b, 0.1);
    const auto expected = testing::sampled_ray_cells(a, b, 0.1);
    REQUIRE(cells == expected);
    CHECK(cells.front() == point_to_key(a, 0.1));
    CHECK(cells.back() == point_to_key(b, 0.1));
  }
}

TEST_CASE("interval parameters tile the segment") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 a(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 b(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if ((b - a).norm() < 1e-6) continue;
    double expected_entry = 0.0;
    raycast_intervals(a, b, 0.1,
                      [&](const VoxelKey& k, double t0, double t1) {
                        CHECK(t0 == doctest::Approx(expected_entry).epsilon(1e-12));
                        CHECK(t1 >= t0);
                        // The cell midpoint parameter must land inside the cell.
                        if (t1 > t0) {
                          const Vec3 mid = a + 0.5 * (t0 + t1) * (b - a);
                          CHECK(point_to_key(mid, 0.1) == k);
                        }
                        expected_entry = t1;
                      });
    CHECK(expected_entry == doctest::Approx(1.0));
  }
}
