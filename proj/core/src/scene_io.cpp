#include "foresttrav/scene_io.hpp"

#include <fstream>

#include "foresttrav/io_util.hpp"

namespace foresttrav {

namespace {

constexpr char kSceneMagic[4] = {'F', 'T', 'S', 'C'};
constexpr char kRayMagic[4] = {'F', 'T', 'R', 'L'};
constexpr uint16_t kVersion = 1;

void write_vec3(std::ostream& out, const Vec3& v) {
  write_le(out, v.x());
  write_le(out, v.y());
  write_le(out, v.z());
}

Vec3 read_vec3(std::istream& in, const char* field) {
  Vec3 v;
  v.x() = read_le<double>(in, field);
  v.y() = read_le<double>(in, field);
  v.z() = read_le<double>(in, field);
  return v;
}

void write_pose(std::ostream& out, const Pose& pose) {
  write_vec3(out, pose.position);
  write_le(out, pose.orientation.w());
  write_le(out, pose.orientation.x());
  write_le(out, pose.orientation.y());
  write_le(out, pose.orientation.z());
}

Pose read_pose(std::istream& in, const char* field) {
  Pose pose;
  pose.position = read_vec3(in, field);
  pose.orientation.w() = read_le<double>(in, field);
  pose.orientation.x() = read_le<double>(in, field);
  pose.orientation.y() = read_le<double>(in, field);
  pose.orientation.z() = read_le<double>(in, field);
  return pose;
}

}  // namespace

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_magic(out, kSceneMagic);
  write_le(out, kVersion);
  write_le(out, scene.extent_x);
  write_le(out, scene.extent_y);
  write_le(out, scene.ground.x0);
  write_le(out, scene.ground.y0);
  write_le(out, scene.ground.cell);
  write_le(out, static_cast<uint32_t>(scene.ground.nx));
  write_le(out, static_cast<uint32_t>(scene.ground.ny));
  for (const double z : scene.ground.z) write_le(out, z);
  write_le(out, scene.ground_intensity.mean);
  write_le(out, scene.ground_intensity.std);
  write_le(out, static_cast<uint32_t>(scene.elements.size()));
  for (const auto& e : scene.elements) {
    write_le(out, static_cast<uint8_t>(e.shape));
    write_pose(out, e.pose);
    write_vec3(out, e.dimensions);
    write_le(out, static_cast<int8_t>(e.tau));
    write_le(out, e.p_pass);
    write_le(out, e.intensity_mean);
    write_le(out, e.intensity_std);
    write_le(out, static_cast<uint8_t>(e.thin ? 1 : 0));
  }
  if (!out) throw DataError("failed writing " + path);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  expect_magic(in, kSceneMagic, "scene file");
  expect_version(in, kVersion, "scene file");
  Scene scene;
  scene.extent_x = read_le<double>(in, "extent_x");
  scene.extent_y = read_le<double>(in, "extent_y");
  scene.ground.x0 = read_le<double>(in, "heightfield x0");
  scene.ground.y0 = read_le<double>(in, "heightfield y0");
  scene.ground.cell = read_le<double>(in, "heightfield cell");
  scene.ground.nx = static_cast<int>(read_le<uint32_t>(in, "heightfield nx"));
  scene.ground.ny = static_cast<int>(read_le<uint32_t>(in, "heightfield ny"));
  if (scene.ground.nx < 2 || scene.ground.ny < 2) {
    throw FormatError("scene heightfield grid must be at least 2x2");
  }
  scene.ground.z.resize(static_cast<size_t>(scene.ground.nx) *
                        scene.ground.ny);
  for (double& z : scene.ground.z) z = read_le<double>(in, "heightfield z");
  scene.ground_intensity.mean = read_le<double>(in, "ground intensity mean");
  scene.ground_intensity.std = read_le<double>(in, "ground intensity std");
  const auto count = read_le<uint32_t>(in, "element count");
  scene.elements.resize(count);
  for (auto& e : scene.elements) {
    const auto shape = read_le<uint8_t>(in, "element shape");
    if (shape > static_cast<uint8_t>(ElementShape::kBox)) {
      throw FormatError("unknown element shape " + std::to_string(shape));
    }
    e.shape = static_cast<ElementShape>(shape);
    e.pose = read_pose(in, "element pose");
    e.dimensions = read_vec3(in, "element dimensions");
    const auto tau = read_le<int8_t>(in, "element label");
    e.tau = static_cast<TravLabel>(tau);
    e.p_pass = read_le<double>(in, "element p_pass");
    e.intensity_mean = read_le<double>(in, "element intensity mean");
    e.intensity_std = read_le<double>(in, "element intensity std");
    e.thin = read_le<uint8_t>(in, "element thin flag") != 0;
  }
  return scene;
}

void save_ray_log(const std::vector<RayRecord>& rays,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_magic(out, kRayMagic);
  write_le(out, kVersion);
  write_le(out, static_cast<uint64_t>(rays.size()));
  for (const auto& r : rays) {
    write_le(out, r.t);
    write_vec3(out, r.origin);
    write_vec3(out, r.endpoint);
    write_le(out, static_cast<float>(r.intensity));
    write_le(out, r.return_number);
    write_le(out, r.num_returns);
  }
  if (!out) throw DataError("failed writing " + path);
}

std::vector<RayRecord> load_ray_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  expect_magic(in, kRayMagic, "ray log");
  expect_version(in, kVersion, "ray log");
  const auto count = read_le<uint64_t>(in, "ray count");
  std::vector<RayRecord> rays;
  rays.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    RayRecord r;
    r.t = read_le<double>(in, "ray t");
    r.origin = read_vec3(in, "ray origin");
    r.endpoint = read_vec3(in, "ray endpoint");
    r.intensity = read_le<float>(in, "ray intensity");
    r.return_number = read_le<uint8_t>(in, "return number");
    r.num_returns = read_le<uint8_t>(in, "num returns");
    if (r.return_number < 1 || r.num_returns < r.return_number ||
        r.num_returns > 2) {
      throw FormatError("ray record " + std::to_string(i) +
                        " has invalid return numbering");
    }
    rays.push_back(r);
  }
  return rays;
}

}  // namespace foresttrav
