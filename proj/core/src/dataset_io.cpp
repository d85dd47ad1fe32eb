#include "foresttrav/dataset_io.hpp"

#include <fstream>

#include <json.hpp>

#include "foresttrav/error.hpp"
#include "foresttrav/io_util.hpp"

namespace foresttrav {

namespace {

constexpr char kDatasetMagic[4] = {'F', 'T', 'D', 'S'};
constexpr uint16_t kDatasetVersion = 1;

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open dataset file for writing: " + path);
  write_magic(out, kDatasetMagic);
  write_le(out, kDatasetVersion);
  for (float m : dataset.stats.mean) write_le(out, m);
  for (float s : dataset.stats.stddev) write_le(out, s);
  write_le(out, static_cast<uint32_t>(dataset.cubes.size()));
  for (const CubeSample& cube : dataset.cubes) {
    write_le(out, cube.origin.x);
    write_le(out, cube.origin.y);
    write_le(out, cube.origin.z);
    write_le(out, static_cast<uint16_t>(cube.size()));
    for (std::size_t s = 0; s < cube.size(); ++s) {
      out.write(reinterpret_cast<const char*>(cube.coords[s].data()), 3);
      for (float f : cube.features[s]) write_le(out, f);
      write_le(out, static_cast<int8_t>(cube.labels[s]));
    }
  }
  if (!out) throw FormatError("write failed for dataset file: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file: " + path);
  expect_magic(in, kDatasetMagic, "dataset file");
  expect_version(in, kDatasetVersion, "dataset file");

  Dataset dataset;
  for (float& m : dataset.stats.mean) m = read_le<float>(in, "feature mean");
  for (float& s : dataset.stats.stddev) {
    s = read_le<float>(in, "feature stddev");
  }
  const auto cube_count = read_le<uint32_t>(in, "cube count");
  dataset.cubes.resize(cube_count);
  for (CubeSample& cube : dataset.cubes) {
    cube.origin.x = read_le<int32_t>(in, "cube origin");
    cube.origin.y = read_le<int32_t>(in, "cube origin");
    cube.origin.z = read_le<int32_t>(in, "cube origin");
    const auto sites = read_le<uint16_t>(in, "cube site count");
    cube.coords.resize(sites);
    cube.features.resize(sites);
    cube.labels.resize(sites);
    for (uint16_t s = 0; s < sites; ++s) {
      for (int a = 0; a < 3; ++a) {
        const auto c = read_le<uint8_t>(in, "site coordinate");
        if (c >= kCubeSize) {
          throw FormatError("site coordinate " + std::to_string(c) +
                            " outside the cube in " + path);
        }
        cube.coords[s][a] = c;
      }
      for (float& f : cube.features[s]) f = read_le<float>(in, "site feature");
      const auto label = read_le<int8_t>(in, "site label");
      if (label != 0 && label != 1 && label != -1) {
        throw FormatError("invalid site label " + std::to_string(label) +
                          " in " + path);
      }
      cube.labels[s] = static_cast<TravLabel>(label);
    }
  }
  return dataset;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  if (manifest.scene_ids.size() != manifest.cube_counts.size()) {
    throw std::invalid_argument("manifest scene ids and counts disagree");
  }
  nlohmann::json doc;
  doc["scenes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < manifest.scene_ids.size(); ++i) {
    doc["scenes"].push_back({{"id", manifest.scene_ids[i]},
                             {"cubes", manifest.cube_counts[i]}});
  }
  doc["test_scene"] = manifest.test_scene;
  doc["folds"] = manifest.folds;

  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot open manifest file for writing: " + path);
  }
  out << doc.dump(2) << '\n';
  if (!out) throw FormatError("write failed for manifest file: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path + ": " + e.what());
  }
  DatasetManifest manifest;
  try {
    for (const auto& scene : doc.at("scenes")) {
      manifest.scene_ids.push_back(scene.at("id").get<std::string>());
      manifest.cube_counts.push_back(scene.at("cubes").get<std::uint32_t>());
    }
    manifest.test_scene = doc.at("test_scene").get<std::string>();
    manifest.folds =
        doc.at("folds").get<std::vector<std::vector<std::uint32_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path + ": " + e.what());
  }
  return manifest;
}

}  // namespace foresttrav
