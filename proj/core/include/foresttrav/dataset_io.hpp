#pragma once

#include <string>
#include <vector>

#include "foresttrav/dataset.hpp"

namespace foresttrav {

struct Dataset {
  NormalizationStats stats;
  std::vector<CubeSample> cubes;
};

// Binary cube archive, magic "FTDS". Round trips are bit-exact.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Cross-validation manifest as JSON.
void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

}  // namespace foresttrav
