#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foresttrav/config_file.hpp"

namespace foresttrav::cli {

// Global flags shared by every subcommand; set flags override config keys.
struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double resolution = 0.1;
  bool resolution_set = false;
  int threads = 1;
  bool threads_set = false;
  bool single_thread = false;
};

// Loads the config file (when given), overlays the flags, and validates the
// shared keys. Unknown keys are rejected by name so typos cannot silently
// fall back to defaults.
ConfigFile effective_config(const GlobalOptions& global);

struct DatasetArgs {
  std::vector<std::string> scenes;
  std::vector<std::string> maps;
  std::vector<std::string> labels;
  std::string test_scene;
  int folds = 0;  // 0: take from config
  std::string out_dir;
};

struct TrainArgs {
  std::string dataset_path;
  std::string manifest_path;
  int fold = 0;
  std::string model_out;
  std::string log_out;
};

struct InferArgs {
  std::vector<std::string> model_paths;
  std::string map_path;
  std::string center;  // "x,y,z"; empty = whole map
  std::string extent;  // "dx,dy,dz"; empty = config / 10x10x2 default
  std::string te_out;
  std::string ply_out;  // optional
};

struct EvalArgs {
  std::string mode;  // global | density | temporal | compress2d
  std::string te_path;
  std::string labels_path;
  std::string rays_path;
  std::vector<std::string> model_paths;
  std::string out_path;
  std::string pgm_out;  // compress2d only, optional
};

int run_sim(const ConfigFile& cfg, const std::string& out_dir);
int run_map(const ConfigFile& cfg, const std::string& rays_path,
            const std::string& out_path);
int run_label(const ConfigFile& cfg, const std::string& map_path,
              const std::string& hand_path, const std::string& events_path,
              const std::string& out_path);
int run_dataset(const ConfigFile& cfg, const DatasetArgs& args);
int run_train(const ConfigFile& cfg, const TrainArgs& args);
int run_infer(const ConfigFile& cfg, const InferArgs& args);
int run_eval(const ConfigFile& cfg, const EvalArgs& args);

}  // namespace foresttrav::cli
