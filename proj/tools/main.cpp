#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "foresttrav/error.hpp"

namespace {

// 0 = success, 1 = usage error, 2 = data/format error.
constexpr int kUsageError = 1;
constexpr int kDataError = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace foresttrav;

  cli::GlobalOptions global;
  cli::DatasetArgs dataset_args;
  cli::TrainArgs train_args;
  cli::InferArgs infer_args;
  cli::EvalArgs eval_args;

  std::string sim_out = "sim_out";
  std::string map_rays, map_out = "map.ftvm";
  std::string label_map, label_hand, label_events, label_out = "labels.csv";

  CLI::App app{"Forest traversability pipeline: simulate, map, label, build "
               "datasets, train, infer, and evaluate."};
  app.require_subcommand(1);
  app.fallthrough();

  auto* config_opt =
      app.add_option("--config", global.config_path,
                     "key = value configuration file applied to all stages");
  (void)config_opt;
  auto* seed_opt = app.add_option("--seed", global.seed,
                                  "random seed (overrides config)");
  auto* resolution_opt = app.add_option(
      "--resolution", global.resolution, "voxel edge length in meters");
  auto* threads_opt =
      app.add_option("--threads", global.threads, "worker thread cap");
  app.add_flag("--single-thread", global.single_thread,
               "force one worker for bit-reproducible runs");

  CLI::App* sim = app.add_subcommand(
      "sim", "generate a scene and fly a scanning mission through it");
  sim->fallthrough();
  sim->add_option("--out", sim_out, "output directory")->capture_default_str();

  CLI::App* map_cmd =
      app.add_subcommand("map", "fuse a ray log into a probabilistic voxel map");
  map_cmd->fallthrough();
  map_cmd->add_option("--rays", map_rays, "ray log (FTRL)")->required();
  map_cmd->add_option("--out", map_out, "map file to write")
      ->capture_default_str();

  CLI::App* label = app.add_subcommand(
      "label", "fuse hand labels and mission experience over a map");
  label->fallthrough();
  label->add_option("--map", label_map, "voxel map (FTVM)")->required();
  label->add_option("--hand", label_hand, "hand label CSV (optional)");
  label->add_option("--events", label_events, "pose event log (FTEV, optional)");
  label->add_option("--out", label_out, "label CSV to write")
      ->capture_default_str();

  CLI::App* dataset = app.add_subcommand(
      "dataset", "cut labeled maps into training cubes with k-fold splits");
  dataset->fallthrough();
  dataset->add_option("--scene", dataset_args.scenes, "scene id (repeatable)")
      ->required();
  dataset->add_option("--map", dataset_args.maps,
                      "voxel map per scene (repeatable)")
      ->required();
  dataset->add_option("--labels", dataset_args.labels,
                      "label CSV per scene (repeatable)")
      ->required();
  dataset->add_option("--test-scene", dataset_args.test_scene,
                      "scene held out of every fold")
      ->required();
  dataset->add_option("--folds", dataset_args.folds,
                      "fold count (default: config 'folds' or 5)");
  dataset->add_option("--out", dataset_args.out_dir, "output directory")
      ->required();

  CLI::App* train =
      app.add_subcommand("train", "train one network on a dataset fold");
  train->fallthrough();
  train->add_option("--dataset", train_args.dataset_path, "cube archive (FTDS)")
      ->required();
  train->add_option("--manifest", train_args.manifest_path,
                    "fold manifest JSON")
      ->required();
  train->add_option("--fold", train_args.fold, "validation fold index")
      ->required();
  train->add_option("--model-out", train_args.model_out, "model file to write")
      ->required();
  train->add_option("--log-out", train_args.log_out,
                    "training log CSV (default: <model-out>.log.csv)");

  CLI::App* infer = app.add_subcommand(
      "infer", "score a map with a model ensemble into a probability layer");
  infer->fallthrough();
  infer->add_option("--model", infer_args.model_paths,
                    "model file (repeat for an ensemble)")
      ->required();
  infer->add_option("--map", infer_args.map_path, "voxel map (FTVM)")
      ->required();
  infer->add_option("--center", infer_args.center,
                    "local window center 'x,y,z' (default: whole map)");
  infer->add_option("--extent", infer_args.extent,
                    "local window size 'dx,dy,dz' (default: 10,10,2)");
  infer->add_option("--out", infer_args.te_out, "probability CSV to write")
      ->required();
  infer->add_option("--ply", infer_args.ply_out,
                    "optional colored point cloud (PLY)");

  CLI::App* eval =
      app.add_subcommand("eval", "score predictions against reference labels");
  eval->fallthrough();
  eval->add_option("--mode", eval_args.mode,
                   "global | density | temporal | compress2d")
      ->required();
  eval->add_option("--te", eval_args.te_path, "probability CSV from 'infer'");
  eval->add_option("--labels", eval_args.labels_path, "reference label CSV");
  eval->add_option("--rays", eval_args.rays_path,
                   "ray log (temporal mode only)");
  eval->add_option("--model", eval_args.model_paths,
                   "model file (temporal mode, repeatable)");
  eval->add_option("--out", eval_args.out_path, "report CSV to write")
      ->required();
  eval->add_option("--pgm", eval_args.pgm_out,
                   "optional occupancy image (compress2d mode)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  global.seed_set = seed_opt->count() > 0;
  global.resolution_set = resolution_opt->count() > 0;
  global.threads_set = threads_opt->count() > 0;

  try {
    const ConfigFile cfg = cli::effective_config(global);
    if (sim->parsed()) return cli::run_sim(cfg, sim_out);
    if (map_cmd->parsed()) return cli::run_map(cfg, map_rays, map_out);
    if (label->parsed()) {
      return cli::run_label(cfg, label_map, label_hand, label_events,
                            label_out);
    }
    if (dataset->parsed()) return cli::run_dataset(cfg, dataset_args);
    if (train->parsed()) return cli::run_train(cfg, train_args);
    if (infer->parsed()) return cli::run_infer(cfg, infer_args);
    if (eval->parsed()) return cli::run_eval(cfg, eval_args);
    std::cerr << "error: no subcommand selected\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
}
