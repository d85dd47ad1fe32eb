#include "commands.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "foresttrav/collision_layer.hpp"
#include "foresttrav/dataset.hpp"
#include "foresttrav/dataset_io.hpp"
#include "foresttrav/error.hpp"
#include "foresttrav/eval.hpp"
#include "foresttrav/eval_io.hpp"
#include "foresttrav/label_io.hpp"
#include "foresttrav/map_io.hpp"
#include "foresttrav/mission.hpp"
#include "foresttrav/model_io.hpp"
#include "foresttrav/scene_io.hpp"
#include "foresttrav/sim.hpp"
#include "foresttrav/temporal.hpp"
#include "foresttrav/unet.hpp"
#include "foresttrav/voxel_map.hpp"

namespace foresttrav::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Every key any subcommand reads; config typos fail loudly instead of
// silently falling back to a default.
const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // scene
      "extent_x", "extent_y", "trunk_density", "branch_density", "box_density",
      "grass_density", "target_density", "terrain_amplitude", "resolution",
      "branch_nt_fraction",
      // lidar
      "lidar_rings", "lidar_min_elevation_deg", "lidar_max_elevation_deg",
      "lidar_azimuth_steps", "lidar_max_range", "lidar_range_noise",
      "lidar_scan_period", "lidar_sensor_height",
      // mission
      "mission_speed", "mission_dt", "mission_turn_rate",
      "mission_tr_event_period", "mission_waypoint_tolerance",
      "mission_backoff", "mission_detour_leg", "mission_punch_distance",
      "mission_waypoint_budget", "mission_waypoints",
      // robot body
      "robot_length", "robot_width", "robot_height", "robot_d_ext",
      // shared
      "seed", "threads", "folds", "min_cube_sites",
      // training
      "train_lr", "train_weight_decay", "train_batch_size", "train_patience",
      "train_max_epochs",
      // inference window
      "infer_extent_x", "infer_extent_y", "infer_extent_z",
      // evaluation
      "temporal_dt", "density_bins", "compress_threshold"};
  return keys;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

RobotGeometry robot_from_config(const ConfigFile& cfg) {
  RobotGeometry geom;
  geom.length = cfg.get_double("robot_length", geom.length);
  geom.width = cfg.get_double("robot_width", geom.width);
  geom.height = cfg.get_double("robot_height", geom.height);
  geom.d_ext = cfg.get_double("robot_d_ext", geom.d_ext);
  if (geom.length <= 0.0 || geom.width <= 0.0 || geom.height <= 0.0 ||
      geom.d_ext <= 0.0) {
    throw ConfigError("robot dimensions must be positive");
  }
  return geom;
}

Vec3 parse_triplet(const std::string& text, const char* what) {
  std::stringstream ss(text);
  std::string field;
  std::vector<double> values;
  while (std::getline(ss, field, ',')) {
    try {
      values.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": unreadable number in '" + text +
                        "'");
    }
  }
  if (values.size() != 3) {
    throw ConfigError(std::string(what) + ": expected 'x,y,z', got '" + text +
                      "'");
  }
  return Vec3(values[0], values[1], values[2]);
}

// "x1,y1; x2,y2; ..." -> waypoint list (z snaps to the terrain later).
std::vector<Vec3> parse_waypoints(const std::string& text) {
  std::vector<Vec3> waypoints;
  std::stringstream ss(text);
  std::string pair;
  while (std::getline(ss, pair, ';')) {
    if (pair.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream ps(pair);
    std::string field;
    std::vector<double> values;
    while (std::getline(ps, field, ',')) {
      try {
        values.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw ConfigError("mission_waypoints: unreadable number in '" + pair +
                          "'");
      }
    }
    if (values.size() != 2) {
      throw ConfigError("mission_waypoints: expected 'x,y' pairs, got '" +
                        pair + "'");
    }
    waypoints.push_back(Vec3(values[0], values[1], 0.0));
  }
  if (waypoints.empty()) {
    throw ConfigError("mission_waypoints: no waypoints given");
  }
  return waypoints;
}

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

LabelMap to_label_map(const std::vector<LabeledVoxel>& voxels) {
  LabelMap out;
  out.reserve(voxels.size());
  for (const LabeledVoxel& v : voxels) {
    if (v.label != TravLabel::kUnlabeled) out[v.key] = v.label;
  }
  return out;
}

LabelMap classify_estimates(const ProbabilityMap& probabilities) {
  LabelMap out;
  out.reserve(probabilities.size());
  for (const auto& [key, p] : probabilities) {
    out[key] = p > 0.5f ? TravLabel::kTraversable : TravLabel::kNonTraversable;
  }
  return out;
}

std::vector<VoxelKey> sorted_keys(const ProbabilityMap& probabilities) {
  std::vector<VoxelKey> keys;
  keys.reserve(probabilities.size());
  for (const auto& [key, p] : probabilities) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::vector<UNetModel> load_models(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("at least one --model is required");
  std::vector<UNetModel> models;
  models.reserve(paths.size());
  for (const std::string& path : paths) models.push_back(load_model(path));
  return models;
}

void echo_config(const ConfigFile& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& [key, value] : cfg.values()) {
    out << key << " = " << value << "\n";
  }
}

}  // namespace

ConfigFile effective_config(const GlobalOptions& global) {
  ConfigFile cfg;
  if (!global.config_path.empty()) {
    cfg = ConfigFile::parse_file(global.config_path);
  }
  for (const auto& [key, value] : cfg.values()) {
    if (known_keys().count(key) == 0) {
      throw ConfigError("unknown config key: " + key);
    }
  }
  if (global.seed_set) cfg.set("seed", std::to_string(global.seed));
  if (global.resolution_set) {
    cfg.set("resolution", format_double(global.resolution));
  }
  if (global.single_thread) {
    cfg.set("threads", "1");
  } else if (global.threads_set) {
    cfg.set("threads", std::to_string(global.threads));
  }

  const double resolution = cfg.get_double("resolution", 0.1);
  if (resolution <= 0.0) throw ConfigError("resolution must be positive");
  if (resolution != 0.1 && resolution != 0.2) {
    std::cerr << "warning: resolution " << resolution
              << " is outside the reference settings {0.1, 0.2}\n";
  }
  if (cfg.get_int("threads", 1) < 1) {
    throw ConfigError("threads must be at least 1");
  }
  return cfg;
}

int run_sim(const ConfigFile& cfg, const std::string& out_dir) {
  const auto t0 = Clock::now();
  const SceneConfig scene_cfg = SceneConfig::from_config(cfg);
  const LidarSpec lidar = LidarSpec::from_config(cfg);
  const MissionConfig mission_cfg = MissionConfig::from_config(cfg);
  const RobotGeometry robot = robot_from_config(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));

  std::vector<Vec3> waypoints;
  if (cfg.has("mission_waypoints")) {
    waypoints = parse_waypoints(cfg.get_string("mission_waypoints", ""));
  } else {
    waypoints.push_back(Vec3(1.0, 1.0, 0.0));
    waypoints.push_back(
        Vec3(scene_cfg.extent_x - 1.0, scene_cfg.extent_y - 1.0, 0.0));
  }

  std::filesystem::create_directories(out_dir);
  const Scene scene = generate_scene(scene_cfg, seed);
  save_scene(scene, join(out_dir, "scene.ftsc"));
  echo_config(cfg, join(out_dir, "scene_config.cfg"));

  const MissionResult mission =
      simulate_mission(scene, waypoints, robot, lidar, mission_cfg, seed);
  save_ray_log(mission.rays, join(out_dir, "rays.ftrl"));
  save_events(mission.events, join(out_dir, "events.ftev"));

  const LabeledVoxelCloud oracle =
      ground_truth_voxelize(scene, scene_cfg.resolution);
  save_label_csv(oracle.voxels, join(out_dir, "oracle_labels.csv"));

  for (const std::string& warning : mission.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }
  std::cout << "scene elements: " << scene.elements.size() << "\n"
            << "mission rays: " << mission.rays.size() << "\n"
            << "pose events: " << mission.events.size() << "\n"
            << "oracle voxels: " << oracle.voxels.size() << "\n"
            << "mission duration: " << mission.duration << " s\n"
            << "wall time: " << seconds_since(t0) << " s\n";
  return 0;
}

int run_map(const ConfigFile& cfg, const std::string& rays_path,
            const std::string& out_path) {
  const double resolution = cfg.get_double("resolution", 0.1);
  const std::vector<RayRecord> rays = load_ray_log(rays_path);

  const auto t0 = Clock::now();
  VoxelMap map(resolution);
  for (const RayRecord& ray : rays) {
    map.integrate_ray(ray.origin, ray.endpoint,
                      static_cast<float>(ray.intensity), ray.num_returns);
  }
  const double fuse_seconds = seconds_since(t0);

  ensure_parent_dir(out_path);
  save_map(map, out_path);
  std::cout << "rays fused: " << rays.size() << "\n"
            << "active voxels: " << map.active_voxel_count() << "\n"
            << "fusion time: " << fuse_seconds << " s\n";
  return 0;
}

int run_label(const ConfigFile& cfg, const std::string& map_path,
              const std::string& hand_path, const std::string& events_path,
              const std::string& out_path) {
  const VoxelMap map = load_map(map_path);
  CollisionLayer layer(map.resolution());

  if (!hand_path.empty()) {
    layer.init_from_hand_labels(load_label_csv(hand_path));
  }
  std::size_t event_count = 0;
  if (!events_path.empty()) {
    const RobotGeometry robot = robot_from_config(cfg);
    for (const PoseEvent& event : load_events(events_path)) {
      layer.update_experience(event.pose, robot, event.state);
      ++event_count;
    }
  }

  const LabeledVoxelCloud labels = layer.finalize_labels(map);
  ensure_parent_dir(out_path);
  save_label_csv(labels.voxels, out_path, /*write_unknown=*/true);

  std::size_t tr = 0, nt = 0, unknown = 0;
  for (const LabeledVoxel& v : labels.voxels) {
    if (v.label == TravLabel::kTraversable) {
      ++tr;
    } else if (v.label == TravLabel::kNonTraversable) {
      ++nt;
    } else {
      ++unknown;
    }
  }
  std::cout << "experience events: " << event_count << "\n"
            << "labels: " << tr << " TR, " << nt << " NT, " << unknown
            << " unlabeled\n";
  return 0;
}

int run_dataset(const ConfigFile& cfg, const DatasetArgs& args) {
  if (args.scenes.empty()) throw ConfigError("dataset needs --scene entries");
  if (args.scenes.size() != args.maps.size() ||
      args.scenes.size() != args.labels.size()) {
    throw ConfigError("--scene, --map, and --labels counts must match");
  }
  if (std::find(args.scenes.begin(), args.scenes.end(), args.test_scene) ==
      args.scenes.end()) {
    throw ConfigError("--test-scene must name one of the --scene entries");
  }
  const int k = args.folds > 0
                    ? args.folds
                    : static_cast<int>(cfg.get_int("folds", 5));
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  const auto min_sites = static_cast<std::size_t>(cfg.get_int(
      "min_cube_sites", static_cast<std::int64_t>(kMinCubeSites)));

  Dataset dataset;
  std::vector<std::pair<std::string, std::uint32_t>> scene_cubes;
  std::vector<CubeSample> train_cubes;
  for (std::size_t i = 0; i < args.scenes.size(); ++i) {
    const VoxelMap map = load_map(args.maps[i]);
    const LabelMap labels = to_label_map(
        load_label_csv(args.labels[i], /*allow_unknown=*/true));
    const FeatureMap features = map.extract_all_features();
    std::vector<CubeSample> cubes = split_cubes(features, labels, min_sites);
    scene_cubes.emplace_back(args.scenes[i],
                             static_cast<std::uint32_t>(cubes.size()));
    std::cout << "scene " << args.scenes[i] << ": " << features.keys.size()
              << " voxels, " << cubes.size() << " cubes\n";
    for (CubeSample& cube : cubes) {
      if (args.scenes[i] != args.test_scene) train_cubes.push_back(cube);
      dataset.cubes.push_back(std::move(cube));
    }
  }
  dataset.stats = compute_normalization(train_cubes);

  const DatasetManifest manifest =
      kfold_split(scene_cubes, args.test_scene, k, seed);

  std::filesystem::create_directories(args.out_dir);
  save_dataset(dataset, join(args.out_dir, "dataset.ftds"));
  save_manifest(manifest, join(args.out_dir, "manifest.json"));
  std::cout << "cubes total: " << dataset.cubes.size() << " ("
            << train_cubes.size() << " outside the test scene)\n"
            << "folds: " << manifest.folds.size() << "\n";
  return 0;
}

int run_train(const ConfigFile& cfg, const TrainArgs& args) {
  const Dataset dataset = load_dataset(args.dataset_path);
  const DatasetManifest manifest = load_manifest(args.manifest_path);

  std::size_t expected = 0;
  for (std::uint32_t count : manifest.cube_counts) expected += count;
  if (expected != dataset.cubes.size()) {
    throw DataError("manifest cube counts do not match the dataset file");
  }
  if (args.fold < 0 ||
      args.fold >= static_cast<int>(manifest.folds.size())) {
    throw ConfigError("--fold must be in [0, " +
                      std::to_string(manifest.folds.size()) + ")");
  }

  std::set<std::uint32_t> val_indices(
      manifest.folds[static_cast<std::size_t>(args.fold)].begin(),
      manifest.folds[static_cast<std::size_t>(args.fold)].end());
  std::vector<CubeSample> train_cubes;
  std::vector<CubeSample> val_cubes;
  for (std::size_t f = 0; f < manifest.folds.size(); ++f) {
    for (std::uint32_t index : manifest.folds[f]) {
      if (index >= dataset.cubes.size()) {
        throw DataError("manifest fold index out of range");
      }
      if (f == static_cast<std::size_t>(args.fold)) {
        val_cubes.push_back(dataset.cubes[index]);
      } else {
        train_cubes.push_back(dataset.cubes[index]);
      }
    }
  }

  TrainConfig train_cfg;
  train_cfg.lr = cfg.get_double("train_lr", train_cfg.lr);
  train_cfg.weight_decay =
      cfg.get_double("train_weight_decay", train_cfg.weight_decay);
  train_cfg.batch_size = static_cast<std::size_t>(cfg.get_int(
      "train_batch_size", static_cast<std::int64_t>(train_cfg.batch_size)));
  train_cfg.patience =
      static_cast<int>(cfg.get_int("train_patience", train_cfg.patience));
  train_cfg.max_epochs =
      static_cast<int>(cfg.get_int("train_max_epochs", train_cfg.max_epochs));
  train_cfg.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));

  const auto t0 = Clock::now();
  UNetModel model = make_unet(train_cfg.seed);
  const TrainResult result =
      train_unet(model, train_cubes, val_cubes, train_cfg);

  ensure_parent_dir(args.model_out);
  save_model(model, args.model_out);
  const std::string log_path =
      args.log_out.empty() ? args.model_out + ".log.csv" : args.log_out;
  ensure_parent_dir(log_path);
  write_training_log(result.log, log_path);

  std::cout << "train cubes: " << train_cubes.size()
            << ", val cubes: " << val_cubes.size() << "\n"
            << "epochs run: " << result.log.size() << "\n"
            << "best epoch: " << result.best_epoch << " (val loss "
            << result.best_val_loss << ")\n"
            << "skipped steps: " << result.skipped_steps << "\n"
            << "wall time: " << seconds_since(t0) << " s\n";
  return 0;
}

int run_infer(const ConfigFile& cfg, const InferArgs& args) {
  std::vector<UNetModel> models = load_models(args.model_paths);
  const VoxelMap map = load_map(args.map_path);

  FeatureMap features;
  if (args.center.empty()) {
    features = map.extract_all_features();
  } else {
    const Vec3 center = parse_triplet(args.center, "--center");
    Vec3 extent(cfg.get_double("infer_extent_x", 10.0),
                cfg.get_double("infer_extent_y", 10.0),
                cfg.get_double("infer_extent_z", 2.0));
    if (!args.extent.empty()) {
      extent = parse_triplet(args.extent, "--extent");
    }
    if (extent.x() <= 0.0 || extent.y() <= 0.0 || extent.z() <= 0.0) {
      throw ConfigError("inference extent must be positive");
    }
    features = map.extract_feature_map(center, extent);
  }

  const auto t0 = Clock::now();
  TeMap te;
  te.resolution = map.resolution();
  te.probabilities = ensemble_predict(models, features);
  const double infer_seconds = seconds_since(t0);

  ensure_parent_dir(args.te_out);
  save_te_map(te, args.te_out);
  if (!args.ply_out.empty()) {
    ensure_parent_dir(args.ply_out);
    write_te_ply(te, args.ply_out);
  }
  std::cout << "voxels scored: " << te.probabilities.size() << "\n"
            << "ensemble size: " << models.size() << "\n"
            << "inference time: " << infer_seconds << " s ("
            << infer_seconds / static_cast<double>(models.size())
            << " s per model)\n";
  return 0;
}

int run_eval(const ConfigFile& cfg, const EvalArgs& args) {
  ensure_parent_dir(args.out_path);
  if (args.mode == "global") {
    const TeMap te = load_te_map(args.te_path);
    const LabelMap labels = to_label_map(
        load_label_csv(args.labels_path, /*allow_unknown=*/true));
    const ConfusionCounts counts =
        confusion(classify_estimates(te.probabilities), labels);
    const double mcc_value = mcc(counts);
    const double f1_value = f1(counts);
    std::ofstream out(args.out_path);
    if (!out) throw DataError("cannot open " + args.out_path + " for writing");
    out.precision(10);
    out << "mcc,f1\n" << mcc_value << "," << f1_value << "\n";
    std::cout << "voxels scored: " << counts.total() << "\n"
              << "mcc: " << mcc_value << "\nf1: " << f1_value << "\n";
    return 0;
  }
  if (args.mode == "density") {
    const TeMap te = load_te_map(args.te_path);
    const LabelMap labels = to_label_map(
        load_label_csv(args.labels_path, /*allow_unknown=*/true));
    const ColumnIndex index =
        ColumnIndex::build(sorted_keys(te.probabilities), te.resolution);
    const int bins = static_cast<int>(cfg.get_int("density_bins", 10));
    const std::vector<DensityBin> result = mcc_by_density(
        classify_estimates(te.probabilities), labels, index, bins);
    write_density_csv(result, args.out_path);
    std::cout << "mean vegetation density: " << mean_vegetation_density(index)
              << "\n";
    return 0;
  }
  if (args.mode == "temporal") {
    std::vector<UNetModel> models = load_models(args.model_paths);
    const std::vector<RayRecord> rays = load_ray_log(args.rays_path);
    const LabelMap labels = to_label_map(
        load_label_csv(args.labels_path, /*allow_unknown=*/true));
    const double resolution = cfg.get_double("resolution", 0.1);
    const double dt = cfg.get_double("temporal_dt", 5.0);
    const std::vector<TemporalPoint> series =
        temporal_eval(rays, models, labels, resolution, dt);
    write_temporal_csv(series, args.out_path);
    std::cout << "snapshots: " << series.size() << "\n";
    if (!series.empty() && series.back().has_metrics) {
      std::cout << "final mcc: " << series.back().mcc << " (coverage "
                << series.back().coverage << ")\n";
    }
    return 0;
  }
  if (args.mode == "compress2d") {
    const TeMap te = load_te_map(args.te_path);
    const ColumnIndex index =
        ColumnIndex::build(sorted_keys(te.probabilities), te.resolution);
    const double threshold = cfg.get_double("compress_threshold", 0.5);
    const std::map<ColumnKey, TravLabel> grid =
        compress_2d(te.probabilities, index, threshold);
    write_grid_csv(grid, args.out_path);
    if (!args.pgm_out.empty()) {
      ensure_parent_dir(args.pgm_out);
      write_grid_pgm(grid, args.pgm_out);
    }
    std::cout << "grid cells: " << grid.size() << "\n";
    return 0;
  }
  throw ConfigError("unknown eval mode: " + args.mode +
                    " (expected global, density, temporal, or compress2d)");
}

}  // namespace foresttrav::cli
