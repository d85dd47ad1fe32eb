#include "foresttrav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "foresttrav/error.hpp"
#include "foresttrav/eval.hpp"
#include "foresttrav/geometry.hpp"

namespace foresttrav {

namespace {

constexpr double kNear = 1e-4;  // blanking distance in front of the sensor

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

double Heightfield::height(double x, double y) const {
  const double gx = std::clamp((x - x0) / cell, 0.0, static_cast<double>(nx - 1));
  const double gy = std::clamp((y - y0) / cell, 0.0, static_cast<double>(ny - 1));
  const int ix = std::min(static_cast<int>(gx), nx - 2);
  const int iy = std::min(static_cast<int>(gy), ny - 2);
  const double fx = gx - ix;
  const double fy = gy - iy;
  const double z00 = z[ix * ny + iy];
  const double z10 = z[(ix + 1) * ny + iy];
  const double z01 = z[ix * ny + iy + 1];
  const double z11 = z[(ix + 1) * ny + iy + 1];
  return (1 - fx) * ((1 - fy) * z00 + fy * z01) +
         fx * ((1 - fy) * z10 + fy * z11);
}

double Heightfield::max_height() const {
  double top = z.empty() ? 0.0 : z.front();
  for (const double v : z) top = std::max(top, v);
  return top;
}

SceneConfig SceneConfig::from_config(const ConfigFile& cfg) {
  SceneConfig out;
  out.extent_x = cfg.get_double("extent_x", out.extent_x);
  out.extent_y = cfg.get_double("extent_y", out.extent_y);
  out.trunk_density = cfg.get_double("trunk_density", out.trunk_density);
  out.branch_density = cfg.get_double("branch_density", out.branch_density);
  out.box_density = cfg.get_double("box_density", out.box_density);
  out.grass_density = cfg.get_double("grass_density", out.grass_density);
  out.target_density = cfg.get_double("target_density", out.target_density);
  out.terrain_amplitude =
      cfg.get_double("terrain_amplitude", out.terrain_amplitude);
  out.resolution = cfg.get_double("resolution", out.resolution);
  out.branch_nt_fraction =
      cfg.get_double("branch_nt_fraction", out.branch_nt_fraction);
  out.validate();
  return out;
}

void SceneConfig::validate() const {
  if (extent_x <= 0.0 || extent_y <= 0.0) {
    throw ConfigError("scene extent must be positive");
  }
  if (trunk_density < 0.0 || branch_density < 0.0 || box_density < 0.0 ||
      grass_density < 0.0) {
    throw ConfigError("element densities must be nonnegative");
  }
  if (target_density > 1.0) {
    throw ConfigError("target_density above 1 is infeasible");
  }
  if (resolution <= 0.0) throw ConfigError("resolution must be positive");
  if (branch_nt_fraction < 0.0 || branch_nt_fraction > 1.0) {
    throw ConfigError("branch_nt_fraction must lie in [0, 1]");
  }
}

LidarSpec LidarSpec::from_config(const ConfigFile& cfg) {
  LidarSpec out;
  out.rings = static_cast<int>(cfg.get_int("lidar_rings", out.rings));
  out.min_elevation_deg =
      cfg.get_double("lidar_min_elevation_deg", out.min_elevation_deg);
  out.max_elevation_deg =
      cfg.get_double("lidar_max_elevation_deg", out.max_elevation_deg);
  out.azimuth_steps =
      static_cast<int>(cfg.get_int("lidar_azimuth_steps", out.azimuth_steps));
  out.max_range = cfg.get_double("lidar_max_range", out.max_range);
  out.range_noise = cfg.get_double("lidar_range_noise", out.range_noise);
  out.scan_period = cfg.get_double("lidar_scan_period", out.scan_period);
  out.sensor_height = cfg.get_double("lidar_sensor_height", out.sensor_height);
  out.validate();
  return out;
}

void LidarSpec::validate() const {
  if (rings < 1 || azimuth_steps < 1) {
    throw ConfigError("lidar pattern needs at least one ring and azimuth");
  }
  if (max_range <= 0.0 || scan_period <= 0.0) {
    throw ConfigError("lidar range and scan period must be positive");
  }
  if (range_noise < 0.0) throw ConfigError("range noise must be nonnegative");
}

namespace {

Heightfield make_terrain(double extent_x, double extent_y, double amplitude,
                         Rng& rng) {
  Heightfield hf;
  hf.cell = 0.5;
  hf.x0 = -hf.cell;
  hf.y0 = -hf.cell;
  hf.nx = static_cast<int>(std::ceil(extent_x / hf.cell)) + 3;
  hf.ny = static_cast<int>(std::ceil(extent_y / hf.cell)) + 3;
  struct Wave {
    double kx, ky, phase, weight;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 4; ++i) {
    const double wavelength = rng.uniform(2.0, 6.0);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    waves.push_back({2.0 * M_PI / wavelength * std::cos(angle),
                     2.0 * M_PI / wavelength * std::sin(angle),
                     rng.uniform(0.0, 2.0 * M_PI),
                     rng.uniform(0.5, 1.0)});
  }
  double weight_sum = 0.0;
  for (const auto& w : waves) weight_sum += w.weight;
  hf.z.resize(static_cast<size_t>(hf.nx) * hf.ny);
  for (int ix = 0; ix < hf.nx; ++ix) {
    for (int iy = 0; iy < hf.ny; ++iy) {
      const double x = hf.x0 + ix * hf.cell;
      const double y = hf.y0 + iy * hf.cell;
      double v = 0.0;
      for (const auto& w : waves) {
        v += w.weight * std::sin(w.kx * x + w.ky * y + w.phase);
      }
      hf.z[static_cast<size_t>(ix) * hf.ny + iy] =
          amplitude * v / (weight_sum > 0.0 ? weight_sum : 1.0);
    }
  }
  return hf;
}

Pose ground_pose(const Scene& scene, double x, double y, double yaw = 0.0) {
  Pose pose;
  pose.position = Vec3(x, y, scene.ground.height(x, y));
  pose.orientation = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  return pose;
}

}  // namespace

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Scene scene;
  scene.extent_x = config.extent_x;
  scene.extent_y = config.extent_y;
  scene.ground = make_terrain(config.extent_x, config.extent_y,
                              config.terrain_amplitude, rng);
  scene.ground_intensity = {100.0, 10.0};
  const double area = config.extent_x * config.extent_y;

  auto place = [&](double margin, Vec3& out_xy) {
    const double mx = std::min(margin, config.extent_x / 4.0);
    const double my = std::min(margin, config.extent_y / 4.0);
    out_xy.x() = rng.uniform(mx, config.extent_x - mx);
    out_xy.y() = rng.uniform(my, config.extent_y - my);
  };

  // Trunks: solid vertical cylinders, slightly embedded in the terrain.
  const int n_trunks = static_cast<int>(std::lround(config.trunk_density * area));
  std::vector<Vec3> trunk_positions;
  for (int i = 0; i < n_trunks; ++i) {
    Vec3 p = Vec3::Zero();
    place(0.4, p);
    SceneElement e;
    e.shape = ElementShape::kCylinder;
    e.pose = ground_pose(scene, p.x(), p.y());
    e.pose.position.z() -= 0.05;
    e.dimensions = Vec3(rng.uniform(0.08, 0.2), 0.0, rng.uniform(2.0, 3.5));
    e.tau = TravLabel::kNonTraversable;
    e.p_pass = 0.0;
    e.intensity_mean = 130.0;
    e.intensity_std = 15.0;
    e.thin = false;
    trunk_positions.push_back(e.pose.position);
    scene.elements.push_back(e);
  }

  // Branches: capsules hanging off trunks (or free-standing clutter).
  const int n_branches =
      static_cast<int>(std::lround(config.branch_density * area));
  for (int i = 0; i < n_branches; ++i) {
    Vec3 start = Vec3::Zero();
    if (!trunk_positions.empty()) {
      const auto& trunk =
          trunk_positions[static_cast<size_t>(rng.uniform_int(
              0, static_cast<int>(trunk_positions.size()) - 1))];
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      const double dist = rng.uniform(0.1, 0.8);
      start = Vec3(trunk.x() + dist * std::cos(angle),
                   trunk.y() + dist * std::sin(angle), 0.0);
    } else {
      place(0.3, start);
    }
    start.x() = std::clamp(start.x(), 0.2, config.extent_x - 0.2);
    start.y() = std::clamp(start.y(), 0.2, config.extent_y - 0.2);
    start.z() = scene.ground.height(start.x(), start.y()) +
                rng.uniform(0.1, 1.2);
    const double azimuth = rng.uniform(0.0, 2.0 * M_PI);
    const double elevation = rng.uniform(-0.3, 0.6);
    SceneElement e;
    e.shape = ElementShape::kCapsule;
    e.pose.position = start;
    e.pose.orientation =
        Quat(Eigen::AngleAxisd(azimuth, Vec3::UnitZ()) *
             Eigen::AngleAxisd(-elevation, Vec3::UnitY()));
    e.dimensions = Vec3(rng.uniform(0.3, 1.0), rng.uniform(0.02, 0.05), 0.0);
    const bool rigid = rng.bernoulli(config.branch_nt_fraction);
    e.tau = rigid ? TravLabel::kNonTraversable : TravLabel::kTraversable;
    e.p_pass = rigid ? rng.uniform(0.0, 0.2) : rng.uniform(0.3, 0.7);
    e.intensity_mean = 90.0;
    e.intensity_std = 20.0;
    e.thin = true;
    scene.elements.push_back(e);
  }

  // Rigid low obstacles (logs, rocks).
  const int n_boxes = static_cast<int>(std::lround(config.box_density * area));
  for (int i = 0; i < n_boxes; ++i) {
    Vec3 p = Vec3::Zero();
    place(0.5, p);
    SceneElement e;
    e.shape = ElementShape::kBox;
    e.pose = ground_pose(scene, p.x(), p.y(), rng.uniform(0.0, 2.0 * M_PI));
    e.pose.position.z() -= 0.03;
    e.dimensions = Vec3(rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.8),
                        rng.uniform(0.2, 0.5));
    e.tau = TravLabel::kNonTraversable;
    e.p_pass = 0.0;
    e.intensity_mean = 140.0;
    e.intensity_std = 10.0;
    e.thin = false;
    scene.elements.push_back(e);
  }

  // Grass clusters: a prefix of a fixed pool, so density grows monotonically
  // with the prefix length and the calibration below can binary-search it.
  const int pool_size = static_cast<int>(std::ceil(area * 6.0));
  std::vector<SceneElement> grass_pool;
  for (int i = 0; i < pool_size; ++i) {
    Vec3 p = Vec3::Zero();
    place(0.2, p);
    SceneElement e;
    e.shape = ElementShape::kBladeCluster;
    e.pose = ground_pose(scene, p.x(), p.y());
    e.pose.position.z() -= 0.02;
    e.dimensions = Vec3(rng.uniform(0.25, 0.5), 0.0, rng.uniform(0.3, 0.9));
    e.tau = TravLabel::kTraversable;
    e.p_pass = rng.uniform(0.3, 0.9);
    e.intensity_mean = 55.0;
    e.intensity_std = 20.0;
    e.thin = true;
    grass_pool.push_back(e);
  }

  const size_t base_count = scene.elements.size();
  auto density_with = [&](int n_grass) {
    scene.elements.resize(base_count);
    scene.elements.insert(scene.elements.end(), grass_pool.begin(),
                          grass_pool.begin() + n_grass);
    return measured_mean_density(scene, config.resolution);
  };

  int n_grass;
  if (config.target_density > 0.0) {
    int lo = 0, hi = pool_size;
    double rho_hi = density_with(hi);
    if (rho_hi < config.target_density) {
      n_grass = hi;
    } else {
      // Smallest prefix whose density reaches the target.
      while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (density_with(mid) >= config.target_density) {
          hi = mid;
        } else {
          lo = mid + 1;
        }
      }
      n_grass = lo;
      if (n_grass > 0) {
        const double above = density_with(n_grass);
        const double below = density_with(n_grass - 1);
        if (std::abs(below - config.target_density) <
            std::abs(above - config.target_density)) {
          n_grass = n_grass - 1;
        }
      }
    }
  } else {
    n_grass = std::min(pool_size,
                       static_cast<int>(std::lround(config.grass_density * area)));
  }
  scene.elements.resize(base_count);
  scene.elements.insert(scene.elements.end(), grass_pool.begin(),
                        grass_pool.begin() + n_grass);
  return scene;
}

namespace {

// Entry/exit of the beam through a vertical cylinder (caps included).
std::optional<std::pair<double, double>> vertical_cylinder_span(
    const Vec3& o, const Vec3& d, const Vec3& base, double radius,
    double height) {
  const double ox = o.x() - base.x();
  const double oy = o.y() - base.y();
  const double a = d.x() * d.x() + d.y() * d.y();
  double tr_in = -1e30, tr_out = 1e30;
  if (a < 1e-12) {
    if (ox * ox + oy * oy > radius * radius) return std::nullopt;
  } else {
    const double b = 2.0 * (ox * d.x() + oy * d.y());
    const double c = ox * ox + oy * oy - radius * radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    tr_in = (-b - s) / (2.0 * a);
    tr_out = (-b + s) / (2.0 * a);
  }
  double tz_in = -1e30, tz_out = 1e30;
  const double z0 = base.z(), z1 = base.z() + height;
  if (std::abs(d.z()) < 1e-12) {
    if (o.z() < z0 || o.z() > z1) return std::nullopt;
  } else {
    tz_in = (z0 - o.z()) / d.z();
    tz_out = (z1 - o.z()) / d.z();
    if (tz_in > tz_out) std::swap(tz_in, tz_out);
  }
  const double t_in = std::max(tr_in, tz_in);
  const double t_out = std::min(tr_out, tz_out);
  if (t_in > t_out) return std::nullopt;
  return std::make_pair(t_in, t_out);
}

std::optional<double> ray_sphere_entry(const Vec3& o, const Vec3& d,
                                       const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double b = 2.0 * oc.dot(d);
  const double q = oc.squaredNorm() - r * r;
  const double disc = b * b - 4.0 * q;
  if (disc < 0.0) return std::nullopt;
  return (-b - std::sqrt(disc)) / 2.0;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 < 1e-24 ? 0.0 : std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (a + s * ab - p).norm();
}

std::optional<double> capsule_entry(const Vec3& o, const Vec3& d,
                                    const Vec3& a, const Vec3& b, double r,
                                    double max_range) {
  if (point_segment_distance(o + kNear * d, a, b) < r) return kNear;
  double best = 1e30;
  const Vec3 ab = b - a;
  const double len = ab.norm();
  if (len > 1e-12) {
    const Vec3 u = ab / len;
    const Vec3 d_perp = d - d.dot(u) * u;
    const Vec3 o_perp = (o - a) - (o - a).dot(u) * u;
    const double qa = d_perp.squaredNorm();
    if (qa > 1e-12) {
      const double qb = 2.0 * o_perp.dot(d_perp);
      const double qc = o_perp.squaredNorm() - r * r;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double t = (-qb - std::sqrt(disc)) / (2.0 * qa);
        const double s = (o + t * d - a).dot(u);
        if (t > kNear && s >= 0.0 && s <= len) best = std::min(best, t);
      }
    }
  }
  for (const Vec3& cap : {a, b}) {
    const auto t = ray_sphere_entry(o, d, cap, r);
    if (t && *t > kNear) best = std::min(best, *t);
  }
  if (best > max_range) return std::nullopt;
  return best;
}

std::optional<double> obb_entry(const Vec3& o, const Vec3& d, const Obb& box,
                                double max_range) {
  const Vec3 o_l = box.rot.transpose() * (o - box.center);
  const Vec3 d_l = box.rot.transpose() * d;
  double t_in = -1e30, t_out = 1e30;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d_l[i]) < 1e-12) {
      if (std::abs(o_l[i]) > box.half[i]) return std::nullopt;
      continue;
    }
    double lo = (-box.half[i] - o_l[i]) / d_l[i];
    double hi = (box.half[i] - o_l[i]) / d_l[i];
    if (lo > hi) std::swap(lo, hi);
    t_in = std::max(t_in, lo);
    t_out = std::min(t_out, hi);
  }
  if (t_in > t_out || t_out < kNear) return std::nullopt;
  const double entry = std::max(t_in, kNear);
  if (entry > max_range) return std::nullopt;
  return entry;
}

Obb element_box(const SceneElement& e) {
  const Vec3& dim = e.dimensions;
  return make_obb(e.pose, Vec3(-dim.x() / 2, -dim.y() / 2, 0.0),
                  Vec3(dim.x() / 2, dim.y() / 2, dim.z()));
}

// Capsule axis endpoints: the segment runs along the pose's local +x.
std::pair<Vec3, Vec3> capsule_axis(const SceneElement& e) {
  const Vec3 a = e.pose.position;
  const Vec3 b =
      a + e.pose.orientation.toRotationMatrix().col(0) * e.dimensions.x();
  return {a, b};
}

}  // namespace

std::optional<double> ray_element_entry(const SceneElement& element,
                                        const Vec3& origin, const Vec3& dir,
                                        double max_range) {
  switch (element.shape) {
    case ElementShape::kCylinder:
    case ElementShape::kBladeCluster: {
      const auto span = vertical_cylinder_span(
          origin, dir, element.pose.position, element.dimensions.x(),
          element.dimensions.z());
      if (!span || span->second < kNear) return std::nullopt;
      const double entry = std::max(span->first, kNear);
      if (entry > max_range) return std::nullopt;
      return entry;
    }
    case ElementShape::kCapsule: {
      const auto [a, b] = capsule_axis(element);
      return capsule_entry(origin, dir, a, b, element.dimensions.y(),
                           max_range);
    }
    case ElementShape::kBox:
      return obb_entry(origin, dir, element_box(element), max_range);
  }
  return std::nullopt;
}

namespace {

std::optional<double> ground_entry(const Scene& scene, const Vec3& o,
                                   const Vec3& d, double max_range) {
  const double ceiling = scene.ground.max_height() + 0.5;
  auto above = [&](double t) {
    const Vec3 p = o + t * d;
    return p.z() - scene.ground.height(p.x(), p.y());
  };
  double t = kNear;
  if (above(t) <= 0.0) return t;
  const double step = 0.25;
  while (t < max_range) {
    const double t_next = std::min(t + step, max_range);
    const Vec3 p = o + t_next * d;
    if (d.z() >= 0.0 && p.z() > ceiling) return std::nullopt;
    if (above(t_next) <= 0.0) {
      double lo = t, hi = t_next;
      for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (above(mid) > 0.0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    t = t_next;
  }
  return std::nullopt;
}

struct BeamEvent {
  double t = 0.0;
  int element = -1;  // -1: ground
};

void emit_record(std::vector<RayRecord>& out, double stamp, const Vec3& origin,
                 const Vec3& dir, double t_hit, double mean, double std_dev,
                 std::uint8_t rn, std::uint8_t nr, double sigma_r, Rng& rng) {
  RayRecord rec;
  rec.t = stamp;
  rec.origin = origin;
  const double t_noisy = std::max(1e-3, t_hit + rng.normal(0.0, sigma_r));
  rec.endpoint = origin + t_noisy * dir;
  rec.intensity = std::clamp(rng.normal(mean, std_dev), 0.0, 255.0);
  rec.return_number = rn;
  rec.num_returns = nr;
  out.push_back(rec);
}

}  // namespace

void trace_beam(const Scene& scene, double t, const Vec3& origin,
                const Vec3& dir_raw, const LidarSpec& spec, Rng& rng,
                std::vector<RayRecord>& out) {
  const Vec3 dir = dir_raw.normalized();
  std::vector<BeamEvent> events;
  for (size_t i = 0; i < scene.elements.size(); ++i) {
    const auto entry =
        ray_element_entry(scene.elements[i], origin, dir, spec.max_range);
    if (entry) events.push_back({*entry, static_cast<int>(i)});
  }
  if (const auto g = ground_entry(scene, origin, dir, spec.max_range)) {
    events.push_back({*g, -1});
  }
  std::sort(events.begin(), events.end(),
            [](const BeamEvent& a, const BeamEvent& b) {
              return a.t != b.t ? a.t < b.t : a.element < b.element;
            });

  struct Pending {
    double t_hit;
    double mean;
    double std_dev;
  };
  std::optional<Pending> pending;

  auto finish = [&](double t_hit, double mean, double std_dev) {
    if (pending) {
      emit_record(out, t, origin, dir, pending->t_hit, pending->mean,
                  pending->std_dev, 1, 2, spec.range_noise, rng);
      emit_record(out, t, origin, dir, t_hit, mean, std_dev, 2, 2,
                  spec.range_noise, rng);
    } else {
      emit_record(out, t, origin, dir, t_hit, mean, std_dev, 1, 1,
                  spec.range_noise, rng);
    }
  };

  for (const auto& event : events) {
    if (event.element < 0) {
      finish(event.t, scene.ground_intensity.mean, scene.ground_intensity.std);
      return;
    }
    const SceneElement& e = scene.elements[static_cast<size_t>(event.element)];
    const bool passes = e.p_pass > 0.0 && rng.bernoulli(clamp01(e.p_pass));
    if (!passes) {
      finish(event.t, e.intensity_mean, e.intensity_std);
      return;
    }
    if (!pending && e.thin && rng.bernoulli(0.5)) {
      pending = Pending{event.t, e.intensity_mean, e.intensity_std};
    }
  }
  if (pending) {
    emit_record(out, t, origin, dir, pending->t_hit, pending->mean,
                pending->std_dev, 1, 1, spec.range_noise, rng);
  }
}

void simulate_scan(const Scene& scene, const Pose& sensor_pose,
                   const LidarSpec& spec, double t, Rng& rng,
                   std::vector<RayRecord>& out) {
  const Mat3 r = sensor_pose.orientation.toRotationMatrix();
  for (int ring = 0; ring < spec.rings; ++ring) {
    const double f =
        spec.rings == 1 ? 0.5 : static_cast<double>(ring) / (spec.rings - 1);
    const double elev =
        (spec.min_elevation_deg +
         f * (spec.max_elevation_deg - spec.min_elevation_deg)) *
        M_PI / 180.0;
    for (int a = 0; a < spec.azimuth_steps; ++a) {
      const double az = 2.0 * M_PI * a / spec.azimuth_steps;
      const Vec3 local(std::cos(elev) * std::cos(az),
                       std::cos(elev) * std::sin(az), std::sin(elev));
      trace_beam(scene, t, sensor_pose.position, r * local, spec, rng, out);
    }
  }
}

std::vector<RayRecord> simulate_scan(const Scene& scene,
                                     const Pose& sensor_pose,
                                     const LidarSpec& spec,
                                     std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<RayRecord> out;
  simulate_scan(scene, sensor_pose, spec, 0.0, rng, out);
  return out;
}

namespace {

// Exact 2D distance from a point to a voxel's xy footprint.
double cell_xy_distance(const VoxelKey& key, double res, double px,
                        double py) {
  const double dx =
      std::max({key.x * res - px, 0.0, px - (key.x + 1) * res});
  const double dy =
      std::max({key.y * res - py, 0.0, py - (key.y + 1) * res});
  return std::hypot(dx, dy);
}

bool element_intersects_cell(const SceneElement& e, const VoxelKey& key,
                             double res) {
  switch (e.shape) {
    case ElementShape::kCylinder:
    case ElementShape::kBladeCluster: {
      const double z0 = e.pose.position.z();
      const double z1 = z0 + e.dimensions.z();
      if (!(key.z * res < z1 && (key.z + 1) * res > z0)) return false;
      return cell_xy_distance(key, res, e.pose.position.x(),
                              e.pose.position.y()) <
             e.dimensions.x() - 1e-9;
    }
    case ElementShape::kCapsule: {
      const auto [a, b] = capsule_axis(e);
      const Vec3 lo(key.x * res, key.y * res, key.z * res);
      const Vec3 hi = lo + Vec3::Constant(res);
      // Squared distance from the segment to the cell is convex in the
      // segment parameter; ternary search pins the minimum.
      auto dist_at = [&](double s) {
        const Vec3 p = a + s * (b - a);
        const Vec3 q = p.cwiseMax(lo).cwiseMin(hi);
        return (p - q).norm();
      };
      double s_lo = 0.0, s_hi = 1.0;
      for (int i = 0; i < 80; ++i) {
        const double m1 = s_lo + (s_hi - s_lo) / 3.0;
        const double m2 = s_hi - (s_hi - s_lo) / 3.0;
        if (dist_at(m1) <= dist_at(m2)) {
          s_hi = m2;
        } else {
          s_lo = m1;
        }
      }
      return dist_at(0.5 * (s_lo + s_hi)) < e.dimensions.y() - 1e-9;
    }
    case ElementShape::kBox:
      return obb_intersects_cell(element_box(e), key, res);
  }
  return false;
}

void element_cells(const SceneElement& e, double res,
                   std::vector<VoxelKey>& out) {
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  switch (e.shape) {
    case ElementShape::kCylinder:
    case ElementShape::kBladeCluster: {
      const double r = e.dimensions.x();
      lo = e.pose.position - Vec3(r, r, 0.0);
      hi = e.pose.position + Vec3(r, r, e.dimensions.z());
      break;
    }
    case ElementShape::kCapsule: {
      const auto [a, b] = capsule_axis(e);
      const double r = e.dimensions.y();
      lo = a.cwiseMin(b) - Vec3::Constant(r);
      hi = a.cwiseMax(b) + Vec3::Constant(r);
      break;
    }
    case ElementShape::kBox: {
      const Obb box = element_box(e);
      lo = hi = box.center;
      for (int sx = -1; sx <= 1; sx += 2) {
        for (int sy = -1; sy <= 1; sy += 2) {
          for (int sz = -1; sz <= 1; sz += 2) {
            const Vec3 corner =
                box.center + box.rot * Vec3(sx * box.half.x(),
                                            sy * box.half.y(),
                                            sz * box.half.z());
            lo = lo.cwiseMin(corner);
            hi = hi.cwiseMax(corner);
          }
        }
      }
      break;
    }
  }
  const VoxelKey k_lo = point_to_key(lo, res);
  const VoxelKey k_hi = point_to_key(hi, res);
  for (int32_t x = k_lo.x; x <= k_hi.x; ++x) {
    for (int32_t y = k_lo.y; y <= k_hi.y; ++y) {
      for (int32_t z = k_lo.z; z <= k_hi.z; ++z) {
        const VoxelKey key{x, y, z};
        if (element_intersects_cell(e, key, res)) out.push_back(key);
      }
    }
  }
}

}  // namespace

LabeledVoxelCloud ground_truth_voxelize(const Scene& scene,
                                        double resolution) {
  if (resolution <= 0.0) {
    throw std::invalid_argument("resolution must be positive");
  }
  std::unordered_map<VoxelKey, TravLabel, VoxelKeyHash> labels;

  // Ground surface cells, sampled on a 5x5 lattice per column.
  const int nx = static_cast<int>(std::ceil(scene.extent_x / resolution));
  const int ny = static_cast<int>(std::ceil(scene.extent_y / resolution));
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int sx = 0; sx < 5; ++sx) {
        for (int sy = 0; sy < 5; ++sy) {
          const double x = (ix + (sx + 0.5) / 5.0) * resolution;
          const double y = (iy + (sy + 0.5) / 5.0) * resolution;
          const double z = scene.ground.height(x, y);
          const VoxelKey key{ix, iy, static_cast<int32_t>(
                                         std::floor(z / resolution))};
          labels.emplace(key, TravLabel::kTraversable);
        }
      }
    }
  }

  std::vector<VoxelKey> cells;
  for (const auto& e : scene.elements) {
    cells.clear();
    element_cells(e, resolution, cells);
    for (const auto& key : cells) {
      if (e.tau == TravLabel::kNonTraversable) {
        labels[key] = TravLabel::kNonTraversable;  // NT dominates
      } else {
        labels.emplace(key, TravLabel::kTraversable);
      }
    }
  }

  LabeledVoxelCloud out;
  out.resolution = resolution;
  std::vector<VoxelKey> keys;
  keys.reserve(labels.size());
  for (const auto& [key, label] : labels) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  for (const auto& key : keys) {
    out.voxels.push_back({key, labels.at(key), LabelSource::kHand});
  }
  return out;
}

double measured_mean_density(const Scene& scene, double resolution) {
  const LabeledVoxelCloud cloud = ground_truth_voxelize(scene, resolution);
  std::vector<VoxelKey> keys;
  keys.reserve(cloud.voxels.size());
  for (const auto& v : cloud.voxels) keys.push_back(v.key);
  return mean_vegetation_density(ColumnIndex::build(keys, resolution));
}

}  // namespace foresttrav
