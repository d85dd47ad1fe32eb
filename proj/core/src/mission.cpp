#include "foresttrav/mission.hpp"

#include <algorithm>
#include <cmath>

#include "foresttrav/error.hpp"
#include "foresttrav/geometry.hpp"

namespace foresttrav {

MissionConfig MissionConfig::from_config(const ConfigFile& cfg) {
  MissionConfig out;
  out.speed = cfg.get_double("mission_speed", out.speed);
  out.dt = cfg.get_double("mission_dt", out.dt);
  out.turn_rate = cfg.get_double("mission_turn_rate", out.turn_rate);
  out.tr_event_period =
      cfg.get_double("mission_tr_event_period", out.tr_event_period);
  out.waypoint_tolerance =
      cfg.get_double("mission_waypoint_tolerance", out.waypoint_tolerance);
  out.backoff = cfg.get_double("mission_backoff", out.backoff);
  out.detour_leg = cfg.get_double("mission_detour_leg", out.detour_leg);
  out.punch_distance =
      cfg.get_double("mission_punch_distance", out.punch_distance);
  out.waypoint_budget =
      cfg.get_double("mission_waypoint_budget", out.waypoint_budget);
  out.validate();
  return out;
}

void MissionConfig::validate() const {
  if (speed <= 0.0 || dt <= 0.0 || turn_rate <= 0.0) {
    throw ConfigError("mission speed, dt, and turn rate must be positive");
  }
  if (tr_event_period <= 0.0 || waypoint_tolerance <= 0.0 ||
      waypoint_budget <= 0.0) {
    throw ConfigError("mission periods and tolerances must be positive");
  }
  if (backoff < 0.0 || detour_leg <= 0.0 || punch_distance <= 0.0) {
    throw ConfigError("mission detour distances must be positive");
  }
}

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

Obb front_slab(const Pose& pose, const RobotGeometry& geom) {
  return make_obb(pose,
                  Vec3(geom.length / 2.0, -geom.width / 2.0, 0.0),
                  Vec3(geom.length / 2.0 + geom.d_ext, geom.width / 2.0,
                       geom.height));
}

bool slab_hits_element(const Obb& slab, const SceneElement& e) {
  switch (e.shape) {
    case ElementShape::kCylinder:
    case ElementShape::kBladeCluster: {
      // Poses stay yaw-only, so both solids are vertical extrusions and the
      // test splits into footprint distance and z-interval overlap.
      const double z0 = e.pose.position.z();
      const double z1 = z0 + e.dimensions.z();
      const double slab_z0 = slab.center.z() - slab.half.z();
      const double slab_z1 = slab.center.z() + slab.half.z();
      if (z0 > slab_z1 || z1 < slab_z0) return false;
      const Vec3 local =
          slab.rot.transpose() * (e.pose.position - slab.center);
      const double dx =
          std::max(std::abs(local.x()) - slab.half.x(), 0.0);
      const double dy =
          std::max(std::abs(local.y()) - slab.half.y(), 0.0);
      return std::hypot(dx, dy) <= e.dimensions.x();
    }
    case ElementShape::kCapsule: {
      const Vec3 a = e.pose.position;
      const Vec3 b = a + e.pose.orientation.toRotationMatrix().col(0) *
                             e.dimensions.x();
      const double r = e.dimensions.y();
      const int n = std::max(2, static_cast<int>((b - a).norm() / (r * 0.5)));
      for (int i = 0; i <= n; ++i) {
        const Vec3 p = a + (static_cast<double>(i) / n) * (b - a);
        if (point_obb_distance(slab, p) <= r) return true;
      }
      return false;
    }
    case ElementShape::kBox: {
      const Vec3& dim = e.dimensions;
      const Obb box =
          make_obb(e.pose, Vec3(-dim.x() / 2, -dim.y() / 2, 0.0),
                   Vec3(dim.x() / 2, dim.y() / 2, dim.z()));
      return obb_intersects_obb(slab, box);
    }
  }
  return false;
}

}  // namespace

bool front_slab_blocked(const Scene& scene, const Pose& pose,
                        const RobotGeometry& geom) {
  const Obb slab = front_slab(pose, geom);
  for (const auto& e : scene.elements) {
    if (e.tau != TravLabel::kNonTraversable) continue;
    if (slab_hits_element(slab, e)) return true;
  }
  return false;
}

MissionResult simulate_mission(const Scene& scene,
                               const std::vector<Vec3>& waypoints,
                               const RobotGeometry& geom,
                               const LidarSpec& spec,
                               const MissionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  spec.validate();
  if (waypoints.size() < 2) {
    throw std::invalid_argument("simulate_mission needs at least two waypoints");
  }

  MissionResult result;
  Rng rng(seed);

  double x = waypoints.front().x();
  double y = waypoints.front().y();
  double yaw = std::atan2(waypoints[1].y() - y, waypoints[1].x() - x);

  auto grounded = [&](double px, double py, double pyaw) {
    Pose pose;
    pose.position = Vec3(px, py, scene.ground.height(px, py));
    pose.orientation = Quat(Eigen::AngleAxisd(pyaw, Vec3::UnitZ()));
    return pose;
  };

  double t = 0.0;
  double scan_acc = spec.scan_period;  // first scan fires immediately
  double tr_acc = 0.0;

  auto maybe_scan = [&]() {
    scan_acc += cfg.dt;
    if (scan_acc + 1e-9 >= spec.scan_period) {
      scan_acc = 0.0;
      Pose sensor = grounded(x, y, yaw);
      sensor.position.z() += spec.sensor_height;
      simulate_scan(scene, sensor, spec, t, rng, result.rays);
    }
  };

  // True when the front slab stays clear along `dist` of straight travel at
  // `pyaw` from (px, py). Steps of half the slab depth leave no gaps.
  auto heading_clear = [&](double px, double py, double pyaw, double dist) {
    const int steps =
        std::max(1, static_cast<int>(std::ceil(dist / (geom.d_ext * 0.5))));
    for (int i = 0; i <= steps; ++i) {
      const double s = dist * i / steps;
      const Pose probe = grounded(px + std::cos(pyaw) * s,
                                  py + std::sin(pyaw) * s, pyaw);
      if (front_slab_blocked(scene, probe, geom)) return false;
    }
    return true;
  };

  for (size_t wi = 1; wi < waypoints.size(); ++wi) {
    const double tx = waypoints[wi].x();
    const double ty = waypoints[wi].y();
    const double deadline = t + cfg.waypoint_budget;
    bool reached = false;
    bool engaged = false;       // inside an obstacle negotiation
    double blocked_yaw = 0.0;   // heading frozen at the engagement start
    int attempts = 0;
    double detour_remaining = 0.0;
    double detour_yaw = 0.0;
    double punch_remaining = 0.0;

    while (t < deadline) {
      maybe_scan();
      if (std::hypot(tx - x, ty - y) <= cfg.waypoint_tolerance) {
        reached = true;
        break;
      }
      if (detour_remaining > 0.0 &&
          heading_clear(x, y, blocked_yaw, cfg.punch_distance)) {
        detour_remaining = 0.0;
        punch_remaining = cfg.punch_distance;
      }
      const double target_yaw = std::atan2(ty - y, tx - x);
      const double desired_yaw = detour_remaining > 0.0 ? detour_yaw
                                 : punch_remaining > 0.0 ? blocked_yaw
                                                         : target_yaw;
      const double dyaw = wrap_angle(desired_yaw - yaw);

      bool collided = false;
      Pose collision_pose;
      double collision_yaw = yaw;
      if (std::abs(dyaw) > 0.15) {
        const double new_yaw =
            yaw + std::clamp(dyaw, -cfg.turn_rate * cfg.dt,
                             cfg.turn_rate * cfg.dt);
        const Pose candidate = grounded(x, y, new_yaw);
        if (front_slab_blocked(scene, candidate, geom)) {
          collided = true;
          collision_pose = candidate;
          collision_yaw = new_yaw;
        } else {
          yaw = new_yaw;
        }
      } else {
        const double nx = x + std::cos(yaw) * cfg.speed * cfg.dt;
        const double ny = y + std::sin(yaw) * cfg.speed * cfg.dt;
        const Pose candidate = grounded(nx, ny, yaw);
        if (front_slab_blocked(scene, candidate, geom)) {
          collided = true;
          collision_pose = candidate;
        } else {
          x = nx;
          y = ny;
          tr_acc += cfg.dt;
          if (tr_acc + 1e-9 >= cfg.tr_event_period) {
            tr_acc = 0.0;
            result.events.push_back(
                {t, grounded(x, y, yaw), TravLabel::kTraversable});
          }
          if (detour_remaining > 0.0) {
            detour_remaining -= cfg.speed * cfg.dt;
          } else if (punch_remaining > 0.0) {
            punch_remaining -= cfg.speed * cfg.dt;
            if (punch_remaining <= 0.0) engaged = false;
          }
        }
      }

      if (collided) {
        result.events.push_back(
            {t, collision_pose, TravLabel::kNonTraversable});
        x -= std::cos(yaw) * cfg.backoff;
        y -= std::sin(yaw) * cfg.backoff;
        if (!engaged) {
          engaged = true;
          blocked_yaw = collision_yaw;
          attempts = 0;
        }
        const int side = attempts % 2 == 0 ? 1 : -1;
        detour_yaw = wrap_angle(
            blocked_yaw + side * (M_PI / 2.0 + 0.2 * (attempts / 2)));
        detour_remaining = cfg.detour_leg * (1.0 + 0.4 * attempts);
        punch_remaining = 0.0;
        ++attempts;
      }
      t += cfg.dt;
    }
    if (!reached) {
      result.warnings.push_back("waypoint " + std::to_string(wi) +
                                " unreachable within budget");
    }
  }
  result.duration = t;
  return result;
}

}  // namespace foresttrav
