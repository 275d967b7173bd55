#pragma once

// Deterministic 2D figure-8 world: CAVs driving stop-and-go through a
// signalized crossing, CIS traffic cameras, synthetic detections and
// localization drawn from configurable error models, and exact ground truth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coopfusion/error_models.hpp"
#include "coopfusion/local_fusion.hpp"
#include "coopfusion/model_io.hpp"
#include "coopfusion/rng.hpp"

namespace coopfusion {

struct PathPoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double curvature = 0.0;
};

/// Figure-8 of two straights of length s_l crossing at right angles at the
/// origin, joined by two 270-degree arcs of radius s_l/2 turning in opposite
/// directions. Parameterized by arc length from the start of the north-east
/// straight:
///
///   [0, s_l)              straight, heading +45 deg, crosses origin at s_l/2
///   [s_l, s_l + 3pi r/2)  clockwise arc around (+s_l/sqrt2, 0)
///   next s_l              straight, heading +135 deg, crosses origin midway
///   last 3pi r/2          counter-clockwise arc around (-s_l/sqrt2, 0)
class FigureEightPath {
 public:
  explicit FigureEightPath(double straight_length) : l_(straight_length), r_(straight_length / 2.0) {
    if (!(straight_length > 0)) throw InvalidArgumentError("figure-8 straight length must be > 0");
    arc_ = 1.5 * kPi * r_;
  }

  double straight_length() const { return l_; }
  double turn_radius() const { return r_; }
  double length() const { return 2.0 * l_ + 2.0 * arc_; }

  /// Arc-length positions where the path passes through the crossing.
  std::array<double, 2> crossings() const { return {0.5 * l_, 1.5 * l_ + arc_}; }

  double wrap(double s) const {
    const double len = length();
    double w = std::fmod(s, len);
    if (w < 0) w += len;
    return w;
  }

  PathPoint at(double s) const {
    constexpr double c = 0.70710678118654752440;
    const double h0 = 0.25 * kPi, h1 = 0.75 * kPi;
    s = wrap(s);
    if (s < l_) {
      const double u = s - 0.5 * l_;
      return {u * c, u * c, h0, 0.0};
    }
    s -= l_;
    if (s < arc_) {
      // clockwise around centre (l/sqrt2, 0), starting at angle 135 deg
      const double a = 0.75 * kPi - s / r_;
      return {l_ * c + r_ * std::cos(a), r_ * std::sin(a), normalize_angle(h0 - s / r_), -1.0 / r_};
    }
    s -= arc_;
    if (s < l_) {
      const double u = s - 0.5 * l_;
      return {-u * c, u * c, h1, 0.0};
    }
    s -= l_;
    // counter-clockwise around centre (-l/sqrt2, 0), starting at angle 45 deg
    const double a = 0.25 * kPi + s / r_;
    return {-l_ * c + r_ * std::cos(a), r_ * std::sin(a), normalize_angle(h1 + s / r_), 1.0 / r_};
  }

 private:
  double l_;
  double r_;
  double arc_;
};

inline FigureEightPath figure_eight_path(double s_l) { return FigureEightPath(s_l); }

/// Fixed-time signal: each crossing direction alternates green then red; the
/// second direction is offset by `offset` seconds.
struct TrafficLight {
  double green = 10.0;
  double red = 6.0;
  double offset = 8.0;

  bool is_green(int direction, double t) const {
    const double cycle = green + red;
    double phase = std::fmod(t + (direction == 0 ? 0.0 : offset), cycle);
    if (phase < 0) phase += cycle;
    return phase < green;
  }
};

enum class LightState { green, red };

struct DriveParams {
  double target_speed = 0.5;
  double max_accel = 1.0;
  double stop_offset = 0.25;  // stop line distance before the crossing, in units of s_l
  double min_gap = 0.5;       // bumper-to-bumper proxy: centre spacing kept behind a leader
};

struct Vehicle {
  std::string id;
  double s = 0.0;  // arc length along the path (unwrapped)
  double v = 0.0;
  bool braking_for_light = false;
};

/// Arc-length distance from `vehicle` to the next stop line and which
/// crossing direction it guards.
struct StopLineAhead {
  double distance = 0.0;
  int direction = 0;
};

inline StopLineAhead next_stop_line(const FigureEightPath& path, double s, const DriveParams& p) {
  const auto cross = path.crossings();
  StopLineAhead best{std::numeric_limits<double>::infinity(), 0};
  for (int d = 0; d < 2; ++d) {
    const double dist = path.wrap(cross[d] - p.stop_offset * path.straight_length() - s);
    if (dist < best.distance) best = {dist, d};
  }
  return best;
}

namespace detail {

/// Advances (s, v) by dt under one constant acceleration, so the distance
/// covered is always (v_start + v_end) / 2 * dt. Without a brake limit the
/// speed moves toward `target` at up to `accel`; with one the vehicle brakes
/// uniformly to stop `limit` meters ahead, or stops within this tick when
/// that stop would come earlier (overshooting by at most v * dt / 2).
inline void integrate_motion(double& s, double& v, double dt, double target, double accel,
                             std::optional<double> brake_limit) {
  double v_next;
  if (brake_limit) {
    if (v <= 1e-12) {
      v = 0.0;
      return;
    }
    const double d = std::max(0.0, *brake_limit);
    // uniform deceleration v^2 / (2d) stops after 2d / v seconds
    v_next = 2.0 * d >= v * dt ? v - v * v / (2.0 * d) * dt : 0.0;
    v_next = std::max(0.0, v_next);
  } else {
    v_next = v + std::clamp(target - v, -accel * dt, accel * dt);
  }
  s += 0.5 * (v + v_next) * dt;
  v = v_next;
}

}  // namespace detail

/// One tick of path following. `light` is the state of the next stop line's
/// signal; `gap_to_leader` is the arc-length distance to the vehicle ahead.
inline Vehicle step_vehicle(const Vehicle& vehicle, double dt, LightState light, const FigureEightPath& path,
                            const DriveParams& params, std::optional<double> gap_to_leader = std::nullopt) {
  if (!(dt > 0)) throw InvalidArgumentError("step_vehicle: dt must be > 0");
  Vehicle out = vehicle;
  const double a = params.max_accel;
  const double cruise_distance = std::max(vehicle.v, params.target_speed) * dt;
  auto must_brake = [&](double d) {
    // brake now if cruising one more tick would leave less than the
    // comfortable stopping distance
    const double comfortable = vehicle.v * vehicle.v / (2.0 * a);
    return d - cruise_distance < comfortable + 1e-12;
  };

  std::optional<double> limit;
  const StopLineAhead stop = next_stop_line(path, vehicle.s, params);
  if (light == LightState::red) {
    const bool can_stop = vehicle.v * vehicle.v / (2.0 * a) <= stop.distance + 1e-9;
    if (vehicle.braking_for_light || (can_stop && must_brake(stop.distance))) {
      limit = stop.distance;
      out.braking_for_light = true;
    }
  } else {
    out.braking_for_light = false;
  }
  if (gap_to_leader) {
    const double room = *gap_to_leader - params.min_gap;
    if (must_brake(room) && (!limit || room < *limit)) limit = room;
  }
  if (limit && vehicle.v <= 1e-12) {
    // stopped short of the limit: creep forward without reaching it
    const double room = *limit;
    const double creep = std::min({params.target_speed, std::sqrt(a * std::max(room, 0.0)), 2.0 * room / dt});
    if (creep > a * dt * 1e-3) detail::integrate_motion(out.s, out.v, dt, creep, a, std::nullopt);
    else out.v = 0.0;
    return out;
  }
  detail::integrate_motion(out.s, out.v, dt, params.target_speed, a, limit);
  return out;
}

/// Sensor as mounted on a platform.
struct SensorSpec {
  std::string name;  // pipeline name, also selects the error models ("camera" / "lidar")
  SensorPose pose;
  double fov = 2.0 * kPi;
  double max_range = 8.0;
  double rate = 8.0;
  double miss_probability = 0.0;
  double clutter_rate = 0.0;  // expected uniform false detections per frame
};

struct Target {
  Vec2 position;
  ObjectClass object_class = ObjectClass::vehicle;
};

/// World pose of a sensor: platform pose composed with the mounting pose.
inline SensorPose sensor_world_pose(const SensorPose& mount, double px, double py, double ptheta) {
  const Vec2 p = Vec2(px, py) + rotation(ptheta) * Vec2(mount.x, mount.y);
  return {p.x(), p.y(), normalize_angle(ptheta + mount.theta)};
}

inline double gaussian(RngStream& rng, double sigma) {
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

/// Detections of every target inside range and field of view, perturbed
/// along the ray by sigma_distal(d) and across it by sigma_perp(d).
inline std::vector<PolarObservation> synth_sensor_frame(const SensorSpec& sensor, const SensorPose& world_pose,
                                                        const std::vector<Target>& targets,
                                                        const ErrorModel& distal, const ErrorModel& perp,
                                                        RngStream& rng) {
  std::vector<PolarObservation> out;
  const Vec2 origin(world_pose.x, world_pose.y);
  for (const auto& target : targets) {
    const PolarObservation truth = platform_to_sensor(target.position, world_pose, target.object_class);
    if (truth.distance > sensor.max_range || truth.distance <= 0.0) continue;
    if (std::abs(truth.bearing) > 0.5 * sensor.fov + 1e-12) continue;
    if (sensor.miss_probability > 0.0 &&
        std::uniform_real_distribution<double>(0.0, 1.0)(rng) < sensor.miss_probability) {
      continue;
    }
    const double ray = world_pose.theta + truth.bearing;
    const Vec2 u(std::cos(ray), std::sin(ray));
    const Vec2 n(-u.y(), u.x());
    const double e_distal = gaussian(rng, eval_error_model(distal, truth.distance));
    const double e_perp = gaussian(rng, eval_error_model(perp, truth.distance));
    const Vec2 noisy = target.position + e_distal * u + e_perp * n;
    out.push_back(platform_to_sensor(noisy, world_pose, target.object_class));
  }
  if (sensor.clutter_rate > 0.0) {
    const int count = std::poisson_distribution<int>(sensor.clutter_rate)(rng);
    for (int k = 0; k < count; ++k) {
      const double d = sensor.max_range * std::sqrt(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
      const double b = std::uniform_real_distribution<double>(-0.5 * sensor.fov, 0.5 * sensor.fov)(rng);
      out.push_back({d, normalize_angle(b), ObjectClass::other});
    }
  }
  return out;
}

/// Localizer reading: position perturbed along and across the heading by
/// sigma_longitudinal(v), sigma_lateral(v); heading perturbed by
/// heading_sigma; speed reported exactly. Draws are independent per call.
inline PlatformPose synth_localizer(const PlatformPose& truth, const ErrorModel& longitudinal,
                                    const ErrorModel& lateral, double heading_sigma, RngStream& rng) {
  const double e_long = gaussian(rng, eval_error_model(longitudinal, truth.v));
  const double e_lat = gaussian(rng, eval_error_model(lateral, truth.v));
  const double e_head = heading_sigma > 0.0 ? gaussian(rng, heading_sigma) : 0.0;
  const double c = std::cos(truth.theta), s = std::sin(truth.theta);
  return {truth.x + e_long * c - e_lat * s, truth.y + e_long * s + e_lat * c,
          normalize_angle(truth.theta + e_head), truth.v};
}

/// Localizer whose errors persist in time: each component is a stationary
/// unit AR(1) sequence with correlation time tau, scaled by the current
/// model sigma, so every reading is still marginally N(0, sigma(v)^2).
/// tau = 0 gives independent readings.
class CorrelatedLocalizer {
 public:
  CorrelatedLocalizer(double correlation_time, double dt) {
    if (!(correlation_time >= 0)) throw InvalidArgumentError("localizer correlation time must be >= 0");
    if (!(dt > 0)) throw InvalidArgumentError("localizer dt must be > 0");
    rho_ = correlation_time > 0 ? std::exp(-dt / correlation_time) : 0.0;
  }

  PlatformPose read(const PlatformPose& truth, const ErrorModel& longitudinal, const ErrorModel& lateral,
                    double heading_sigma, RngStream& rng) {
    const double innov = std::sqrt(1.0 - rho_ * rho_);
    for (double& z : z_) z = started_ ? rho_ * z + innov * gaussian(rng, 1.0) : gaussian(rng, 1.0);
    started_ = true;
    const double e_long = eval_error_model(longitudinal, truth.v) * z_[0];
    const double e_lat = eval_error_model(lateral, truth.v) * z_[1];
    const double e_head = heading_sigma * z_[2];
    const double c = std::cos(truth.theta), s = std::sin(truth.theta);
    return {truth.x + e_long * c - e_lat * s, truth.y + e_long * s + e_lat * c,
            normalize_angle(truth.theta + e_head), truth.v};
  }

  double rho() const { return rho_; }

 private:
  double rho_ = 0.0;
  bool started_ = false;
  std::array<double, 3> z_{};
};

}  // namespace coopfusion
