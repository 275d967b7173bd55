#pragma once

// Scenario configuration, platform layout and the world simulation that
// produces a ScenarioLog (ground truth, localizer readings, detections).

#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "coopfusion/association.hpp"
#include "coopfusion/local_fusion.hpp"
#include "coopfusion/model_io.hpp"
#include "coopfusion/rng.hpp"
#include "coopfusion/simulator.hpp"

namespace coopfusion {

enum class ErrorModelMode { parameterized, fixed };

inline std::string_view to_string(ErrorModelMode m) {
  return m == ErrorModelMode::parameterized ? "parameterized" : "fixed";
}

inline ErrorModelMode mode_from_string(std::string_view s) {
  if (s == "parameterized") return ErrorModelMode::parameterized;
  if (s == "fixed") return ErrorModelMode::fixed;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected parameterized|fixed)");
}

struct ScenarioConfig {
  std::string name = "sm/sp";
  double s_l = 1.0;
  int cav_count = 2;
  int cis_count = 0;
  double duration = 120.0;
  double tick_rate = 8.0;
  double target_speed = 0.5;
  std::uint64_t seed = 1;

  ModelSet truth_models = default_parameterized_models();
  ModelSet parameterized_models = default_parameterized_models();
  ModelSet fixed_models = default_fixed_models();

  DriveParams drive;
  TrafficLight light;
  SensorSpec camera{"camera", {0.15, 0.0, 0.0}, 160.0 * kPi / 180.0, 6.0, 8.0};
  SensorSpec lidar{"lidar", {0.10, 0.0, 0.0}, 2.0 * kPi, 8.0, 8.0};
  SensorSpec cis_camera{"camera", {0.0, 0.0, 0.0}, 160.0 * kPi / 180.0, 6.0, 8.0};
  double localizer_heading_sigma = 0.01;
  double localizer_correlation_time = 1.0;  // seconds; 0 = independent readings
  double cis_pose_variance = 1e-6;

  AssociationConfig local_association;
  AssociationConfig global_association;
  // Chosen for track consistency (NEES) on figure-8 traffic: curvature steps
  // at the arc joints need far more yaw-rate noise than the library default.
  ProcessNoiseConfig process_noise{1.0, 1.0, 1.0, 0.1, 3.0, 0.125};

  std::size_t tick_count() const { return static_cast<std::size_t>(std::llround(duration * tick_rate)); }
  double dt() const { return 1.0 / tick_rate; }

  void validate() const {
    if (!(s_l > 0)) throw ConfigError("s_l must be > 0");
    if (!(tick_rate > 0)) throw ConfigError("tick_rate must be > 0");
    if (cav_count < 0 || cis_count < 0) throw ConfigError("platform counts must be >= 0");
    if (cis_count > 2) throw ConfigError("at most two CIS placements are defined");
    if (!(duration > 0)) throw ConfigError("duration must be > 0");
    if (!(target_speed > 0)) throw ConfigError("target_speed must be > 0");
    if (!(localizer_correlation_time >= 0)) throw ConfigError("localizer_correlation_time must be >= 0");
    if (!(localizer_heading_sigma >= 0)) throw ConfigError("localizer_heading_sigma must be >= 0");
  }

  const ModelSet& fusion_models(ErrorModelMode mode) const {
    return mode == ErrorModelMode::parameterized ? parameterized_models : fixed_models;
  }
};

/// The eight desk-scale figure-8 setups: map size x density x CIS presence.
inline std::vector<ScenarioConfig> builtin_scenarios(double duration = 120.0, std::uint64_t seed = 1) {
  struct Row {
    const char* name;
    double s_l;
    int cavs;
    int cis;
  };
  constexpr Row rows[] = {{"sm/sp", 1.0, 2, 0},     {"sm/de", 1.0, 4, 0},     {"lg/sp", 2.0, 2, 0},
                          {"lg/de", 2.0, 4, 0},     {"sm/sp/CIS", 1.0, 2, 1}, {"sm/de/CIS", 1.0, 4, 2},
                          {"lg/sp/CIS", 2.0, 2, 1}, {"lg/de/CIS", 2.0, 4, 2}};
  std::vector<ScenarioConfig> out;
  for (const auto& r : rows) {
    ScenarioConfig c;
    c.name = r.name;
    c.s_l = r.s_l;
    c.cav_count = r.cavs;
    c.cis_count = r.cis;
    c.duration = duration;
    c.seed = seed;
    out.push_back(c);
  }
  return out;
}

inline ScenarioConfig builtin_scenario(const std::string& name) {
  for (auto& c : builtin_scenarios()) {
    if (c.name == name) return c;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

// ---- JSON ---------------------------------------------------------------

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline nlohmann::json sensor_to_json(const SensorSpec& s) {
  return {{"name", s.name},
          {"pose", {s.pose.x, s.pose.y, s.pose.theta}},
          {"fov", s.fov},
          {"max_range", s.max_range},
          {"rate", s.rate},
          {"miss_probability", s.miss_probability},
          {"clutter_rate", s.clutter_rate}};
}

inline void sensor_from_json(const nlohmann::json& j, SensorSpec& s) {
  read_opt(j, "name", s.name);
  if (j.contains("pose")) {
    const auto p = j.at("pose").get<std::vector<double>>();
    if (p.size() != 3) throw ConfigError("sensor pose must be [x, y, theta]");
    s.pose = {p[0], p[1], p[2]};
  }
  read_opt(j, "fov", s.fov);
  read_opt(j, "max_range", s.max_range);
  read_opt(j, "rate", s.rate);
  read_opt(j, "miss_probability", s.miss_probability);
  read_opt(j, "clutter_rate", s.clutter_rate);
}

inline nlohmann::json association_to_json(const AssociationConfig& a) {
  return {{"gate_threshold", a.gate_threshold},       {"detection_probability", a.detection_probability},
          {"clutter_density", a.clutter_density},     {"confirm_threshold", a.confirm_threshold},
          {"delete_threshold", a.delete_threshold},   {"weight_threshold", a.weight_threshold},
          {"max_events", a.max_events},               {"merge_threshold", a.merge_threshold}};
}

inline void association_from_json(const nlohmann::json& j, AssociationConfig& a) {
  read_opt(j, "gate_threshold", a.gate_threshold);
  read_opt(j, "detection_probability", a.detection_probability);
  read_opt(j, "clutter_density", a.clutter_density);
  read_opt(j, "confirm_threshold", a.confirm_threshold);
  read_opt(j, "delete_threshold", a.delete_threshold);
  read_opt(j, "weight_threshold", a.weight_threshold);
  read_opt(j, "max_events", a.max_events);
  read_opt(j, "merge_threshold", a.merge_threshold);
}

inline ModelSet model_set_field(const nlohmann::json& j, const std::string& base_dir) {
  if (j.is_string()) {
    std::string path = j.get<std::string>();
    if (!path.empty() && path[0] != '/' && !base_dir.empty()) path = base_dir + "/" + path;
    return load_model_set(path);
  }
  return model_set_from_json(j);
}

}  // namespace detail

inline nlohmann::json to_json(const ScenarioConfig& c) {
  const auto& n = c.process_noise;
  return {{"name", c.name},
          {"s_l", c.s_l},
          {"cav_count", c.cav_count},
          {"cis_count", c.cis_count},
          {"duration", c.duration},
          {"tick_rate", c.tick_rate},
          {"target_speed", c.target_speed},
          {"seed", c.seed},
          {"truth_models", to_json(c.truth_models)},
          {"parameterized_models", to_json(c.parameterized_models)},
          {"fixed_models", to_json(c.fixed_models)},
          {"drive", {{"max_accel", c.drive.max_accel}, {"stop_offset", c.drive.stop_offset}, {"min_gap", c.drive.min_gap}}},
          {"light", {{"green", c.light.green}, {"red", c.light.red}, {"offset", c.light.offset}}},
          {"camera", detail::sensor_to_json(c.camera)},
          {"lidar", detail::sensor_to_json(c.lidar)},
          {"cis_camera", detail::sensor_to_json(c.cis_camera)},
          {"localizer_heading_sigma", c.localizer_heading_sigma},
          {"localizer_correlation_time", c.localizer_correlation_time},
          {"cis_pose_variance", c.cis_pose_variance},
          {"local_association", detail::association_to_json(c.local_association)},
          {"global_association", detail::association_to_json(c.global_association)},
          {"process_noise",
           {{"sigma_ax", n.sigma_ax}, {"sigma_ay", n.sigma_ay}, {"sigma_a", n.sigma_a},
            {"sigma_psi", n.sigma_psi}, {"sigma_psi_dot", n.sigma_psi_dot}, {"dt", n.dt}}}};
}

/// Every field is optional; missing ones keep their defaults. Model fields
/// accept an inline model object or a path relative to `base_dir`.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::string& base_dir = "") {
  using detail::read_opt;
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
  ScenarioConfig c;
  try {
    read_opt(j, "name", c.name);
    read_opt(j, "s_l", c.s_l);
    read_opt(j, "cav_count", c.cav_count);
    read_opt(j, "cis_count", c.cis_count);
    read_opt(j, "duration", c.duration);
    read_opt(j, "tick_rate", c.tick_rate);
    read_opt(j, "target_speed", c.target_speed);
    read_opt(j, "seed", c.seed);
    if (j.contains("models")) c.truth_models = c.parameterized_models = detail::model_set_field(j.at("models"), base_dir);
    if (j.contains("truth_models")) c.truth_models = detail::model_set_field(j.at("truth_models"), base_dir);
    if (j.contains("parameterized_models")) {
      c.parameterized_models = detail::model_set_field(j.at("parameterized_models"), base_dir);
    }
    if (j.contains("fixed_models")) c.fixed_models = detail::model_set_field(j.at("fixed_models"), base_dir);
    if (j.contains("drive")) {
      const auto& d = j.at("drive");
      read_opt(d, "max_accel", c.drive.max_accel);
      read_opt(d, "stop_offset", c.drive.stop_offset);
      read_opt(d, "min_gap", c.drive.min_gap);
    }
    if (j.contains("light")) {
      const auto& l = j.at("light");
      read_opt(l, "green", c.light.green);
      read_opt(l, "red", c.light.red);
      read_opt(l, "offset", c.light.offset);
    }
    if (j.contains("camera")) detail::sensor_from_json(j.at("camera"), c.camera);
    if (j.contains("lidar")) detail::sensor_from_json(j.at("lidar"), c.lidar);
    if (j.contains("cis_camera")) detail::sensor_from_json(j.at("cis_camera"), c.cis_camera);
    read_opt(j, "localizer_heading_sigma", c.localizer_heading_sigma);
    read_opt(j, "localizer_correlation_time", c.localizer_correlation_time);
    read_opt(j, "cis_pose_variance", c.cis_pose_variance);
    if (j.contains("local_association")) detail::association_from_json(j.at("local_association"), c.local_association);
    if (j.contains("global_association")) detail::association_from_json(j.at("global_association"), c.global_association);
    if (j.contains("process_noise")) {
      const auto& n = j.at("process_noise");
      read_opt(n, "sigma_ax", c.process_noise.sigma_ax);
      read_opt(n, "sigma_ay", c.process_noise.sigma_ay);
      read_opt(n, "sigma_a", c.process_noise.sigma_a);
      read_opt(n, "sigma_psi", c.process_noise.sigma_psi);
      read_opt(n, "sigma_psi_dot", c.process_noise.sigma_psi_dot);
      read_opt(n, "dt", c.process_noise.dt);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config " + path);
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "" : path.substr(0, slash);
  try {
    return scenario_from_json(nlohmann::json::parse(in), dir);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario config " + path + ": " + e.what());
  }
}

// ---- platforms ------------------------------------------------------------

enum class PlatformKind { cav, cis };

struct PlatformSpec {
  std::string id;
  PlatformKind kind = PlatformKind::cav;
  SensorPose surveyed_pose;  // CIS only
  std::vector<SensorSpec> sensors;
};

inline std::vector<PlatformSpec> scenario_platforms(const ScenarioConfig& c) {
  std::vector<PlatformSpec> out;
  for (int i = 0; i < c.cav_count; ++i) {
    out.push_back({"cav" + std::to_string(i), PlatformKind::cav, {}, {c.camera, c.lidar}});
  }
  // Traffic cameras facing the crossing from either side of it.
  const SensorPose cis_poses[2] = {{0.0, c.s_l, -0.5 * kPi}, {0.0, -c.s_l, 0.5 * kPi}};
  for (int i = 0; i < c.cis_count; ++i) {
    out.push_back({"cis" + std::to_string(i), PlatformKind::cis, cis_poses[i], {c.cis_camera}});
  }
  return out;
}

inline const SensorPipelineConfig pipeline_for(const SensorSpec& s, const ModelSet& models) {
  const bool lidar = s.name == "lidar";
  return {s.name, s.pose, s.fov, s.max_range, s.rate,
          lidar ? models.lidar_distal : models.camera_distal,
          lidar ? models.lidar_perpendicular : models.camera_perpendicular};
}

// ---- log ------------------------------------------------------------------

struct VehicleTruth {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double s = 0.0;  // arc length along the path
};

struct LocalizerReading {
  std::string platform_id;
  PlatformPose pose;
  std::optional<EgoMotion> odometry;
};

struct SensorReading {
  std::string platform_id;
  std::string sensor;
  std::vector<PolarObservation> observations;
};

struct TickRecord {
  long tick = 0;
  double t = 0.0;
  std::vector<VehicleTruth> truth;
  std::vector<LocalizerReading> localizer;
  std::vector<SensorReading> sensors;
};

struct ScenarioLog {
  ScenarioConfig config;
  std::vector<PlatformSpec> platforms;
  std::vector<TickRecord> ticks;
};

/// Runs the world for config.duration and records everything fusion needs.
inline ScenarioLog simulate(const ScenarioConfig& config) {
  config.validate();
  ScenarioLog log{config, scenario_platforms(config), {}};
  const FigureEightPath path(config.s_l);
  DriveParams drive = config.drive;
  drive.target_speed = config.target_speed;
  const double dt = config.dt();
  const std::size_t n_ticks = config.tick_count();

  std::vector<Vehicle> vehicles;
  for (int i = 0; i < config.cav_count; ++i) {
    vehicles.push_back({"cav" + std::to_string(i), path.length() * i / config.cav_count, 0.0, false});
  }

  std::map<std::string, RngStream> streams;
  auto stream = [&](const std::string& name) -> RngStream& {
    auto it = streams.find(name);
    if (it == streams.end()) it = streams.emplace(name, make_stream(config.seed, name)).first;
    return it->second;
  };

  std::vector<CorrelatedLocalizer> localizers(vehicles.size(),
                                              CorrelatedLocalizer(config.localizer_correlation_time, dt));
  std::vector<VehicleTruth> previous;
  log.ticks.reserve(n_ticks);
  for (std::size_t k = 0; k < n_ticks; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k > 0) {
      std::vector<Vehicle> next;
      for (std::size_t i = 0; i < vehicles.size(); ++i) {
        std::optional<double> gap;
        for (std::size_t j = 0; j < vehicles.size(); ++j) {
          if (j == i) continue;
          const double g = path.wrap(vehicles[j].s - vehicles[i].s);
          if (!gap || g < *gap) gap = g;
        }
        const StopLineAhead stop = next_stop_line(path, vehicles[i].s, drive);
        const LightState light = config.light.is_green(stop.direction, t) ? LightState::green : LightState::red;
        next.push_back(step_vehicle(vehicles[i], dt, light, path, drive, gap));
      }
      vehicles = std::move(next);
    }

    TickRecord rec;
    rec.tick = static_cast<long>(k);
    rec.t = t;
    for (const auto& v : vehicles) {
      const PathPoint p = path.at(v.s);
      rec.truth.push_back({v.id, p.x, p.y, p.heading, v.v, v.s});
    }

    for (std::size_t i = 0; i < rec.truth.size(); ++i) {
      const VehicleTruth& vt = rec.truth[i];
      LocalizerReading loc;
      loc.platform_id = vt.id;
      loc.pose = localizers[i].read({vt.x, vt.y, vt.theta, vt.v}, config.truth_models.localizer_longitudinal,
                                    config.truth_models.localizer_lateral, config.localizer_heading_sigma,
                                    stream(vt.id + "/localizer"));
      if (!previous.empty()) {
        const VehicleTruth& pv = previous[i];
        const Vec2 d = rotation(-pv.theta) * Vec2(vt.x - pv.x, vt.y - pv.y);
        loc.odometry = EgoMotion{d.x(), d.y(), normalize_angle(vt.theta - pv.theta)};
      }
      rec.localizer.push_back(loc);
    }

    for (const auto& platform : log.platforms) {
      double px, py, ptheta;
      std::vector<Target> targets;
      if (platform.kind == PlatformKind::cav) {
        const auto& self = *std::find_if(rec.truth.begin(), rec.truth.end(),
                                         [&](const VehicleTruth& v) { return v.id == platform.id; });
        px = self.x;
        py = self.y;
        ptheta = self.theta;
      } else {
        px = platform.surveyed_pose.x;
        py = platform.surveyed_pose.y;
        ptheta = platform.surveyed_pose.theta;
      }
      for (const auto& v : rec.truth) {
        if (v.id != platform.id) targets.push_back({Vec2(v.x, v.y), ObjectClass::vehicle});
      }
      for (const auto& sensor : platform.sensors) {
        const bool lidar = sensor.name == "lidar";
        const ModelSet& m = config.truth_models;
        rec.sensors.push_back({platform.id, sensor.name,
                               synth_sensor_frame(sensor, sensor_world_pose(sensor.pose, px, py, ptheta), targets,
                                                  lidar ? m.lidar_distal : m.camera_distal,
                                                  lidar ? m.lidar_perpendicular : m.camera_perpendicular,
                                                  stream(platform.id + "/" + sensor.name))});
      }
    }
    previous = rec.truth;
    log.ticks.push_back(std::move(rec));
  }
  return log;
}

}  // namespace coopfusion
