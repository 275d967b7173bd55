#pragma once

// Synthetic calibration data: the bench procedure of parking targets at
// known distances in front of a sensor (and driving the localizer at known
// speeds), matched to truth and split into error components.

#include <string>
#include <vector>

#include "coopfusion/calibration.hpp"
#include "coopfusion/rng.hpp"
#include "coopfusion/simulator.hpp"

namespace coopfusion {

struct CalibrationSweep {
  std::size_t samples_per_model = 50000;
  double near_distance = 0.25;
  double far_distance = 3.0;
  double near_bearing = 0.3;
  double far_bearing = -0.3;
  double localizer_speed = 0.5;  // the other localizer setting is standstill
  double max_match_distance = 1.0;
  std::uint64_t seed = 1;
};

/// Samples for all six models; each (source, component) group holds
/// samples_per_model rows, split evenly between the two settings.
inline std::vector<CalibrationSample> generate_calibration_samples(const ModelSet& truth,
                                                                   const CalibrationSweep& sweep = {}) {
  if (sweep.samples_per_model < 4) throw InvalidArgumentError("calibration sweep needs >= 4 samples per model");
  std::vector<CalibrationSample> out;
  out.reserve(6 * sweep.samples_per_model);
  const SensorPose origin{0.0, 0.0, 0.0};
  const std::vector<Vec2> targets = {
      Vec2(sweep.near_distance * std::cos(sweep.near_bearing), sweep.near_distance * std::sin(sweep.near_bearing)),
      Vec2(sweep.far_distance * std::cos(sweep.far_bearing), sweep.far_distance * std::sin(sweep.far_bearing))};

  struct Bench {
    const char* name;
    const ErrorModel& distal;
    const ErrorModel& perp;
  };
  for (const Bench& b : {Bench{"camera", truth.camera_distal, truth.camera_perpendicular},
                         Bench{"lidar", truth.lidar_distal, truth.lidar_perpendicular}}) {
    SensorSpec spec{b.name, origin, 2.0 * kPi, 2.0 * sweep.far_distance, 8.0};
    RngStream rng = make_stream(sweep.seed, std::string("calibration/") + b.name);
    std::vector<Target> world;
    for (const auto& t : targets) world.push_back({t, ObjectClass::other});
    std::size_t produced = 0;
    while (produced < sweep.samples_per_model) {
      const auto frame = synth_sensor_frame(spec, origin, world, b.distal, b.perp, rng);
      std::vector<Vec2> points;
      for (const auto& o : frame) points.push_back(sensor_to_platform(o, origin).position);
      const MatchResult m = match_observations_to_truth(Vec2::Zero(), points, targets, sweep.max_match_distance);
      for (const auto& pair : m.pairs) {
        if (produced >= sweep.samples_per_model) break;
        out.push_back({pair.true_range, pair.distal_error, "distal", b.name});
        out.push_back({pair.true_range, pair.perp_error, "perpendicular", b.name});
        ++produced;
      }
    }
  }

  RngStream rng = make_stream(sweep.seed, "calibration/localizer");
  for (std::size_t k = 0; k < sweep.samples_per_model; ++k) {
    const double v = (k % 2 == 0) ? 0.0 : sweep.localizer_speed;
    const PlatformPose pose{0.0, 0.0, 0.0, v};
    const PlatformPose meas = synth_localizer(pose, truth.localizer_longitudinal, truth.localizer_lateral, 0.0, rng);
    out.push_back({v, meas.x, "longitudinal", "localizer"});
    out.push_back({v, meas.y, "lateral", "localizer"});
  }
  return out;
}

}  // namespace coopfusion
