#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "coopfusion/scenario.hpp"
#include "coopfusion/simulator.hpp"
#include "oracles/numerics.hpp"

using namespace coopfusion;

namespace {

ErrorModel floor_model(PredictorKind k) { return ErrorModel::fixed(0.0, k); }

double sample_sigma(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x * x;
  return std::sqrt(sum / static_cast<double>(xs.size()));
}

}  // namespace

TEST(FigureEight, TurnRadiusIsHalfStraight) {
  EXPECT_DOUBLE_EQ(figure_eight_path(1.0).turn_radius(), 0.5);
  EXPECT_DOUBLE_EQ(figure_eight_path(2.0).turn_radius(), 1.0);
  EXPECT_THROW(figure_eight_path(0.0), InvalidArgumentError);
}

TEST(FigureEight, Closed) {
  for (double sl : {1.0, 2.0}) {
    const auto path = figure_eight_path(sl);
    const auto a = path.at(0.0), b = path.at(path.length());
    EXPECT_NEAR(a.x, b.x, 1e-12);
    EXPECT_NEAR(a.y, b.y, 1e-12);
    EXPECT_NEAR(normalize_angle(a.heading - b.heading), 0.0, 1e-12);
    const auto c = path.at(path.length() - 1e-9);
    EXPECT_NEAR(a.x, c.x, 1e-8);
    EXPECT_NEAR(a.y, c.y, 1e-8);
  }
}

TEST(FigureEight, LengthMatchesNumericArcLength) {
  for (double sl : {1.0, 2.0}) {
    const auto path = figure_eight_path(sl);
    const double h = 1e-6;
    auto speed = [&](double s) {
      const auto p = path.at(s + h), m = path.at(s - h);
      return std::hypot(p.x - m.x, p.y - m.y) / (2.0 * h);
    };
    // Integrate each piece separately so no quadrature node straddles a joint.
    const double arc = 1.5 * kPi * path.turn_radius();
    const double joints[] = {0.0, sl, sl + arc, 2 * sl + arc, 2 * sl + 2 * arc};
    double total = 0.0;
    for (int k = 0; k < 4; ++k) total += oracles::adaptive_simpson(speed, joints[k] + 1e-5, joints[k + 1] - 1e-5, 1e-10);
    total += 8 * 1e-5;  // the excluded slivers are straight to first order
    EXPECT_NEAR(total, path.length(), 1e-6);
    EXPECT_NEAR(path.length(), 2 * sl + 1.5 * kPi * sl, 1e-12);
  }
}

TEST(FigureEight, ContinuouslyDifferentiable) {
  const auto path = figure_eight_path(1.0);
  const double arc = 1.5 * kPi * 0.5;
  for (double j : {1.0, 1.0 + arc, 2.0 + arc, 2.0 + 2 * arc}) {
    const auto a = path.at(j - 1e-9), b = path.at(j + 1e-9);
    EXPECT_NEAR(a.x, b.x, 1e-8);
    EXPECT_NEAR(a.y, b.y, 1e-8);
    EXPECT_NEAR(normalize_angle(a.heading - b.heading), 0.0, 1e-8);
  }
  // Heading agrees with the direction of travel everywhere.
  for (double s = 0.01; s < path.length(); s += 0.037) {
    const auto p = path.at(s), q = path.at(s + 1e-7);
    EXPECT_NEAR(normalize_angle(std::atan2(q.y - p.y, q.x - p.x) - p.heading), 0.0, 1e-5);
  }
}

TEST(FigureEight, StraightsCrossAtOrigin) {
  const auto path = figure_eight_path(2.0);
  for (double s : path.crossings()) {
    EXPECT_NEAR(path.at(s).x, 0.0, 1e-12);
    EXPECT_NEAR(path.at(s).y, 0.0, 1e-12);
  }
  EXPECT_NEAR(std::abs(normalize_angle(path.at(path.crossings()[0]).heading - path.at(path.crossings()[1]).heading)),
              kPi / 2, 1e-12);
}

TEST(StepVehicle, CruisesAtTargetSpeed) {
  const auto path = figure_eight_path(1.0);
  DriveParams p;
  Vehicle v{"cav0", 0.0, 0.5};
  for (int k = 0; k < 40; ++k) {
    v = step_vehicle(v, 0.125, LightState::green, path, p);
    EXPECT_EQ(v.v, 0.5);
  }
}

TEST(StepVehicle, StaysStoppedAtRedStopLine) {
  const auto path = figure_eight_path(1.0);
  DriveParams p;
  const double line = path.crossings()[0] - p.stop_offset * path.straight_length();
  Vehicle v{"cav0", line, 0.0};
  for (int k = 0; k < 20; ++k) {
    v = step_vehicle(v, 0.125, LightState::red, path, p);
    EXPECT_EQ(v.v, 0.0);
    EXPECT_NEAR(v.s, line, 1e-12);
  }
}

TEST(StepVehicle, BrakingDistanceMatchesKinematics) {
  const auto path = figure_eight_path(2.0);
  DriveParams p;
  const double line = path.crossings()[0] - p.stop_offset * path.straight_length();
  Vehicle v{"cav0", line - 1.0, 0.5};
  double brake_start = -1.0, v0 = 0.0, decel = 0.0;
  for (int k = 0; k < 100 && !(brake_start >= 0 && v.v == 0.0); ++k) {
    const Vehicle next = step_vehicle(v, 0.125, LightState::red, path, p);
    if (brake_start < 0 && next.v < v.v) {
      brake_start = v.s;
      v0 = v.v;
      decel = (v.v - next.v) / 0.125;
    }
    v = next;
  }
  ASSERT_GE(brake_start, 0.0);
  EXPECT_LE(decel, p.max_accel + 1e-12);
  EXPECT_EQ(v.v, 0.0);
  // Uniform deceleration a covers v0^2 / (2a) before stopping; the final tick
  // may overshoot by at most v dt / 2 at the speed it had entering that tick.
  EXPECT_NEAR(v.s - brake_start, v0 * v0 / (2.0 * decel), 0.5 * v0 * 0.125);
  EXPECT_NEAR(v.s, line, 0.5 * v0 * 0.125);
}

TEST(StepVehicle, AcceleratesAtLimitFromStandstill) {
  const auto path = figure_eight_path(1.0);
  Vehicle v{"cav0", 0.0, 0.0};
  v = step_vehicle(v, 0.125, LightState::green, path, {});
  EXPECT_NEAR(v.v, 0.125, 1e-15);
  EXPECT_NEAR(v.s, 0.5 * 0.125 * 0.125, 1e-15);
}

TEST(StepVehicle, KeepsGapBehindLeader) {
  const auto path = figure_eight_path(2.0);
  DriveParams p;
  Vehicle v{"cav0", 0.0, 0.5};
  const double leader = 1.5;  // stationary leader
  for (int k = 0; k < 80; ++k) v = step_vehicle(v, 0.125, LightState::green, path, p, leader - v.s);
  EXPECT_LE(v.s, leader - p.min_gap + 0.5 * 0.5 * 0.125);
  EXPECT_EQ(v.v, 0.0);
}

TEST(StepVehicle, RejectsNonPositiveDt) {
  EXPECT_THROW(step_vehicle({}, 0.0, LightState::green, figure_eight_path(1.0), {}), InvalidArgumentError);
}

TEST(SynthSensor, OutsideFieldOfViewAbsent) {
  SensorSpec cam{"camera", {}, 160.0 * kPi / 180.0, 6.0, 8.0};
  RngStream rng = make_stream(1, "t");
  const ErrorModel d = ErrorModel::fixed(0.05, PredictorKind::distance);
  const double b = 100.0 * kPi / 180.0;
  EXPECT_TRUE(synth_sensor_frame(cam, {}, {{Vec2(std::cos(b), std::sin(b))}}, d, d, rng).empty());
  const double inside = 70.0 * kPi / 180.0;
  EXPECT_EQ(synth_sensor_frame(cam, {}, {{Vec2(std::cos(inside), std::sin(inside))}}, d, d, rng).size(), 1u);
  EXPECT_TRUE(synth_sensor_frame(cam, {}, {{Vec2(7.0, 0.0)}}, d, d, rng).empty());
}

TEST(SynthSensor, ZeroNoiseEqualsTruth) {
  SensorSpec lidar{"lidar", {}, 2 * kPi, 8.0, 8.0};
  RngStream rng = make_stream(1, "t");
  const SensorPose pose{0.3, -0.2, 0.9};
  const Vec2 target(-1.0, 1.5);
  const auto obs = synth_sensor_frame(lidar, pose, {{target}}, floor_model(PredictorKind::distance),
                                      floor_model(PredictorKind::distance), rng);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_LT((sensor_to_platform(obs[0], pose).position - target).norm(), 1e-5);
}

TEST(SynthSensor, EmpiricalDistalSigmaMatchesModel) {
  SensorSpec cam{"camera", {}, 2 * kPi, 8.0, 8.0};
  RngStream rng = make_stream(9, "camera");
  const ModelSet m = default_parameterized_models();
  std::vector<double> distal, perp;
  for (int i = 0; i < 100000; ++i) {
    const auto obs = synth_sensor_frame(cam, {}, {{Vec2(0.6, 0.8)}}, m.camera_distal, m.camera_perpendicular, rng);
    const Vec2 p = sensor_to_platform(obs.at(0), {}).position;
    distal.push_back(p.dot(Vec2(0.6, 0.8)) - 1.0);
    perp.push_back(p.dot(Vec2(-0.8, 0.6)));
  }
  EXPECT_NEAR(sample_sigma(distal), 0.0643, 0.03 * 0.0643);
  EXPECT_NEAR(sample_sigma(perp), 0.0347, 0.03 * 0.0347);
}

TEST(SynthSensor, MissProbabilityAndClutter) {
  SensorSpec s{"lidar", {}, 2 * kPi, 8.0, 8.0, 1.0, 0.0};
  RngStream rng = make_stream(2, "x");
  const ErrorModel d = ErrorModel::fixed(0.05, PredictorKind::distance);
  EXPECT_TRUE(synth_sensor_frame(s, {}, {{Vec2(1, 0)}}, d, d, rng).empty());
  s.miss_probability = 0.0;
  s.clutter_rate = 3.0;
  std::size_t total = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto f = synth_sensor_frame(s, {}, {}, d, d, rng);
    for (const auto& o : f) EXPECT_LE(o.distance, s.max_range);
    total += f.size();
  }
  EXPECT_NEAR(static_cast<double>(total) / 2000.0, 3.0, 0.15);
}

TEST(SynthLocalizer, StandstillLongitudinalSigma) {
  const ModelSet m = default_parameterized_models();
  RngStream rng = make_stream(4, "loc");
  std::vector<double> lon;
  for (int i = 0; i < 100000; ++i) {
    const auto p = synth_localizer({0, 0, 0.0, 0.0}, m.localizer_longitudinal, m.localizer_lateral, 0.01, rng);
    lon.push_back(p.x);
    EXPECT_EQ(p.v, 0.0);
  }
  EXPECT_NEAR(sample_sigma(lon), 0.0428, 0.03 * 0.0428);
}

TEST(SynthLocalizer, ZeroNoiseEqualsTruth) {
  RngStream rng = make_stream(4, "loc");
  const PlatformPose truth{1.0, -2.0, 0.7, 0.4};
  const auto p = synth_localizer(truth, floor_model(PredictorKind::speed), floor_model(PredictorKind::speed), 0.0, rng);
  EXPECT_NEAR(p.x, truth.x, 1e-5);
  EXPECT_NEAR(p.y, truth.y, 1e-5);
  EXPECT_EQ(p.theta, truth.theta);
  EXPECT_EQ(p.v, truth.v);
}

TEST(SynthLocalizer, ScatterGrowsWithSpeed) {
  const ModelSet m = default_parameterized_models();
  auto scatter = [&](double v) {
    RngStream rng = make_stream(5, "loc");
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const auto p = synth_localizer({0, 0, 0.3, v}, m.localizer_longitudinal, m.localizer_lateral, 0.0, rng);
      sum += p.x * p.x + p.y * p.y;
    }
    return sum / 20000.0;
  };
  EXPECT_GT(scatter(0.5), scatter(0.0));
}

TEST(CorrelatedLocalizer, MarginalSigmaAndLagCorrelation) {
  const ModelSet m = default_parameterized_models();
  CorrelatedLocalizer loc(1.0, 0.125);
  EXPECT_NEAR(loc.rho(), std::exp(-0.125), 1e-15);
  RngStream rng = make_stream(6, "loc");
  std::vector<double> lon;
  for (int i = 0; i < 200000; ++i) lon.push_back(loc.read({0, 0, 0, 0.5}, m.localizer_longitudinal, m.localizer_lateral, 0.0, rng).x);
  EXPECT_NEAR(sample_sigma(lon), 0.0819, 0.03 * 0.0819);
  double c = 0.0, v = 0.0;
  for (std::size_t i = 1; i < lon.size(); ++i) {
    c += lon[i] * lon[i - 1];
    v += lon[i - 1] * lon[i - 1];
  }
  EXPECT_NEAR(c / v, std::exp(-0.125), 0.02);
  CorrelatedLocalizer white(0.0, 0.125);
  EXPECT_EQ(white.rho(), 0.0);
  EXPECT_THROW(CorrelatedLocalizer(-1.0, 0.125), InvalidArgumentError);
}

TEST(Simulate, GroundTruthKinematicallyConsistentAndOnPath) {
  for (const char* name : {"sm/de", "lg/sp"}) {
    ScenarioConfig cfg = builtin_scenario(name);
    cfg.duration = 60.0;
    const auto log = simulate(cfg);
    const auto path = figure_eight_path(cfg.s_l);
    ASSERT_EQ(log.ticks.size(), cfg.tick_count());
    for (std::size_t k = 0; k < log.ticks.size(); ++k) {
      for (std::size_t i = 0; i < log.ticks[k].truth.size(); ++i) {
        const auto& v = log.ticks[k].truth[i];
        const auto p = path.at(v.s);
        EXPECT_LT(std::hypot(v.x - p.x, v.y - p.y), 1e-6);
        EXPECT_GE(v.v, 0.0);
        EXPECT_LE(v.v, cfg.target_speed + 1e-12);
        if (k > 0) {
          const auto& u = log.ticks[k - 1].truth[i];
          EXPECT_NEAR((v.s - u.s) / cfg.dt(), 0.5 * (u.v + v.v), 1e-6) << name << " tick " << k;
        }
      }
    }
  }
}

TEST(Simulate, TrafficStopsAndGoes) {
  ScenarioConfig cfg = builtin_scenario("sm/sp");
  cfg.duration = 60.0;
  const auto log = simulate(cfg);
  std::size_t stopped = 0, cruising = 0;
  std::map<std::string, bool> halted, restarted;
  for (const auto& t : log.ticks) {
    for (const auto& v : t.truth) {
      stopped += v.v == 0.0;
      cruising += v.v == cfg.target_speed;
      if (v.v == 0.0) halted[v.id] = true;
      if (halted[v.id] && v.v == cfg.target_speed) restarted[v.id] = true;
    }
  }
  EXPECT_GT(stopped, 0u);
  EXPECT_GT(cruising, 100u);
  EXPECT_FALSE(restarted.empty());
}

TEST(Simulate, Deterministic) {
  ScenarioConfig cfg = builtin_scenario("sm/de/CIS");
  cfg.duration = 10.0;
  const auto a = simulate(cfg), b = simulate(cfg);
  ASSERT_EQ(a.ticks.size(), b.ticks.size());
  for (std::size_t k = 0; k < a.ticks.size(); ++k) {
    ASSERT_EQ(a.ticks[k].sensors.size(), b.ticks[k].sensors.size());
    for (std::size_t s = 0; s < a.ticks[k].sensors.size(); ++s) {
      const auto& x = a.ticks[k].sensors[s].observations;
      const auto& y = b.ticks[k].sensors[s].observations;
      ASSERT_EQ(x.size(), y.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(x[i].distance, y[i].distance);
        EXPECT_EQ(x[i].bearing, y[i].bearing);
      }
    }
  }
}

TEST(Simulate, RemovingPlatformLeavesOtherStreamsIntact) {
  ScenarioConfig with = builtin_scenario("sm/de/CIS");
  with.duration = 20.0;
  ScenarioConfig without = with;
  without.cis_count = 0;
  const auto a = simulate(with), b = simulate(without);
  for (std::size_t k = 0; k < a.ticks.size(); ++k) {
    std::size_t matched = 0;
    for (const auto& sa : a.ticks[k].sensors) {
      for (const auto& sb : b.ticks[k].sensors) {
        if (sa.platform_id != sb.platform_id || sa.sensor != sb.sensor) continue;
        ASSERT_EQ(sa.observations.size(), sb.observations.size());
        for (std::size_t i = 0; i < sa.observations.size(); ++i) {
          EXPECT_EQ(sa.observations[i].distance, sb.observations[i].distance);
          EXPECT_EQ(sa.observations[i].bearing, sb.observations[i].bearing);
        }
        ++matched;
      }
    }
    EXPECT_EQ(matched, b.ticks[k].sensors.size());
    for (std::size_t i = 0; i < a.ticks[k].localizer.size(); ++i) {
      EXPECT_EQ(a.ticks[k].localizer[i].pose.x, b.ticks[k].localizer[i].pose.x);
    }
  }
}

TEST(Simulate, NamedStreamsAreDistinct) {
  RngStream a = make_stream(1, "cav0/camera"), b = make_stream(1, "cav0/lidar"), c = make_stream(2, "cav0/camera");
  RngStream a2 = make_stream(1, "cav0/camera");
  const auto x = a();
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
  EXPECT_EQ(x, a2());
}

TEST(Simulate, CisPlacementAndPlatforms) {
  const auto platforms = scenario_platforms(builtin_scenario("lg/de/CIS"));
  ASSERT_EQ(platforms.size(), 6u);
  EXPECT_EQ(platforms[4].kind, PlatformKind::cis);
  EXPECT_DOUBLE_EQ(platforms[4].surveyed_pose.y, 2.0);
  EXPECT_DOUBLE_EQ(platforms[4].surveyed_pose.theta, -kPi / 2);
  EXPECT_DOUBLE_EQ(platforms[5].surveyed_pose.y, -2.0);
  EXPECT_EQ(platforms[0].sensors.size(), 2u);
}

TEST(ScenarioConfigJson, RoundTripAndValidation) {
  ScenarioConfig c = builtin_scenario("lg/sp/CIS");
  c.seed = 99;
  c.local_association.merge_threshold = 0.5;
  const auto back = scenario_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back), to_json(c));
  auto j = to_json(c);
  j["s_l"] = -1.0;
  EXPECT_THROW(scenario_from_json(j).validate(), ConfigError);
  EXPECT_THROW(builtin_scenario("xl/sp"), ConfigError);
  EXPECT_THROW(mode_from_string("adaptive"), ConfigError);
}
