#pragma once

// Predictor-driven sensing and localization error models, and the oriented
// 2x2 covariances built from them.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "coopfusion/errors.hpp"
#include "coopfusion/linalg.hpp"

namespace coopfusion {

enum class ObjectClass { vehicle, cone, other };

inline std::string_view to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::vehicle: return "vehicle";
    case ObjectClass::cone: return "cone";
    case ObjectClass::other: return "other";
  }
  return "other";
}

inline ObjectClass object_class_from_string(std::string_view s) {
  if (s == "vehicle") return ObjectClass::vehicle;
  if (s == "cone") return ObjectClass::cone;
  if (s == "other") return ObjectClass::other;
  throw ConfigError("unknown object class '" + std::string(s) + "'");
}

/// Raw detection of one sensor pipeline: range and bearing to the centroid,
/// bearing relative to the sensor boresight.
struct PolarObservation {
  double distance = 0.0;
  double bearing = 0.0;
  ObjectClass object_class = ObjectClass::vehicle;
};

enum class PredictorKind { distance, speed };

inline std::string_view to_string(PredictorKind k) {
  return k == PredictorKind::distance ? "distance" : "speed";
}

/// sigma(p) = sum_k coefficients[k] * p^k, in meters. A single coefficient
/// is the fixed (mean) model.
struct ErrorModel {
  PredictorKind predictor = PredictorKind::distance;
  std::vector<double> coefficients;

  static ErrorModel fixed(double sigma, PredictorKind kind) { return {kind, {sigma}}; }
  static ErrorModel affine(double intercept, double slope, PredictorKind kind) {
    return {kind, {intercept, slope}};
  }

  std::size_t degree() const { return coefficients.empty() ? 0 : coefficients.size() - 1; }
  bool operator==(const ErrorModel&) const = default;
};

/// Floor applied when a fitted polynomial dips to or below zero.
inline constexpr double kSigmaFloor = 1e-6;

inline double eval_error_model(const ErrorModel& model, double predictor) {
  if (model.coefficients.empty()) throw InvalidModelError("error model has no coefficients");
  if (!(predictor >= 0.0)) throw InvalidArgumentError("error model predictor must be >= 0");
  double value = 0.0;
  for (auto it = model.coefficients.rbegin(); it != model.coefficients.rend(); ++it) {
    value = value * predictor + *it;
  }
  return value > kSigmaFloor ? value : kSigmaFloor;
}

/// Sensor mounting pose in the platform (rear-axle) frame.
struct SensorPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct GaussianEstimate {
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Identity();
};

/// Platform pose in the world frame plus its measured speed.
struct PlatformPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
};

struct PlatformPoint {
  Vec2 position = Vec2::Zero();
  double bearing = 0.0;  // angle of the sensor ray in the platform frame
};

inline PlatformPoint sensor_to_platform(const PolarObservation& obs, const SensorPose& pose) {
  const double phi = normalize_angle(pose.theta + obs.bearing);
  return {Vec2(pose.x + obs.distance * std::cos(phi), pose.y + obs.distance * std::sin(phi)), phi};
}

/// Inverse of sensor_to_platform.
inline PolarObservation platform_to_sensor(const Vec2& point, const SensorPose& pose,
                                           ObjectClass cls = ObjectClass::vehicle) {
  const Vec2 rel = point - Vec2(pose.x, pose.y);
  return {rel.norm(), normalize_angle(std::atan2(rel.y(), rel.x()) - pose.theta), cls};
}

/// R(angle) * diag(sigma_a^2, sigma_b^2) * R(angle)^T; sigma_a lies along the
/// direction `angle`, sigma_b across it.
inline Mat2 rotated_covariance(double sigma_a, double sigma_b, double angle) {
  if (!(sigma_a > 0.0) || !(sigma_b > 0.0)) {
    throw InvalidArgumentError("rotated_covariance: standard deviations must be > 0");
  }
  const Mat2 r = rotation(angle);
  const Vec2 diag(sigma_a * sigma_a, sigma_b * sigma_b);
  return symmetrized(r * diag.asDiagonal() * r.transpose());
}

/// Converts one detection into a platform-frame Gaussian whose covariance is
/// predicted from the measured distance.
inline GaussianEstimate observation_estimate(const PolarObservation& obs, const SensorPose& pose,
                                             const ErrorModel& distal, const ErrorModel& perp) {
  if (distal.predictor != PredictorKind::distance || perp.predictor != PredictorKind::distance) {
    throw InvalidModelError("observation_estimate requires distance-predictor models");
  }
  const PlatformPoint p = sensor_to_platform(obs, pose);
  return {p.position, rotated_covariance(eval_error_model(distal, obs.distance),
                                         eval_error_model(perp, obs.distance), p.bearing)};
}

/// Localization covariance in the world frame, predicted from measured speed
/// and oriented along the heading.
inline Mat2 localization_covariance(const PlatformPose& pose, const ErrorModel& longitudinal,
                                    const ErrorModel& lateral) {
  if (longitudinal.predictor != PredictorKind::speed || lateral.predictor != PredictorKind::speed) {
    throw InvalidModelError("localization_covariance requires speed-predictor models");
  }
  return rotated_covariance(eval_error_model(longitudinal, pose.v), eval_error_model(lateral, pose.v),
                            pose.theta);
}

}  // namespace coopfusion
