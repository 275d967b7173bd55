#pragma once

// Per-platform fusion: sensor frames -> predicted covariances -> JPDA -> EKF
// tracks in the platform (rear-axle) frame.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coopfusion/association.hpp"
#include "coopfusion/error_models.hpp"

namespace coopfusion {

struct SensorPipelineConfig {
  std::string name;
  SensorPose pose;
  double fov = 2.0 * kPi;
  double max_range = 10.0;
  double rate = 8.0;
  ErrorModel distal_model;
  ErrorModel perp_model;

  void validate() const {
    if (!(fov > 0 && fov <= 2.0 * kPi + 1e-12)) throw InvalidArgumentError(name + ": fov must be in (0, 2pi]");
    if (!(max_range > 0)) throw InvalidArgumentError(name + ": max_range must be > 0");
    if (!(rate > 0)) throw InvalidArgumentError(name + ": rate must be > 0");
    if (distal_model.coefficients.empty() || perp_model.coefficients.empty()) {
      throw InvalidModelError(name + ": error model has no coefficients");
    }
  }
};

/// Platform motion between two consecutive frames, expressed in the earlier
/// platform frame (odometry).
struct EgoMotion {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

/// Re-expresses a platform-frame track in the platform frame after `motion`.
inline TrackEstimate compensate_ego_motion(const TrackEstimate& t, const EgoMotion& motion) {
  const Mat2 r = rotation(-motion.dtheta);
  TrackEstimate out = t;
  out.mean.head<2>() = r * (t.position() - Vec2(motion.dx, motion.dy));
  out.mean[3] = normalize_angle(t.mean[3] - motion.dtheta);
  Mat5 j = Mat5::Identity();
  j.topLeftCorner<2, 2>() = r;
  out.covariance = symmetrized(j * t.covariance * j.transpose());
  return out;
}

struct LocalFrame {
  double timestamp = 0.0;
  std::map<std::string, std::vector<PolarObservation>> observations;  // by pipeline name
  std::optional<EgoMotion> ego_motion;
};

class LocalFusion {
 public:
  LocalFusion(std::string platform_id, std::vector<SensorPipelineConfig> pipelines,
              AssociationConfig assoc = {}, ProcessNoiseConfig noise = {})
      : platform_id_(std::move(platform_id)), pipelines_(std::move(pipelines)), tracker_(assoc, noise) {
    for (const auto& p : pipelines_) p.validate();
  }

  /// Processes one synchronized frame; returns confirmed tracks.
  std::vector<Track> step(const LocalFrame& frame) {
    if (last_timestamp_ && !(frame.timestamp > *last_timestamp_)) {
      throw FrameRejectedError(platform_id_ + ": stale frame timestamp " + std::to_string(frame.timestamp));
    }
    std::vector<Tracker::Detection> detections;
    for (const auto& [name, list] : frame.observations) {
      const SensorPipelineConfig& p = pipeline(name);
      for (const auto& obs : list) {
        detections.push_back({name, observation_estimate(obs, p.pose, p.distal_model, p.perp_model),
                              obs.object_class});
      }
    }

    if (frame.ego_motion) {
      const EgoMotion m = *frame.ego_motion;
      tracker_.transform([&](const TrackEstimate& t) { return compensate_ego_motion(t, m); });
    }
    const double dt = last_timestamp_ ? frame.timestamp - *last_timestamp_
                                      : tracker_.process_noise_config().dt;
    tracker_.predict(dt);
    tracker_.update(detections);
    last_timestamp_ = frame.timestamp;
    return tracker_.confirmed();
  }

  const std::string& platform_id() const { return platform_id_; }
  const std::vector<SensorPipelineConfig>& pipelines() const { return pipelines_; }
  const std::vector<Track>& tracks() const { return tracker_.tracks(); }

 private:
  const SensorPipelineConfig& pipeline(const std::string& name) const {
    for (const auto& p : pipelines_) {
      if (p.name == name) return p;
    }
    throw InvalidArgumentError(platform_id_ + ": frame references unknown pipeline '" + name + "'");
  }

  std::string platform_id_;
  std::vector<SensorPipelineConfig> pipelines_;
  Tracker tracker_;
  std::optional<double> last_timestamp_;
};

inline std::vector<Track> local_fusion_step(LocalFusion& state, const LocalFrame& frame) {
  return state.step(frame);
}

}  // namespace coopfusion
