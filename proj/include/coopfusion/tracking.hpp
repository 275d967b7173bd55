#pragma once

// CTRV extended Kalman filter shared by local and global fusion.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "coopfusion/error_models.hpp"
#include "coopfusion/errors.hpp"
#include "coopfusion/linalg.hpp"

namespace coopfusion {

/// State layout: x, y, v (speed along heading), psi (heading), psi_dot.
struct KinematicState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double psi = 0.0;
  double psi_dot = 0.0;

  Vec5 vector() const { return (Vec5() << x, y, v, psi, psi_dot).finished(); }
  static KinematicState from_vector(const Vec5& s) { return {s[0], s[1], s[2], s[3], s[4]}; }
};

struct TrackEstimate {
  Vec5 mean = Vec5::Zero();
  Mat5 covariance = Mat5::Identity();

  KinematicState state() const { return KinematicState::from_vector(mean); }
  Vec2 position() const { return mean.head<2>(); }
  Mat2 position_covariance() const { return covariance.topLeftCorner<2, 2>(); }
};

struct ProcessNoiseConfig {
  double sigma_ax = 0.5;
  double sigma_ay = 0.5;
  double sigma_a = 0.5;
  double sigma_psi = 0.1;
  double sigma_psi_dot = 0.5;
  double dt = 0.125;

  void validate() const {
    if (!(sigma_ax > 0 && sigma_ay > 0 && sigma_a > 0 && sigma_psi > 0 && sigma_psi_dot > 0)) {
      throw InvalidArgumentError("process noise sigmas must be > 0");
    }
    if (!(dt > 0)) throw InvalidArgumentError("process noise dt must be > 0");
  }
};

/// Below this yaw rate the motion model switches to its straight-line limit.
inline constexpr double kYawRateEpsilon = 1e-4;

inline Vec5 ctrv_motion(const Vec5& s, double dt) {
  const double v = s[2], psi = s[3], w = s[4];
  Vec5 out = s;
  if (std::abs(w) >= kYawRateEpsilon) {
    const double psi1 = psi + w * dt;
    out[0] += v / w * (std::sin(psi1) - std::sin(psi));
    out[1] += v / w * (std::cos(psi) - std::cos(psi1));
  } else {
    const double mid = psi + 0.5 * w * dt;
    out[0] += v * dt * std::cos(mid);
    out[1] += v * dt * std::sin(mid);
  }
  out[3] = normalize_angle(psi + w * dt);
  return out;
}

/// Analytic Jacobian of ctrv_motion with respect to the state.
inline Mat5 ctrv_jacobian(const Vec5& s, double dt) {
  const double v = s[2], psi = s[3], w = s[4];
  Mat5 f = Mat5::Identity();
  f(3, 4) = dt;
  if (std::abs(w) >= kYawRateEpsilon) {
    const double psi1 = psi + w * dt;
    const double ds = std::sin(psi1) - std::sin(psi);
    const double dc = std::cos(psi) - std::cos(psi1);
    f(0, 2) = ds / w;
    f(0, 3) = v / w * (std::cos(psi1) - std::cos(psi));
    f(0, 4) = v * dt * std::cos(psi1) / w - v / (w * w) * ds;
    f(1, 2) = dc / w;
    f(1, 3) = v / w * ds;
    f(1, 4) = v * dt * std::sin(psi1) / w - v / (w * w) * dc;
  } else {
    const double mid = psi + 0.5 * w * dt;
    const double c = std::cos(mid), sn = std::sin(mid);
    f(0, 2) = dt * c;
    f(0, 3) = -v * dt * sn;
    f(0, 4) = -0.5 * v * dt * dt * sn;
    f(1, 2) = dt * sn;
    f(1, 3) = v * dt * c;
    f(1, 4) = 0.5 * v * dt * dt * c;
  }
  return f;
}

/// Process noise in its reference layout (not positive semi-definite
/// in general; see process_noise).
inline Mat5 printed_process_noise(const ProcessNoiseConfig& cfg) {
  const double dt = cfg.dt, dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
  const double ax2 = cfg.sigma_ax * cfg.sigma_ax, ay2 = cfg.sigma_ay * cfg.sigma_ay;
  Mat5 q = Mat5::Zero();
  q(0, 0) = dt4 / 4.0 * ax2;
  q(0, 2) = dt3 / 2.0 * ax2;
  q(1, 1) = dt4 / 4.0 * ay2;
  q(1, 2) = dt3 / 2.0 * ay2;
  q(2, 0) = dt3 / 2.0 * ax2;
  q(2, 1) = dt3 / 2.0 * ay2;
  q(2, 2) = dt2 * cfg.sigma_a * cfg.sigma_a;
  q(3, 3) = dt2 * cfg.sigma_psi * cfg.sigma_psi;
  q(4, 4) = dt2 * cfg.sigma_psi_dot * cfg.sigma_psi_dot;
  return q;
}

/// The reference matrix, symmetrized and projected onto the PSD cone.
inline Mat5 process_noise(const ProcessNoiseConfig& cfg) {
  cfg.validate();
  return nearest_psd(printed_process_noise(cfg));
}

inline TrackEstimate ctrv_predict(const TrackEstimate& track, const ProcessNoiseConfig& cfg) {
  const Mat5 f = ctrv_jacobian(track.mean, cfg.dt);
  TrackEstimate out;
  out.mean = ctrv_motion(track.mean, cfg.dt);
  out.covariance = symmetrized(f * track.covariance * f.transpose() + process_noise(cfg));
  return out;
}

/// Innovation of a position measurement against a track, with its covariance.
struct Innovation {
  Vec2 residual;
  Mat2 covariance;
};

inline Innovation position_innovation(const TrackEstimate& track, const GaussianEstimate& z) {
  return {z.mean - track.position(), symmetrized(track.position_covariance() + z.covariance)};
}

inline bool invertible(const Mat2& s) {
  const double det = s.determinant();
  return std::isfinite(det) && det > 1e-300 && s(0, 0) > 0.0;
}

/// Kalman update with a direct position measurement (H selects x, y).
inline TrackEstimate ekf_update(const TrackEstimate& track, const GaussianEstimate& z) {
  const Innovation inn = position_innovation(track, z);
  if (!invertible(inn.covariance)) {
    throw NumericalFailureError("singular innovation covariance");
  }
  const Eigen::Matrix<double, 5, 2> pht = track.covariance.leftCols<2>();
  const Eigen::Matrix<double, 5, 2> gain = pht * inn.covariance.inverse();

  TrackEstimate out;
  out.mean = track.mean + gain * inn.residual;
  out.mean[3] = normalize_angle(out.mean[3]);
  Mat5 ikh = Mat5::Identity();
  ikh.leftCols<2>() -= gain;
  // Joseph form keeps the result PSD under round-off.
  out.covariance = symmetrized(ikh * track.covariance * ikh.transpose() +
                               gain * z.covariance * gain.transpose());
  return out;
}

/// A measurement tagged with the pipeline or platform that produced it.
struct SourcedMeasurement {
  std::string source;
  GaussianEstimate z;
};

struct MultiUpdateResult {
  TrackEstimate track;
  std::size_t applied = 0;
  std::size_t skipped = 0;
};

/// Sequential updates in source order. Measurements whose innovation
/// covariance is singular are skipped.
inline MultiUpdateResult multi_update(const TrackEstimate& track, std::vector<SourcedMeasurement> zs) {
  std::stable_sort(zs.begin(), zs.end(),
                   [](const SourcedMeasurement& a, const SourcedMeasurement& b) { return a.source < b.source; });
  MultiUpdateResult result{track, 0, 0};
  for (const auto& m : zs) {
    try {
      result.track = ekf_update(result.track, m.z);
      ++result.applied;
    } catch (const NumericalFailureError&) {
      ++result.skipped;
    }
  }
  return result;
}

/// Normalized estimation error squared of `track` against a true state.
inline double nees(const TrackEstimate& track, const Vec5& truth) {
  Vec5 e = track.mean - truth;
  e[3] = normalize_angle(e[3]);
  return e.dot(track.covariance.ldlt().solve(e));
}

/// Fresh track from a single position measurement; speed and heading unknown.
inline TrackEstimate initial_track(const GaussianEstimate& z) {
  TrackEstimate t;
  t.mean = Vec5::Zero();
  t.mean.head<2>() = z.mean;
  t.covariance = Mat5::Zero();
  t.covariance.topLeftCorner<2, 2>() = z.covariance;
  t.covariance(2, 2) = 1.0;
  t.covariance(3, 3) = kPi * kPi;
  t.covariance(4, 4) = 1.0;
  return t;
}

}  // namespace coopfusion
