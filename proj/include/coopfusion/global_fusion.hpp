#pragma once

// RSU-side fusion: platform packets carry local tracks already moved into the
// world frame with localization covariance added; JPDA + EKF fuse them.

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "coopfusion/association.hpp"
#include "coopfusion/error_models.hpp"

namespace coopfusion {

struct PacketTrack {
  std::string id;
  Vec2 mu = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  ObjectClass object_class = ObjectClass::vehicle;
};

struct PlatformPacket {
  std::string platform_id;
  double t = 0.0;
  PlatformPose pose;
  Mat2 pose_cov = Mat2::Identity();
  std::vector<PacketTrack> tracks;
};

struct GlobalTrack {
  std::uint64_t id = 0;
  TrackEstimate estimate;
  std::set<std::string> platforms;
  bool confirmed = false;
};

/// Rigid transform of a platform-frame position into the world frame.
inline Vec2 track_to_world(const Vec2& local_position, const PlatformPose& pose) {
  return Vec2(pose.x, pose.y) + rotation(pose.theta) * local_position;
}

/// Position block of a local track covariance, rotated into the world frame.
inline Mat2 covariance_to_world(const Mat5& p, double theta) {
  const Mat2 r = rotation(theta);
  return symmetrized(r * p.topLeftCorner<2, 2>() * r.transpose());
}

inline Mat2 covariance_union(const Mat2& a, const Mat2& b) { return symmetrized(a + b); }

inline PlatformPacket packetize(const std::string& platform_id, double t, const PlatformPose& pose,
                                const Mat2& pose_cov, const std::vector<Track>& local_tracks) {
  PlatformPacket packet{platform_id, t, pose, symmetrized(pose_cov), {}};
  packet.tracks.reserve(local_tracks.size());
  for (const auto& lt : local_tracks) {
    const Mat2 world = covariance_to_world(lt.estimate.covariance, pose.theta);
    packet.tracks.push_back({platform_id + "/" + std::to_string(lt.id),
                             track_to_world(lt.estimate.position(), pose),
                             covariance_union(packet.pose_cov, world), lt.object_class});
  }
  return packet;
}

/// Packet whose pose covariance is predicted from the platform's speed.
inline PlatformPacket packetize(const std::string& platform_id, double t, const PlatformPose& pose,
                                const ErrorModel& longitudinal, const ErrorModel& lateral,
                                const std::vector<Track>& local_tracks) {
  return packetize(platform_id, t, pose, localization_covariance(pose, longitudinal, lateral), local_tracks);
}

struct GlobalFusionConfig {
  AssociationConfig association;
  ProcessNoiseConfig process_noise;
  double tick = 0.125;
  /// Stationary platforms (CIS): their own pose is not tracked.
  std::set<std::string> infrastructure_ids;
};

struct GlobalFusionStats {
  std::size_t ticks = 0;
  std::size_t packets = 0;
  std::size_t duplicates = 0;
  std::size_t late_dropped = 0;
};

class GlobalFusion {
 public:
  explicit GlobalFusion(GlobalFusionConfig cfg = {})
      : cfg_(std::move(cfg)), tracker_(cfg_.association, cfg_.process_noise) {
    if (!(cfg_.tick > 0)) throw InvalidArgumentError("global fusion tick must be > 0");
  }

  long tick_of(double t) const { return std::lround(t / cfg_.tick); }

  /// Thread-safe; may be called from any number of producers.
  void ingest(PlatformPacket packet) {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(std::move(packet));
  }

  /// Fuses every queued packet bucketed into `tick`. Packets from earlier
  /// ticks are dropped and counted; later ones stay queued.
  std::vector<GlobalTrack> step(long tick) {
    std::vector<PlatformPacket> batch;
    {
      std::lock_guard lock(queue_mutex_);
      std::vector<PlatformPacket> keep;
      for (auto& p : queue_) {
        const long k = tick_of(p.t);
        if (k == tick) batch.push_back(std::move(p));
        else if (k < tick) ++stats_.late_dropped;
        else keep.push_back(std::move(p));
      }
      queue_ = std::move(keep);
    }
    return fuse(batch);
  }

  /// One predict, then association of every packet's tracks (and each CAV's
  /// own pose) against the predicted global tracks. Duplicate packets from
  /// one platform: the latest timestamp wins.
  std::vector<GlobalTrack> fuse(const std::vector<PlatformPacket>& packets) {
    std::map<std::string, const PlatformPacket*> latest;
    for (const auto& p : packets) {
      auto [it, inserted] = latest.try_emplace(p.platform_id, &p);
      if (!inserted) {
        ++stats_.duplicates;
        if (p.t >= it->second->t) it->second = &p;
      }
    }
    stats_.packets += latest.size();
    ++stats_.ticks;

    std::vector<Tracker::Detection> detections;
    for (const auto& [id, p] : latest) {
      if (!cfg_.infrastructure_ids.count(id)) {
        detections.push_back({id, {Vec2(p->pose.x, p->pose.y), p->pose_cov}, ObjectClass::vehicle});
      }
      for (const auto& t : p->tracks) detections.push_back({id, {t.mu, t.cov}, t.object_class});
    }
    tracker_.predict(cfg_.tick);
    tracker_.update(detections);
    return confirmed();
  }

  std::vector<GlobalTrack> confirmed() const {
    std::vector<GlobalTrack> out;
    for (const auto& t : tracker_.tracks()) {
      if (t.confirmed) out.push_back({t.id, t.estimate, t.contributors, true});
    }
    return out;
  }

  const GlobalFusionStats& stats() const { return stats_; }
  const std::vector<Track>& tracks() const { return tracker_.tracks(); }
  const GlobalFusionConfig& config() const { return cfg_; }

 private:
  GlobalFusionConfig cfg_;
  Tracker tracker_;
  GlobalFusionStats stats_;
  std::mutex queue_mutex_;
  std::vector<PlatformPacket> queue_;
};

inline std::vector<GlobalTrack> global_fusion_step(GlobalFusion& state, const std::vector<PlatformPacket>& packets) {
  return state.fuse(packets);
}

}  // namespace coopfusion
