#pragma once

// Exact JPDA association of one source's detections to existing tracks, and
// the track lifecycle (spawn / confirm / delete) driven by it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "coopfusion/error_models.hpp"
#include "coopfusion/errors.hpp"
#include "coopfusion/tracking.hpp"

namespace coopfusion {

struct AssociationConfig {
  double gate_threshold = 9.21;  // chi-square 99%, 2 dof
  double detection_probability = 0.9;
  double clutter_density = 0.05;  // false alarms per m^2
  int confirm_threshold = 3;
  int delete_threshold = 5;
  double weight_threshold = 0.2;  // minimum weight that triggers an update
  double max_events = 1e6;
  /// Two tracks whose position-velocity difference has squared Mahalanobis
  /// distance at or below this are one object; the younger is dropped.
  /// 0 disables merging.
  double merge_threshold = 1.0;

  void validate() const {
    if (!(gate_threshold > 0)) throw InvalidArgumentError("gate_threshold must be > 0");
    if (!(detection_probability > 0 && detection_probability <= 1)) {
      throw InvalidArgumentError("detection_probability must be in (0, 1]");
    }
    if (!(clutter_density >= 0)) throw InvalidArgumentError("clutter_density must be >= 0");
    if (confirm_threshold < 1 || delete_threshold < 1) {
      throw InvalidArgumentError("lifecycle thresholds must be >= 1");
    }
    if (!(merge_threshold >= 0)) throw InvalidArgumentError("merge_threshold must be >= 0");
  }
};

struct Track {
  std::uint64_t id = 0;
  TrackEstimate estimate;
  int frames_seen = 0;
  int frames_missed = 0;
  bool confirmed = false;
  ObjectClass object_class = ObjectClass::vehicle;
  std::set<std::string> contributors;
};

using GateMatrix = std::vector<std::vector<bool>>;

inline double mahalanobis_squared(const TrackEstimate& track, const GaussianEstimate& z) {
  const Innovation inn = position_innovation(track, z);
  if (!invertible(inn.covariance)) return std::numeric_limits<double>::infinity();
  return inn.residual.dot(inn.covariance.ldlt().solve(inn.residual));
}

/// entry [i][j] is true iff observation j lies inside track i's gate (inclusive).
inline GateMatrix gate(const std::vector<TrackEstimate>& tracks,
                       const std::vector<GaussianEstimate>& observations, const AssociationConfig& cfg) {
  GateMatrix g(tracks.size(), std::vector<bool>(observations.size(), false));
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < observations.size(); ++j) {
      g[i][j] = mahalanobis_squared(tracks[i], observations[j]) <= cfg.gate_threshold;
    }
  }
  return g;
}

struct AssociationResult {
  /// weights[i][j]: probability observation j originated from track i.
  std::vector<std::vector<double>> weights;
  /// miss[i]: probability track i was not detected. Row i sums to 1 with weights[i].
  std::vector<double> miss;
  /// Observations outside every gate.
  std::vector<std::size_t> unassociated_observations;
};

namespace detail {

inline double gaussian_likelihood(const TrackEstimate& track, const GaussianEstimate& z) {
  const Innovation inn = position_innovation(track, z);
  const double m2 = inn.residual.dot(inn.covariance.ldlt().solve(inn.residual));
  return std::exp(-0.5 * m2) / (2.0 * kPi * std::sqrt(inn.covariance.determinant()));
}

/// Event weight lambda^nf * (1-Pd)^nm * prod(Pd * g). Zero-valued factors
/// (lambda = 0, Pd = 1) are tracked as an order so the normalization takes
/// the limit instead of dividing by zero.
struct EventWeight {
  int zero_order = 0;
  double value = 1.0;
};

// Connected components of the bipartite gating graph, as track index lists
// and observation index lists.
struct Cluster {
  std::vector<std::size_t> tracks;
  std::vector<std::size_t> observations;
};

inline std::vector<Cluster> gate_clusters(const GateMatrix& g, std::size_t n_obs) {
  const std::size_t n_tracks = g.size();
  std::vector<int> parent(n_tracks + n_obs);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
  for (std::size_t i = 0; i < n_tracks; ++i) {
    for (std::size_t j = 0; j < n_obs; ++j) {
      if (g[i][j]) parent[find(static_cast<int>(i))] = find(static_cast<int>(n_tracks + j));
    }
  }
  std::vector<Cluster> clusters;
  std::vector<int> slot(n_tracks + n_obs, -1);
  auto cluster_of = [&](std::size_t node) -> Cluster& {
    const int root = find(static_cast<int>(node));
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(clusters.size());
      clusters.emplace_back();
    }
    return clusters[slot[root]];
  };
  for (std::size_t i = 0; i < n_tracks; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n_obs; ++j) any = any || g[i][j];
    if (any) cluster_of(i).tracks.push_back(i);
  }
  for (std::size_t j = 0; j < n_obs; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n_tracks; ++i) any = any || g[i][j];
    if (any) cluster_of(n_tracks + j).observations.push_back(j);
  }
  return clusters;
}

}  // namespace detail

/// Exact JPDA marginals by enumerating every feasible joint event per gating
/// cluster (each observation to at most one track, each track at most one
/// observation).
inline AssociationResult jpda_weights(const std::vector<TrackEstimate>& tracks,
                                      const std::vector<GaussianEstimate>& observations,
                                      const AssociationConfig& cfg) {
  cfg.validate();
  const std::size_t n_tracks = tracks.size(), n_obs = observations.size();
  const GateMatrix g = gate(tracks, observations, cfg);

  AssociationResult result;
  result.weights.assign(n_tracks, std::vector<double>(n_obs, 0.0));
  result.miss.assign(n_tracks, 1.0);
  for (std::size_t j = 0; j < n_obs; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n_tracks; ++i) any = any || g[i][j];
    if (!any) result.unassociated_observations.push_back(j);
  }

  const double pd = cfg.detection_probability;
  const double lambda = cfg.clutter_density;

  for (const auto& cluster : detail::gate_clusters(g, n_obs)) {
    const std::size_t nt = cluster.tracks.size(), no = cluster.observations.size();
    std::vector<std::vector<double>> lik(nt, std::vector<double>(no, 0.0));
    for (std::size_t a = 0; a < nt; ++a) {
      for (std::size_t b = 0; b < no; ++b) {
        if (g[cluster.tracks[a]][cluster.observations[b]]) {
          lik[a][b] = pd * detail::gaussian_likelihood(tracks[cluster.tracks[a]],
                                                       observations[cluster.observations[b]]);
        }
      }
    }

    // Accumulate marginals per zero-order; only the lowest order survives.
    int best_order = std::numeric_limits<int>::max();
    double total = 0.0;
    std::vector<double> miss_acc(nt, 0.0);
    std::vector<std::vector<double>> w_acc(nt, std::vector<double>(no, 0.0));
    std::vector<int> assignment(nt, -1);
    std::vector<bool> used(no, false);
    double events = 0.0;

    auto record = [&]() {
      if (++events > cfg.max_events) {
        throw CombinatorialOverflowError(
            "JPDA joint-event count exceeds cap; split the frame into smaller clusters");
      }
      detail::EventWeight w;
      std::size_t assigned = 0;
      for (std::size_t a = 0; a < nt; ++a) {
        if (assignment[a] < 0) {
          if (pd >= 1.0) ++w.zero_order;
          else w.value *= 1.0 - pd;
        } else {
          w.value *= lik[a][assignment[a]];
          ++assigned;
        }
      }
      for (std::size_t f = assigned; f < no; ++f) {
        if (lambda <= 0.0) ++w.zero_order;
        else w.value *= lambda;
      }
      if (w.zero_order > best_order) return;
      if (w.zero_order < best_order) {
        best_order = w.zero_order;
        total = 0.0;
        std::fill(miss_acc.begin(), miss_acc.end(), 0.0);
        for (auto& row : w_acc) std::fill(row.begin(), row.end(), 0.0);
      }
      total += w.value;
      for (std::size_t a = 0; a < nt; ++a) {
        if (assignment[a] < 0) miss_acc[a] += w.value;
        else w_acc[a][assignment[a]] += w.value;
      }
    };

    std::function<void(std::size_t)> enumerate = [&](std::size_t a) {
      if (a == nt) {
        record();
        return;
      }
      assignment[a] = -1;
      enumerate(a + 1);
      for (std::size_t b = 0; b < no; ++b) {
        if (used[b] || lik[a][b] <= 0.0) continue;
        used[b] = true;
        assignment[a] = static_cast<int>(b);
        enumerate(a + 1);
        used[b] = false;
      }
      assignment[a] = -1;
    };
    enumerate(0);

    if (!(total > 0.0) || !std::isfinite(total)) {
      throw NumericalFailureError("JPDA event likelihoods vanished");
    }
    for (std::size_t a = 0; a < nt; ++a) {
      result.miss[cluster.tracks[a]] = miss_acc[a] / total;
      for (std::size_t b = 0; b < no; ++b) {
        result.weights[cluster.tracks[a]][cluster.observations[b]] = w_acc[a][b] / total;
      }
    }
  }
  return result;
}

/// Squared Mahalanobis distance between two tracks over (x, y, vx, vy).
inline double track_distance_squared(const TrackEstimate& a, const TrackEstimate& b) {
  auto project = [](const TrackEstimate& t, Eigen::Vector4d& m, Eigen::Matrix4d& c) {
    const double v = t.mean[2], c_psi = std::cos(t.mean[3]), s_psi = std::sin(t.mean[3]);
    Eigen::Matrix<double, 4, 5> j = Eigen::Matrix<double, 4, 5>::Zero();
    j(0, 0) = 1.0;
    j(1, 1) = 1.0;
    j(2, 2) = c_psi;
    j(2, 3) = -v * s_psi;
    j(3, 2) = s_psi;
    j(3, 3) = v * c_psi;
    m << t.mean[0], t.mean[1], v * c_psi, v * s_psi;
    c = j * t.covariance * j.transpose();
  };
  Eigen::Vector4d ma, mb;
  Eigen::Matrix4d ca, cb;
  project(a, ma, ca);
  project(b, mb, cb);
  const Eigen::Vector4d d = ma - mb;
  const Eigen::LDLT<Eigen::Matrix4d> ldlt(symmetrized(Eigen::Matrix4d(ca + cb)));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::numeric_limits<double>::infinity();
  return d.dot(ldlt.solve(d));
}

/// Removes duplicate tracks of one object, closest pairs first. The track
/// seen in more frames survives (lower id on ties) and inherits the other's
/// contributors and confirmation.
inline void merge_duplicate_tracks(std::vector<Track>& tracks, const AssociationConfig& cfg) {
  if (!(cfg.merge_threshold > 0) || tracks.size() < 2) return;
  struct Pair {
    double d2;
    std::size_t a, b;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < tracks.size(); ++a) {
    for (std::size_t b = a + 1; b < tracks.size(); ++b) {
      const double d2 = track_distance_squared(tracks[a].estimate, tracks[b].estimate);
      if (d2 <= cfg.merge_threshold) pairs.push_back({d2, a, b});
    }
  }
  if (pairs.empty()) return;
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.d2 < y.d2; });
  std::vector<bool> dropped(tracks.size(), false);
  for (const auto& p : pairs) {
    if (dropped[p.a] || dropped[p.b]) continue;
    const Track& ta = tracks[p.a];
    const Track& tb = tracks[p.b];
    const bool keep_a = ta.frames_seen != tb.frames_seen ? ta.frames_seen > tb.frames_seen : ta.id < tb.id;
    Track& keep = keep_a ? tracks[p.a] : tracks[p.b];
    const Track& drop = keep_a ? tracks[p.b] : tracks[p.a];
    keep.contributors.insert(drop.contributors.begin(), drop.contributors.end());
    keep.confirmed = keep.confirmed || drop.confirmed;
    dropped[keep_a ? p.b : p.a] = true;
  }
  std::vector<Track> out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!dropped[i]) out.push_back(std::move(tracks[i]));
  }
  tracks = std::move(out);
}

/// One source's detections for a frame plus their association result.
struct SourceBatch {
  std::string source;
  std::vector<GaussianEstimate> observations;
  std::vector<ObjectClass> classes;
  AssociationResult result;
};

/// Applies one frame of per-source association results to the track list.
/// Each track is updated with every observation whose weight exceeds the
/// threshold, its covariance inflated by 1/weight. Observations outside all
/// gates spawn tentative tracks, merged with tracks born earlier in the same
/// frame when they fall inside their gate.
inline void apply_association(std::vector<Track>& tracks, const std::vector<SourceBatch>& batches,
                              const AssociationConfig& cfg, std::uint64_t& next_id) {
  const std::size_t existing = tracks.size();
  for (std::size_t i = 0; i < existing; ++i) {
    std::vector<SourcedMeasurement> zs;
    std::vector<std::string> sources;
    for (const auto& batch : batches) {
      for (std::size_t j = 0; j < batch.observations.size(); ++j) {
        const double w = batch.result.weights.at(i).at(j);
        if (w > cfg.weight_threshold) {
          GaussianEstimate z = batch.observations[j];
          z.covariance /= w;
          zs.push_back({batch.source, z});
          sources.push_back(batch.source);
        }
      }
    }
    Track& t = tracks[i];
    const MultiUpdateResult upd = multi_update(t.estimate, std::move(zs));
    t.estimate = upd.track;
    if (upd.applied > 0) {
      ++t.frames_seen;
      t.frames_missed = 0;
      t.contributors.insert(sources.begin(), sources.end());
    } else {
      ++t.frames_missed;
    }
  }

  for (const auto& batch : batches) {
    for (std::size_t j : batch.result.unassociated_observations) {
      const GaussianEstimate& z = batch.observations[j];
      Track* merge = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = existing; k < tracks.size(); ++k) {
        if (tracks[k].contributors.count(batch.source)) continue;
        const double m2 = mahalanobis_squared(tracks[k].estimate, z);
        if (m2 <= cfg.gate_threshold && m2 < best) {
          best = m2;
          merge = &tracks[k];
        }
      }
      if (merge != nullptr) {
        try {
          merge->estimate = ekf_update(merge->estimate, z);
          merge->contributors.insert(batch.source);
          continue;
        } catch (const NumericalFailureError&) {
        }
      }
      Track t;
      t.id = next_id++;
      t.estimate = initial_track(z);
      t.frames_seen = 1;
      t.object_class = j < batch.classes.size() ? batch.classes[j] : ObjectClass::vehicle;
      t.contributors.insert(batch.source);
      tracks.push_back(std::move(t));
    }
  }

  for (auto& t : tracks) {
    if (t.frames_seen >= cfg.confirm_threshold) t.confirmed = true;
  }
  std::erase_if(tracks, [&](const Track& t) { return t.frames_missed >= cfg.delete_threshold; });
  merge_duplicate_tracks(tracks, cfg);
}

/// Track list plus identity counter for one fusion instance.
class Tracker {
 public:
  struct Detection {
    std::string source;
    GaussianEstimate z;
    ObjectClass object_class = ObjectClass::vehicle;
  };

  Tracker(AssociationConfig assoc = {}, ProcessNoiseConfig noise = {})
      : assoc_(assoc), noise_(noise) {
    assoc_.validate();
    noise_.validate();
  }

  void predict() { predict(noise_.dt); }

  void predict(double dt) {
    ProcessNoiseConfig cfg = noise_;
    cfg.dt = dt;
    for (auto& t : tracks_) t.estimate = ctrv_predict(t.estimate, cfg);
  }

  /// Associates a frame of detections (any number of sources) and applies the
  /// lifecycle. Call predict() first.
  void update(const std::vector<Detection>& detections) {
    std::vector<std::string> order;
    for (const auto& d : detections) {
      if (std::find(order.begin(), order.end(), d.source) == order.end()) order.push_back(d.source);
    }
    std::sort(order.begin(), order.end());

    std::vector<TrackEstimate> estimates;
    estimates.reserve(tracks_.size());
    for (const auto& t : tracks_) estimates.push_back(t.estimate);

    std::vector<SourceBatch> batches;
    for (const auto& src : order) {
      SourceBatch b;
      b.source = src;
      for (const auto& d : detections) {
        if (d.source != src) continue;
        b.observations.push_back(d.z);
        b.classes.push_back(d.object_class);
      }
      b.result = jpda_weights(estimates, b.observations, assoc_);
      batches.push_back(std::move(b));
    }
    apply_association(tracks_, batches, assoc_, next_id_);
  }

  const std::vector<Track>& tracks() const { return tracks_; }
  std::vector<Track> confirmed() const {
    std::vector<Track> out;
    for (const auto& t : tracks_) {
      if (t.confirmed) out.push_back(t);
    }
    return out;
  }

  /// Applies an arbitrary transform to every track estimate (ego-motion
  /// compensation).
  template <typename F>
  void transform(F&& f) {
    for (auto& t : tracks_) t.estimate = f(t.estimate);
  }

  const AssociationConfig& association_config() const { return assoc_; }
  const ProcessNoiseConfig& process_noise_config() const { return noise_; }

 private:
  AssociationConfig assoc_;
  ProcessNoiseConfig noise_;
  std::vector<Track> tracks_;
  std::uint64_t next_id_ = 1;
};

}  // namespace coopfusion
