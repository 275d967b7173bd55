#pragma once

// End-to-end runs: local fusion per platform, packets, global fusion, and
// RMSE of confirmed global tracks against ground truth.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coopfusion/calibration.hpp"
#include "coopfusion/global_fusion.hpp"
#include "coopfusion/local_fusion.hpp"
#include "coopfusion/scenario.hpp"
#include "coopfusion/scenario_log.hpp"

namespace coopfusion {

inline constexpr double kTruthMatchDistance = 0.5;

inline double rmse(const std::vector<std::pair<Vec2, Vec2>>& pairs) {
  if (pairs.empty()) throw InvalidArgumentError("rmse of an empty set");
  double sum = 0.0;
  for (const auto& [a, b] : pairs) sum += (a - b).squaredNorm();
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

struct TickResiduals {
  long tick = 0;
  double t = 0.0;
  std::size_t truth_count = 0;
  std::size_t confirmed_tracks = 0;
  std::size_t matched = 0;
  std::size_t false_tracks = 0;
  double squared_error = 0.0;               // summed over matched tracks
  double localization_squared_error = 0.0;  // summed over CAVs
  std::size_t localization_count = 0;
};

struct TrackResiduals {
  std::uint64_t id = 0;
  std::vector<long> ticks;
  std::vector<double> residuals;
};

struct RunReport {
  std::string scenario;
  ErrorModelMode mode = ErrorModelMode::parameterized;
  std::uint64_t seed = 0;
  double duration = 0.0;
  double tick_rate = 0.0;
  double rmse_global = 0.0;
  double rmse_localization_alone = 0.0;
  std::size_t matched_samples = 0;
  std::size_t truth_samples = 0;
  std::size_t false_track_samples = 0;
  std::size_t max_confirmed_tracks = 0;
  std::size_t distinct_tracks = 0;
  GlobalFusionStats fusion_stats;
  std::vector<TickResiduals> per_tick;
  std::vector<TrackResiduals> per_track;
};

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json ticks = nlohmann::json::array();
  for (const auto& t : r.per_tick) {
    ticks.push_back({{"tick", t.tick},
                     {"t", t.t},
                     {"truth", t.truth_count},
                     {"confirmed", t.confirmed_tracks},
                     {"matched", t.matched},
                     {"false_tracks", t.false_tracks},
                     {"sse", t.squared_error},
                     {"loc_sse", t.localization_squared_error},
                     {"loc_count", t.localization_count}});
  }
  nlohmann::json tracks = nlohmann::json::array();
  for (const auto& t : r.per_track) tracks.push_back({{"id", t.id}, {"ticks", t.ticks}, {"residuals", t.residuals}});
  return {{"scenario", r.scenario},
          {"mode", std::string(to_string(r.mode))},
          {"seed", r.seed},
          {"duration", r.duration},
          {"tick_rate", r.tick_rate},
          {"rmse_global", r.rmse_global},
          {"rmse_localization_alone", r.rmse_localization_alone},
          {"track_stats",
           {{"matched_samples", r.matched_samples},
            {"truth_samples", r.truth_samples},
            {"false_track_samples", r.false_track_samples},
            {"max_confirmed_tracks", r.max_confirmed_tracks},
            {"distinct_tracks", r.distinct_tracks},
            {"fusion_ticks", r.fusion_stats.ticks},
            {"packets", r.fusion_stats.packets},
            {"duplicate_packets", r.fusion_stats.duplicates},
            {"late_packets", r.fusion_stats.late_dropped}}},
          {"per_tick", std::move(ticks)},
          {"per_track", std::move(tracks)}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
  try {
    RunReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.mode = mode_from_string(j.at("mode").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.duration = j.at("duration").get<double>();
    r.tick_rate = j.at("tick_rate").get<double>();
    r.rmse_global = j.at("rmse_global").get<double>();
    r.rmse_localization_alone = j.at("rmse_localization_alone").get<double>();
    const auto& s = j.at("track_stats");
    r.matched_samples = s.at("matched_samples").get<std::size_t>();
    r.truth_samples = s.at("truth_samples").get<std::size_t>();
    r.false_track_samples = s.at("false_track_samples").get<std::size_t>();
    r.max_confirmed_tracks = s.at("max_confirmed_tracks").get<std::size_t>();
    r.distinct_tracks = s.at("distinct_tracks").get<std::size_t>();
    r.fusion_stats = {s.at("fusion_ticks").get<std::size_t>(), s.at("packets").get<std::size_t>(),
                      s.at("duplicate_packets").get<std::size_t>(), s.at("late_packets").get<std::size_t>()};
    for (const auto& t : j.at("per_tick")) {
      r.per_tick.push_back({t.at("tick").get<long>(), t.at("t").get<double>(), t.at("truth").get<std::size_t>(),
                            t.at("confirmed").get<std::size_t>(), t.at("matched").get<std::size_t>(),
                            t.at("false_tracks").get<std::size_t>(), t.at("sse").get<double>(),
                            t.at("loc_sse").get<double>(), t.at("loc_count").get<std::size_t>()});
    }
    for (const auto& t : j.at("per_track")) {
      r.per_track.push_back({t.at("id").get<std::uint64_t>(), t.at("ticks").get<std::vector<long>>(),
                             t.at("residuals").get<std::vector<double>>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad run report: ") + e.what());
  }
}

inline std::string serialize_report(const RunReport& r) { return to_json(r).dump(2) + "\n"; }

/// Runs both fusion tiers over a recorded (or freshly simulated) log.
/// `trace`, when given, receives every packet sent to global fusion.
inline RunReport evaluate(const ScenarioLog& log, ErrorModelMode mode, PacketTrace* trace = nullptr) {
  const ScenarioConfig& cfg = log.config;
  const ModelSet& models = cfg.fusion_models(mode);

  std::vector<LocalFusion> locals;
  std::set<std::string> infrastructure;
  for (const auto& p : log.platforms) {
    std::vector<SensorPipelineConfig> pipes;
    for (const auto& s : p.sensors) pipes.push_back(pipeline_for(s, models));
    locals.emplace_back(p.id, std::move(pipes), cfg.local_association, cfg.process_noise);
    if (p.kind == PlatformKind::cis) infrastructure.insert(p.id);
  }
  GlobalFusion global({cfg.global_association, cfg.process_noise, cfg.dt(), infrastructure});
  if (trace) {
    trace->mode = mode;
    trace->per_tick.clear();
  }

  RunReport report;
  report.scenario = cfg.name;
  report.mode = mode;
  report.seed = cfg.seed;
  report.duration = cfg.duration;
  report.tick_rate = cfg.tick_rate;
  std::map<std::uint64_t, TrackResiduals> per_track;
  double global_sse = 0.0, loc_sse = 0.0;
  std::size_t loc_n = 0;

  for (const auto& rec : log.ticks) {
    std::vector<PlatformPacket> packets;
    for (std::size_t i = 0; i < log.platforms.size(); ++i) {
      const PlatformSpec& p = log.platforms[i];
      LocalFrame frame;
      frame.timestamp = rec.t;
      for (const auto& s : p.sensors) frame.observations[s.name];
      for (const auto& s : rec.sensors) {
        if (s.platform_id == p.id) frame.observations[s.sensor] = s.observations;
      }
      const LocalizerReading* loc = nullptr;
      for (const auto& l : rec.localizer) {
        if (l.platform_id == p.id) loc = &l;
      }
      if (p.kind == PlatformKind::cav) {
        if (!loc) throw ReplayError(p.id + ": no localizer reading at tick " + std::to_string(rec.tick));
        frame.ego_motion = loc->odometry;
      }
      const std::vector<Track> tracks = locals[i].step(frame);
      if (p.kind == PlatformKind::cav) {
        packets.push_back(packetize(p.id, rec.t, loc->pose, models.localizer_longitudinal,
                                    models.localizer_lateral, tracks));
      } else {
        const PlatformPose pose{p.surveyed_pose.x, p.surveyed_pose.y, p.surveyed_pose.theta, 0.0};
        packets.push_back(packetize(p.id, rec.t, pose, cfg.cis_pose_variance * Mat2::Identity(), tracks));
      }
    }
    const std::vector<GlobalTrack> fused = global.fuse(packets);
    if (trace) trace->per_tick.push_back(std::move(packets));

    TickResiduals tr;
    tr.tick = rec.tick;
    tr.t = rec.t;
    tr.truth_count = rec.truth.size();
    tr.confirmed_tracks = fused.size();
    std::vector<Vec2> estimates, truth;
    for (const auto& g : fused) estimates.push_back(g.estimate.position());
    for (const auto& v : rec.truth) truth.push_back(Vec2(v.x, v.y));
    const MatchResult m = match_observations_to_truth(Vec2::Zero(), estimates, truth, kTruthMatchDistance);
    for (const auto& pair : m.pairs) {
      tr.squared_error += pair.distance * pair.distance;
      auto& series = per_track[fused[pair.observation].id];
      series.id = fused[pair.observation].id;
      series.ticks.push_back(rec.tick);
      series.residuals.push_back(pair.distance);
    }
    tr.matched = m.pairs.size();
    tr.false_tracks = m.unmatched_observations.size();

    for (const auto& l : rec.localizer) {
      for (const auto& v : rec.truth) {
        if (v.id != l.platform_id) continue;
        const double dx = l.pose.x - v.x, dy = l.pose.y - v.y;
        tr.localization_squared_error += dx * dx + dy * dy;
        ++tr.localization_count;
      }
    }

    global_sse += tr.squared_error;
    loc_sse += tr.localization_squared_error;
    loc_n += tr.localization_count;
    report.matched_samples += tr.matched;
    report.truth_samples += tr.truth_count;
    report.false_track_samples += tr.false_tracks;
    report.max_confirmed_tracks = std::max(report.max_confirmed_tracks, tr.confirmed_tracks);
    report.per_tick.push_back(tr);
  }

  report.rmse_global = report.matched_samples ? std::sqrt(global_sse / static_cast<double>(report.matched_samples)) : 0.0;
  report.rmse_localization_alone = loc_n ? std::sqrt(loc_sse / static_cast<double>(loc_n)) : 0.0;
  report.fusion_stats = global.stats();
  for (auto& [id, series] : per_track) report.per_track.push_back(std::move(series));
  report.distinct_tracks = report.per_track.size();
  return report;
}

namespace detail {

template <typename F>
auto with_scenario_context(const ScenarioConfig& cfg, F&& f) {
  try {
    return f();
  } catch (const CombinatorialOverflowError& e) {
    throw CombinatorialOverflowError("scenario " + cfg.name + " (seed " + std::to_string(cfg.seed) + "): " + e.what());
  }
}

}  // namespace detail

inline RunReport run_scenario(const ScenarioConfig& config, ErrorModelMode mode, ScenarioLog* log_out = nullptr,
                              PacketTrace* trace = nullptr) {
  return detail::with_scenario_context(config, [&] {
    ScenarioLog log = simulate(config);
    RunReport r = evaluate(log, mode, trace);
    if (log_out) *log_out = std::move(log);
    return r;
  });
}

inline RunReport replay(const std::string& log_path, ErrorModelMode mode) {
  const ScenarioLog log = read_log_file(log_path);
  return detail::with_scenario_context(log.config, [&] { return evaluate(log, mode); });
}

// ---- aggregation across runs ----------------------------------------------

struct ReportRow {
  std::string scenario;
  ErrorModelMode mode = ErrorModelMode::parameterized;
  std::size_t runs = 0;
  double rmse = 0.0;                     // mean over runs
  double rmse_localization_alone = 0.0;  // mean over runs
  double ratio = 0.0;                    // fixed rmse / parameterized rmse for the scenario
};

/// One row per (scenario, mode), in first-seen scenario order.
inline std::vector<ReportRow> summarize(const std::vector<RunReport>& reports) {
  std::vector<std::string> order;
  std::map<std::pair<std::string, int>, ReportRow> rows;
  for (const auto& r : reports) {
    if (std::find(order.begin(), order.end(), r.scenario) == order.end()) order.push_back(r.scenario);
    auto& row = rows[{r.scenario, static_cast<int>(r.mode)}];
    row.scenario = r.scenario;
    row.mode = r.mode;
    ++row.runs;
    row.rmse += r.rmse_global;
    row.rmse_localization_alone += r.rmse_localization_alone;
  }
  std::vector<ReportRow> out;
  for (const auto& name : order) {
    auto* p = rows.count({name, 0}) ? &rows[{name, 0}] : nullptr;
    auto* f = rows.count({name, 1}) ? &rows[{name, 1}] : nullptr;
    for (auto* row : {p, f}) {
      if (!row) continue;
      row->rmse /= static_cast<double>(row->runs);
      row->rmse_localization_alone /= static_cast<double>(row->runs);
    }
    const double ratio = (p && f && p->rmse > 0.0) ? f->rmse / p->rmse : std::nan("");
    for (auto* row : {p, f}) {
      if (!row) continue;
      row->ratio = ratio;
      out.push_back(*row);
    }
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "scenario,mode,runs,rmse,rmse_localization_alone,ratio\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.scenario << ',' << to_string(r.mode) << ',' << r.runs << ',' << r.rmse << ','
        << r.rmse_localization_alone << ',';
    if (std::isnan(r.ratio)) out << "";
    else out << r.ratio;
    out << '\n';
  }
}

/// Per-tick residual series of every report of one scenario, long format.
inline void write_residual_csv(std::ostream& out, const std::vector<const RunReport*>& reports) {
  out << "mode,seed,tick,t,matched,false_tracks,rmse_tick,rmse_localization_tick\n";
  out.precision(10);
  for (const auto* r : reports) {
    for (const auto& t : r->per_tick) {
      out << to_string(r->mode) << ',' << r->seed << ',' << t.tick << ',' << t.t << ',' << t.matched << ','
          << t.false_tracks << ',';
      if (t.matched) out << std::sqrt(t.squared_error / static_cast<double>(t.matched));
      out << ',';
      if (t.localization_count) out << std::sqrt(t.localization_squared_error / static_cast<double>(t.localization_count));
      out << '\n';
    }
  }
}

inline std::string scenario_file_stem(const std::string& scenario) {
  std::string s = scenario;
  for (char& c : s) {
    if (c == '/') c = '_';
  }
  return s;
}

/// Reads every *.report.json under `dir`, writes residuals_<scenario>.csv
/// next to them and returns the summary rows.
inline std::vector<ReportRow> report_directory(const std::string& dir, std::ostream& summary) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 12 && name.ends_with(".report.json")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no *.report.json files under " + dir);
  std::vector<RunReport> reports;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      reports.push_back(report_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(f.string() + ": " + e.what());
    }
  }
  const auto rows = summarize(reports);
  write_summary_csv(summary, rows);
  std::map<std::string, std::vector<const RunReport*>> by_scenario;
  for (const auto& r : reports) by_scenario[r.scenario].push_back(&r);
  for (const auto& [name, list] : by_scenario) {
    std::ofstream out(fs::path(dir) / ("residuals_" + scenario_file_stem(name) + ".csv"));
    if (!out) throw ConfigError("cannot write residual CSV in " + dir);
    write_residual_csv(out, list);
  }
  return rows;
}

}  // namespace coopfusion
