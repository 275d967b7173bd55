#pragma once

// NDJSON scenario log. Every line carries "t", "tick" and "kind":
//   header  schema_version, config, platforms
//   truth   vehicles[{id, x, y, theta, v, s}]
//   loc     platform_id, pose{x, y, theta, v}, odom{dx, dy, dtheta} | null
//   obs     platform_id, sensor, observations[{d, theta, class}]
//   packet  mode, packet (wire format)
//   end     ticks
// A log without its end record is truncated.

#include <fstream>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "coopfusion/packet_io.hpp"
#include "coopfusion/scenario.hpp"

namespace coopfusion {

inline constexpr int kLogSchemaVersion = 1;

/// Packets emitted at each tick for one fusion mode, recorded alongside the
/// simulation for inspection. Replay recomputes them and ignores these.
struct PacketTrace {
  ErrorModelMode mode = ErrorModelMode::parameterized;
  std::vector<std::vector<PlatformPacket>> per_tick;
};

namespace detail {

inline nlohmann::json record(double t, long tick, const char* kind) {
  return {{"t", t}, {"tick", tick}, {"kind", kind}};
}

inline nlohmann::json platform_to_json(const PlatformSpec& p) {
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& s : p.sensors) sensors.push_back(sensor_to_json(s));
  return {{"id", p.id},
          {"kind", p.kind == PlatformKind::cav ? "cav" : "cis"},
          {"pose", {p.surveyed_pose.x, p.surveyed_pose.y, p.surveyed_pose.theta}},
          {"sensors", std::move(sensors)}};
}

inline PlatformSpec platform_from_json(const nlohmann::json& j) {
  PlatformSpec p;
  p.id = j.at("id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "cav" && kind != "cis") throw ConfigError("unknown platform kind '" + kind + "'");
  p.kind = kind == "cav" ? PlatformKind::cav : PlatformKind::cis;
  const auto pose = j.at("pose").get<std::vector<double>>();
  if (pose.size() != 3) throw ConfigError("platform pose must be [x, y, theta]");
  p.surveyed_pose = {pose[0], pose[1], pose[2]};
  for (const auto& s : j.at("sensors")) {
    SensorSpec spec;
    sensor_from_json(s, spec);
    p.sensors.push_back(spec);
  }
  return p;
}

}  // namespace detail

inline void write_log(std::ostream& out, const ScenarioLog& log, const PacketTrace* packets = nullptr) {
  auto header = detail::record(0.0, 0, "header");
  header["schema_version"] = kLogSchemaVersion;
  header["config"] = to_json(log.config);
  header["platforms"] = nlohmann::json::array();
  for (const auto& p : log.platforms) header["platforms"].push_back(detail::platform_to_json(p));
  out << header.dump() << '\n';

  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    const TickRecord& rec = log.ticks[k];
    auto truth = detail::record(rec.t, rec.tick, "truth");
    truth["vehicles"] = nlohmann::json::array();
    for (const auto& v : rec.truth) {
      truth["vehicles"].push_back({{"id", v.id}, {"x", v.x}, {"y", v.y}, {"theta", v.theta}, {"v", v.v}, {"s", v.s}});
    }
    out << truth.dump() << '\n';

    for (const auto& l : rec.localizer) {
      auto j = detail::record(rec.t, rec.tick, "loc");
      j["platform_id"] = l.platform_id;
      j["pose"] = {{"x", l.pose.x}, {"y", l.pose.y}, {"theta", l.pose.theta}, {"v", l.pose.v}};
      j["odom"] = l.odometry ? nlohmann::json{{"dx", l.odometry->dx}, {"dy", l.odometry->dy},
                                              {"dtheta", l.odometry->dtheta}}
                             : nlohmann::json(nullptr);
      out << j.dump() << '\n';
    }
    for (const auto& s : rec.sensors) {
      auto j = detail::record(rec.t, rec.tick, "obs");
      j["platform_id"] = s.platform_id;
      j["sensor"] = s.sensor;
      j["observations"] = nlohmann::json::array();
      for (const auto& o : s.observations) {
        j["observations"].push_back({{"d", o.distance}, {"theta", o.bearing}, {"class", std::string(to_string(o.object_class))}});
      }
      out << j.dump() << '\n';
    }
    if (packets && k < packets->per_tick.size()) {
      for (const auto& p : packets->per_tick[k]) {
        auto j = detail::record(rec.t, rec.tick, "packet");
        j["mode"] = std::string(to_string(packets->mode));
        j["packet"] = to_json(p);
        out << j.dump() << '\n';
      }
    }
  }
  auto end = detail::record(log.ticks.empty() ? 0.0 : log.ticks.back().t,
                            log.ticks.empty() ? 0 : log.ticks.back().tick, "end");
  end["ticks"] = log.ticks.size();
  out << end.dump() << '\n';
}

inline void write_log_file(const std::string& path, const ScenarioLog& log, const PacketTrace* packets = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write log " + path);
  write_log(out, log, packets);
  if (!out) throw ConfigError("failed writing log " + path);
}

/// Parses a log written by write_log. Errors name the offending line.
inline ScenarioLog read_log(std::istream& in) {
  ScenarioLog log;
  std::string line;
  long lineno = 0;
  bool have_header = false, have_end = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (have_end) throw ReplayError("content after end record", lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("t") || !j.contains("tick") || !j.contains("kind")) {
        throw ReplayError("record lacks t/tick/kind", lineno);
      }
      const auto kind = j.at("kind").get<std::string>();
      const double t = j.at("t").get<double>();
      const long tick = j.at("tick").get<long>();
      if (!have_header) {
        if (kind != "header") throw ReplayError("first record must be the header", lineno);
        if (j.at("schema_version").get<int>() != kLogSchemaVersion) {
          throw ReplayError("unsupported schema_version", lineno);
        }
        log.config = scenario_from_json(j.at("config"));
        for (const auto& p : j.at("platforms")) log.platforms.push_back(detail::platform_from_json(p));
        have_header = true;
        continue;
      }
      if (kind == "truth") {
        if (!log.ticks.empty() && tick <= log.ticks.back().tick) throw ReplayError("tick out of order", lineno);
        TickRecord rec;
        rec.tick = tick;
        rec.t = t;
        for (const auto& v : j.at("vehicles")) {
          rec.truth.push_back({v.at("id").get<std::string>(), v.at("x").get<double>(), v.at("y").get<double>(),
                               v.at("theta").get<double>(), v.at("v").get<double>(), v.at("s").get<double>()});
        }
        log.ticks.push_back(std::move(rec));
        continue;
      }
      if (kind == "end") {
        if (j.at("ticks").get<std::size_t>() != log.ticks.size()) {
          throw ReplayError("end record tick count does not match the log", lineno);
        }
        have_end = true;
        continue;
      }
      if (kind == "header") throw ReplayError("duplicate header", lineno);
      if (log.ticks.empty() || log.ticks.back().tick != tick) {
        throw ReplayError("'" + kind + "' record outside its tick", lineno);
      }
      TickRecord& rec = log.ticks.back();
      if (kind == "loc") {
        LocalizerReading l;
        l.platform_id = j.at("platform_id").get<std::string>();
        const auto& p = j.at("pose");
        l.pose = {p.at("x").get<double>(), p.at("y").get<double>(), p.at("theta").get<double>(),
                  p.at("v").get<double>()};
        const auto& o = j.at("odom");
        if (!o.is_null()) {
          l.odometry = EgoMotion{o.at("dx").get<double>(), o.at("dy").get<double>(), o.at("dtheta").get<double>()};
        }
        rec.localizer.push_back(std::move(l));
      } else if (kind == "obs") {
        SensorReading s;
        s.platform_id = j.at("platform_id").get<std::string>();
        s.sensor = j.at("sensor").get<std::string>();
        for (const auto& o : j.at("observations")) {
          s.observations.push_back({o.at("d").get<double>(), o.at("theta").get<double>(),
                                    object_class_from_string(o.at("class").get<std::string>())});
        }
        rec.sensors.push_back(std::move(s));
      } else if (kind == "packet") {
        packet_from_json(j.at("packet"));  // validated, not used
      } else {
        throw ReplayError("unknown record kind '" + kind + "'", lineno);
      }
    } catch (const ReplayError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ReplayError(std::string("malformed record: ") + e.what(), lineno);
    } catch (const Error& e) {
      throw ReplayError(e.what(), lineno);
    }
  }
  if (!have_header) throw ReplayError("empty log", lineno);
  if (!have_end) throw ReplayError("log is truncated (no end record)", lineno);
  return log;
}

inline ScenarioLog read_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open log " + path);
  return read_log(in);
}

}  // namespace coopfusion
