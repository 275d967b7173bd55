#pragma once

// Newline-delimited JSON wire format for PlatformPacket.

#include <cmath>
#include <nlohmann/json.hpp>
#include <string>

#include "coopfusion/global_fusion.hpp"

namespace coopfusion {

inline nlohmann::json mat2_to_json(const Mat2& m) {
  return nlohmann::json::array({nlohmann::json::array({m(0, 0), m(0, 1)}),
                                nlohmann::json::array({m(1, 0), m(1, 1)})});
}

namespace detail {

inline double finite_number(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw ConfigError(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite");
  return v;
}

}  // namespace detail

inline Mat2 mat2_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != 2 || !j[1].is_array() ||
      j[1].size() != 2) {
    throw ConfigError(std::string(what) + " must be a 2x2 array");
  }
  Mat2 m;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) m(r, c) = detail::finite_number(j[r][c], what);
  }
  return m;
}

inline Mat2 covariance_from_json(const nlohmann::json& j, const char* what) {
  const Mat2 m = mat2_from_json(j, what);
  if (!is_psd(m)) throw ConfigError(std::string(what) + " must be symmetric positive semi-definite");
  return m;
}

inline nlohmann::json to_json(const PlatformPacket& p) {
  nlohmann::json tracks = nlohmann::json::array();
  for (const auto& t : p.tracks) {
    tracks.push_back({{"id", t.id},
                      {"mu", {t.mu.x(), t.mu.y()}},
                      {"cov", mat2_to_json(t.cov)},
                      {"class", std::string(to_string(t.object_class))}});
  }
  return {{"platform_id", p.platform_id},
          {"t", p.t},
          {"pose", {{"x", p.pose.x}, {"y", p.pose.y}, {"theta", p.pose.theta}, {"v", p.pose.v}}},
          {"pose_cov", mat2_to_json(p.pose_cov)},
          {"tracks", std::move(tracks)}};
}

inline PlatformPacket packet_from_json(const nlohmann::json& j) {
  using detail::finite_number;
  try {
    PlatformPacket p;
    p.platform_id = j.at("platform_id").get<std::string>();
    p.t = finite_number(j.at("t"), "t");
    const auto& pose = j.at("pose");
    p.pose = {finite_number(pose.at("x"), "pose.x"), finite_number(pose.at("y"), "pose.y"),
              finite_number(pose.at("theta"), "pose.theta"), finite_number(pose.at("v"), "pose.v")};
    p.pose_cov = covariance_from_json(j.at("pose_cov"), "pose_cov");
    for (const auto& t : j.at("tracks")) {
      const auto& mu = t.at("mu");
      if (!mu.is_array() || mu.size() != 2) throw ConfigError("track mu must be [x, y]");
      p.tracks.push_back({t.at("id").get<std::string>(),
                          Vec2(finite_number(mu[0], "mu"), finite_number(mu[1], "mu")),
                          covariance_from_json(t.at("cov"), "track cov"),
                          object_class_from_string(t.at("class").get<std::string>())});
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad packet: ") + e.what());
  }
}

inline std::string serialize_packet(const PlatformPacket& p) { return to_json(p).dump(); }

inline PlatformPacket parse_packet(const std::string& line) {
  try {
    return packet_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("bad packet: ") + e.what());
  }
}

}  // namespace coopfusion
