#pragma once

#include <array>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "coopfusion/error_models.hpp"

namespace coopfusion {

/// The six error models a cooperative-sensing setup needs: distal and
/// perpendicular for each sensor type, longitudinal and lateral for the
/// localizer.
struct ModelSet {
  ErrorModel camera_distal;
  ErrorModel camera_perpendicular;
  ErrorModel lidar_distal;
  ErrorModel lidar_perpendicular;
  ErrorModel localizer_longitudinal;
  ErrorModel localizer_lateral;

  bool operator==(const ModelSet&) const = default;
};

inline constexpr std::array<const char*, 6> kModelNames = {
    "camera_distal", "camera_perpendicular",  "lidar_distal",
    "lidar_perpendicular", "localizer_longitudinal", "localizer_lateral"};

inline ErrorModel& model_by_name(ModelSet& set, std::string_view name) {
  if (name == "camera_distal") return set.camera_distal;
  if (name == "camera_perpendicular") return set.camera_perpendicular;
  if (name == "lidar_distal") return set.lidar_distal;
  if (name == "lidar_perpendicular") return set.lidar_perpendicular;
  if (name == "localizer_longitudinal") return set.localizer_longitudinal;
  if (name == "localizer_lateral") return set.localizer_lateral;
  throw ConfigError("unknown model name '" + std::string(name) + "'");
}

inline const ErrorModel& model_by_name(const ModelSet& set, std::string_view name) {
  return model_by_name(const_cast<ModelSet&>(set), name);
}

/// Affine fits measured on the 1/10-scale testbed.
inline ModelSet default_parameterized_models() {
  constexpr auto d = PredictorKind::distance;
  constexpr auto v = PredictorKind::speed;
  return {ErrorModel::affine(0.0126, 0.0517, d), ErrorModel::affine(0.023, 0.0117, d),
          ErrorModel::affine(0.0607, 0.0165, d), ErrorModel::affine(0.0361, 0.0097, d),
          ErrorModel::affine(0.0428, 0.0782, v), ErrorModel::affine(0.0241, 0.0841, v)};
}

/// Mean-error baseline for the same pipelines.
inline ModelSet default_fixed_models() {
  constexpr auto d = PredictorKind::distance;
  constexpr auto v = PredictorKind::speed;
  return {ErrorModel::fixed(0.0881, d), ErrorModel::fixed(0.0401, d), ErrorModel::fixed(0.0848, d),
          ErrorModel::fixed(0.0503, d), ErrorModel::fixed(0.0663, v), ErrorModel::fixed(0.0493, v)};
}

inline PredictorKind predictor_from_string(std::string_view s) {
  if (s == "distance") return PredictorKind::distance;
  if (s == "speed") return PredictorKind::speed;
  throw ConfigError("unknown predictor '" + std::string(s) + "'");
}

inline nlohmann::json to_json(const ErrorModel& m) {
  return {{"predictor", std::string(to_string(m.predictor))}, {"coefficients", m.coefficients}};
}

inline ErrorModel error_model_from_json(const nlohmann::json& j) {
  try {
    ErrorModel m{predictor_from_string(j.at("predictor").get<std::string>()),
                 j.at("coefficients").get<std::vector<double>>()};
    if (m.coefficients.empty()) throw InvalidModelError("error model has no coefficients");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad error model: ") + e.what());
  }
}

inline nlohmann::json to_json(const ModelSet& set) {
  nlohmann::json j = nlohmann::json::object();
  for (const char* name : kModelNames) j[name] = to_json(model_by_name(set, name));
  return j;
}

inline ModelSet model_set_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model file must be a JSON object");
  ModelSet set;
  for (const char* name : kModelNames) {
    if (!j.contains(name)) throw ConfigError(std::string("model file missing '") + name + "'");
    model_by_name(set, name) = error_model_from_json(j.at(name));
  }
  return set;
}

inline ModelSet load_model_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file " + path);
  try {
    return model_set_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("model file " + path + ": " + e.what());
  }
}

}  // namespace coopfusion
