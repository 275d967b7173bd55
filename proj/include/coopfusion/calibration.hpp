#pragma once

// Fits error models from matched (predictor, error) samples and scores them.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coopfusion/assignment.hpp"
#include "coopfusion/error_models.hpp"
#include "coopfusion/model_io.hpp"

namespace coopfusion {

struct ErrorSample {
  double predictor = 0.0;
  double error = 0.0;  // signed component error, meters
};

/// What the regression targets. `absolute` fits |error| directly.
/// `gaussian_sigma` fits |error| * sqrt(pi/2), the unbiased estimate of the
/// standard deviation of a zero-mean Gaussian error.
enum class FitTarget { absolute, gaussian_sigma };

inline double fit_target_value(const ErrorSample& s, FitTarget target) {
  const double a = std::abs(s.error);
  return target == FitTarget::gaussian_sigma ? a * std::sqrt(std::numbers::pi / 2.0) : a;
}

namespace detail {

inline void check_samples(const std::vector<ErrorSample>& samples) {
  for (const auto& s : samples) {
    if (!(s.predictor >= 0.0) || !std::isfinite(s.predictor)) {
      throw InvalidArgumentError("error sample predictor must be finite and >= 0");
    }
    if (!std::isfinite(s.error)) throw InvalidArgumentError("error sample error must be finite");
  }
}

inline double mean_target(const std::vector<ErrorSample>& samples, FitTarget target) {
  double sum = 0.0;
  for (const auto& s : samples) sum += fit_target_value(s, target);
  return sum / static_cast<double>(samples.size());
}

}  // namespace detail

/// Least-squares polynomial fit of the target against the predictor, solved
/// through the normal equations.
inline ErrorModel fit_error_model(const std::vector<ErrorSample>& samples, std::size_t degree,
                                  PredictorKind kind = PredictorKind::distance,
                                  FitTarget target = FitTarget::absolute) {
  detail::check_samples(samples);
  if (samples.size() <= degree + 1) {
    throw InvalidArgumentError("fit_error_model needs more than degree + 1 samples");
  }
  if (degree == 0) return {kind, {detail::mean_target(samples, target)}};

  std::set<double> distinct;
  for (const auto& s : samples) distinct.insert(s.predictor);
  if (distinct.size() <= degree) {
    throw DegenerateFitError("design matrix is rank deficient (too few distinct predictor values); "
                             "use degree " + std::to_string(distinct.size() - 1));
  }

  const auto m = static_cast<Eigen::Index>(degree + 1);
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd row(m);
  for (const auto& s : samples) {
    double p = 1.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      row[k] = p;
      p *= s.predictor;
    }
    normal.noalias() += row * row.transpose();
    rhs.noalias() += row * fit_target_value(s, target);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
  if (qr.rank() < m) throw DegenerateFitError("normal equations are singular; reduce the degree");
  const Eigen::VectorXd c = qr.solve(rhs);
  return {kind, std::vector<double>(c.data(), c.data() + m)};
}

/// Degree-0 model: the mean of the target.
inline ErrorModel fit_fixed_model(const std::vector<ErrorSample>& samples,
                                  PredictorKind kind = PredictorKind::distance,
                                  FitTarget target = FitTarget::absolute) {
  if (samples.empty()) throw InvalidArgumentError("fit_fixed_model needs at least one sample");
  detail::check_samples(samples);
  return {kind, {detail::mean_target(samples, target)}};
}

/// Coefficient of determination of `model` against the target values.
inline double fit_quality(const std::vector<ErrorSample>& samples, const ErrorModel& model,
                          FitTarget target = FitTarget::absolute) {
  if (samples.size() < 2) throw InvalidArgumentError("fit_quality needs at least two samples");
  const double mean = detail::mean_target(samples, target);
  double ss_tot = 0.0, ss_res = 0.0;
  for (const auto& s : samples) {
    const double y = fit_target_value(s, target);
    ss_tot += (y - mean) * (y - mean);
    const double r = y - eval_error_model(model, s.predictor);
    ss_res += r * r;
  }
  if (!(ss_tot > 0.0)) throw UndefinedRSquaredError("R^2 undefined: targets have zero variance");
  if (ss_res == ss_tot) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

struct MatchedPair {
  std::size_t observation = 0;
  std::size_t truth = 0;
  double distance = 0.0;      // |observation - truth|
  double true_range = 0.0;    // |truth - sensor|
  double distal_error = 0.0;  // along the sensor->truth ray
  double perp_error = 0.0;    // across it (counter-clockwise positive)
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> unmatched_observations;
  std::vector<std::size_t> unmatched_truth;
};

/// Global-nearest-neighbor matching: the one-to-one assignment that minimizes
/// total distance, where pairs farther apart than max_dist are never matched
/// and each match must beat leaving both items unmatched.
inline MatchResult match_observations_to_truth(const Vec2& sensor, const std::vector<Vec2>& observations,
                                               const std::vector<Vec2>& truth, double max_dist) {
  std::vector<std::vector<double>> cost(observations.size(), std::vector<double>(truth.size(), 0.0));
  for (std::size_t i = 0; i < observations.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double d = (observations[i] - truth[j]).norm();
      cost[i][j] = d <= max_dist ? d - max_dist : 0.0;
    }
  }
  const std::vector<int> assign = solve_assignment(cost);

  MatchResult result;
  std::vector<bool> truth_used(truth.size(), false);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const int j = assign.empty() ? -1 : assign[i];
    if (j >= 0 && (observations[i] - truth[j]).norm() <= max_dist) {
      const Vec2 ray = truth[j] - sensor;
      const double range = ray.norm();
      const Vec2 u = range > 0 ? Vec2(ray / range) : Vec2(1.0, 0.0);
      const Vec2 n(-u.y(), u.x());
      const Vec2 e = observations[i] - truth[j];
      result.pairs.push_back({i, static_cast<std::size_t>(j), e.norm(), range, e.dot(u), e.dot(n)});
      truth_used[j] = true;
    } else {
      result.unmatched_observations.push_back(i);
    }
  }
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (!truth_used[j]) result.unmatched_truth.push_back(j);
  }
  return result;
}

/// One row of the calibration sample log.
struct CalibrationSample {
  double predictor = 0.0;
  double error = 0.0;
  std::string component;  // distal | perpendicular | longitudinal | lateral
  std::string source;     // camera | lidar | localizer
};

inline std::string model_name_for(const std::string& source, const std::string& component) {
  return source + "_" + component;
}

inline void write_samples_csv(std::ostream& out, const std::vector<CalibrationSample>& samples) {
  out << "predictor,error,component,source\n";
  out.precision(17);
  for (const auto& s : samples) out << s.predictor << ',' << s.error << ',' << s.component << ',' << s.source << '\n';
}

inline std::vector<CalibrationSample> read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("sample CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "predictor,error,component,source") {
    throw ConfigError("sample CSV header must be 'predictor,error,component,source'");
  }
  std::vector<CalibrationSample> out;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (auto& field : f) std::getline(ss, field, ',');
    try {
      out.push_back({std::stod(f[0]), std::stod(f[1]), f[2], f[3]});
    } catch (const std::exception&) {
      throw ConfigError("sample CSV line " + std::to_string(lineno) + ": malformed row");
    }
    if (out.back().component.empty() || out.back().source.empty()) {
      throw ConfigError("sample CSV line " + std::to_string(lineno) + ": missing component or source");
    }
  }
  return out;
}

/// Fits one model per (source, component) group present in `samples`, keyed
/// by model name (e.g. "camera_distal").
inline std::map<std::string, ErrorModel> fit_model_groups(const std::vector<CalibrationSample>& samples,
                                                          std::size_t degree, FitTarget target) {
  std::map<std::string, std::vector<ErrorSample>> groups;
  for (const auto& s : samples) groups[model_name_for(s.source, s.component)].push_back({s.predictor, s.error});
  std::map<std::string, ErrorModel> out;
  for (const auto& [name, group] : groups) {
    const PredictorKind kind = name.rfind("localizer", 0) == 0 ? PredictorKind::speed : PredictorKind::distance;
    out[name] = fit_error_model(group, degree, kind, target);
  }
  return out;
}

}  // namespace coopfusion
