#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "coopfusion/calibration.hpp"
#include "coopfusion/calibration_sweep.hpp"
#include "oracles/bruteforce.hpp"

using namespace coopfusion;

namespace {

// Normal-equation oracle for the affine case in closed form.
std::pair<double, double> affine_oracle(const std::vector<ErrorSample>& s) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& e : s) {
    const double y = std::abs(e.error);
    n += 1;
    sx += e.predictor;
    sy += y;
    sxx += e.predictor * e.predictor;
    sxy += e.predictor * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {(sy - slope * sx) / n, slope};
}

}  // namespace

TEST(FitErrorModel, ExactAffineDataRecovered) {
  std::vector<ErrorSample> s;
  for (int i = 0; i <= 30; ++i) {
    const double d = 0.1 * i;
    s.push_back({d, (i % 2 ? -1.0 : 1.0) * (0.0517 * d + 0.0126)});
  }
  const auto m = fit_error_model(s, 1);
  ASSERT_EQ(m.coefficients.size(), 2u);
  EXPECT_NEAR(m.coefficients[0], 0.0126, 1e-9);
  EXPECT_NEAR(m.coefficients[1], 0.0517, 1e-9);
}

TEST(FitErrorModel, ConstantSamplesGiveZeroSlope) {
  std::vector<ErrorSample> s;
  for (int i = 0; i < 10; ++i) s.push_back({0.3 * i, 0.05});
  const auto m = fit_error_model(s, 1);
  EXPECT_NEAR(m.coefficients[1], 0.0, 1e-9);
  EXPECT_NEAR(m.coefficients[0], 0.05, 1e-9);
}

TEST(FitErrorModel, NoisyAffineMatchesNormalEquationsOracle) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> d(0.0, 3.0);
  std::normal_distribution<double> n(0.0, 0.005);
  std::vector<ErrorSample> s;
  for (int i = 0; i < 10000; ++i) {
    const double x = d(rng);
    s.push_back({x, 0.0126 + 0.0517 * x + n(rng)});
  }
  const auto m = fit_error_model(s, 1);
  const auto [c0, c1] = affine_oracle(s);
  EXPECT_NEAR(m.coefficients[0], c0, 1e-12);
  EXPECT_NEAR(m.coefficients[1], c1, 1e-12);
  EXPECT_NEAR(m.coefficients[0], 0.0126, 0.02 * 0.0126);
  EXPECT_NEAR(m.coefficients[1], 0.0517, 0.02 * 0.0517);
}

TEST(FitErrorModel, QuadraticRecovered) {
  std::vector<ErrorSample> s;
  for (int i = 0; i < 20; ++i) {
    const double x = 0.2 * i;
    s.push_back({x, 0.01 + 0.02 * x + 0.005 * x * x});
  }
  const auto m = fit_error_model(s, 2);
  EXPECT_NEAR(m.coefficients[0], 0.01, 1e-9);
  EXPECT_NEAR(m.coefficients[1], 0.02, 1e-9);
  EXPECT_NEAR(m.coefficients[2], 0.005, 1e-9);
}

TEST(FitErrorModel, Errors) {
  std::vector<ErrorSample> same(10, ErrorSample{1.0, 0.1});
  EXPECT_THROW(fit_error_model(same, 1), DegenerateFitError);
  try {
    fit_error_model(same, 1);
  } catch (const DegenerateFitError& e) {
    EXPECT_NE(std::string(e.what()).find("degree 0"), std::string::npos);
  }
  EXPECT_THROW(fit_error_model({{0, 0.1}, {1, 0.2}}, 1), InvalidArgumentError);
  EXPECT_THROW(fit_error_model({{-1, 0.1}, {1, 0.2}, {2, 0.3}}, 1), InvalidArgumentError);
}

TEST(FitErrorModel, DegreeZeroEqualsFixedModel) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 0.1);
  std::vector<ErrorSample> s;
  for (int i = 0; i < 100; ++i) s.push_back({0.03 * i, n(rng)});
  EXPECT_EQ(fit_error_model(s, 0), fit_fixed_model(s));
}

TEST(FitFixedModel, Examples) {
  EXPECT_NEAR(fit_fixed_model({{0, 0.1}, {1, -0.3}}).coefficients[0], 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(fit_fixed_model({{2, 0.07}}).coefficients[0], 0.07);
  EXPECT_THROW(fit_fixed_model({}), InvalidArgumentError);
}

TEST(FitFixedModel, MeanSigmaOfCameraDistal) {
  // Expected sigma over d ~ U[0, 3] is 0.0517 * 1.5 + 0.0126.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.0, 3.0);
  std::vector<ErrorSample> s;
  for (int i = 0; i < 200000; ++i) {
    const double x = d(rng);
    s.push_back({x, std::normal_distribution<double>(0.0, 0.0126 + 0.0517 * x)(rng)});
  }
  const auto m = fit_fixed_model(s, PredictorKind::distance, FitTarget::gaussian_sigma);
  EXPECT_NEAR(m.coefficients[0], 0.0517 * 1.5 + 0.0126, 0.01 * (0.0517 * 1.5 + 0.0126));
}

TEST(FitQuality, PerfectFitIsOne) {
  std::vector<ErrorSample> s;
  for (int i = 0; i < 10; ++i) s.push_back({0.1 * i, 0.02 + 0.03 * 0.1 * i});
  EXPECT_NEAR(fit_quality(s, fit_error_model(s, 1)), 1.0, 1e-12);
}

TEST(FitQuality, MeanModelIsZero) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0, 1);
  std::vector<ErrorSample> s;
  for (int i = 0; i < 50; ++i) s.push_back({0.1 * i, n(rng)});
  EXPECT_EQ(fit_quality(s, fit_fixed_model(s)), 0.0);
  EXPECT_GE(fit_quality(s, fit_error_model(s, 1)), 0.0);
}

TEST(FitQuality, MatchesAnalyticSignalFraction) {
  // y = a + b x + e, x ~ U[0,3], e ~ N(0, s^2): R^2 = b^2 var(x) / (b^2 var(x) + s^2).
  for (double sigma : {0.1, 0.4}) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> d(0.0, 3.0);
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<ErrorSample> s;
    for (int i = 0; i < 20000; ++i) {
      const double x = d(rng);
      s.push_back({x, 3.0 + 0.5 * x + n(rng)});
    }
    const double signal = 0.25 * 0.75;
    EXPECT_NEAR(fit_quality(s, fit_error_model(s, 1)), signal / (signal + sigma * sigma), 0.05);
  }
}

TEST(FitQuality, Errors) {
  EXPECT_THROW(fit_quality({{1, 0.1}}, ErrorModel::fixed(0.1, PredictorKind::distance)), InvalidArgumentError);
  EXPECT_THROW(fit_quality({{1, 0.1}, {2, -0.1}}, ErrorModel::fixed(0.1, PredictorKind::distance)),
               UndefinedRSquaredError);
}

TEST(Matching, IdenticalListsZeroError) {
  const std::vector<Vec2> pts{Vec2(1, 0), Vec2(0, 2), Vec2(-1, -1)};
  const auto m = match_observations_to_truth(Vec2::Zero(), pts, pts, 0.5);
  ASSERT_EQ(m.pairs.size(), 3u);
  for (const auto& p : m.pairs) {
    EXPECT_EQ(p.observation, p.truth);
    EXPECT_EQ(p.distal_error, 0.0);
    EXPECT_EQ(p.perp_error, 0.0);
  }
}

TEST(Matching, NearerTruthWins) {
  const auto m = match_observations_to_truth(Vec2::Zero(), {Vec2(1, 0)}, {Vec2(1.3, 0), Vec2(1.1, 0)}, 0.5);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].truth, 1u);
  EXPECT_EQ(m.unmatched_truth, std::vector<std::size_t>{0});
}

TEST(Matching, ComponentsAlongAndAcrossRay) {
  const auto m = match_observations_to_truth(Vec2::Zero(), {Vec2(0.05, 2.1)}, {Vec2(0, 2)}, 0.5);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_NEAR(m.pairs[0].true_range, 2.0, 1e-15);
  EXPECT_NEAR(m.pairs[0].distal_error, 0.1, 1e-12);
  EXPECT_NEAR(m.pairs[0].perp_error, -0.05, 1e-12);
}

TEST(Matching, BeyondMaxDistanceUnmatched) {
  const auto m = match_observations_to_truth(Vec2::Zero(), {Vec2(0, 0)}, {Vec2(1, 0)}, 0.5);
  EXPECT_TRUE(m.pairs.empty());
  EXPECT_EQ(m.unmatched_observations.size(), 1u);
}

TEST(Matching, OptimalWhereGreedyIsNot) {
  // Greedy takes O0-T0 (0.45) then O1-T1 (1.5); optimal crosses for 1.05.
  const std::vector<Vec2> obs{Vec2(0.45, 0), Vec2(-0.5, 0)}, truth{Vec2(0, 0), Vec2(1, 0)};
  const auto m = match_observations_to_truth(Vec2(0, -5), obs, truth, 2.0);
  ASSERT_EQ(m.pairs.size(), 2u);
  double total = 0.0;
  for (const auto& p : m.pairs) total += p.distance;
  EXPECT_NEAR(total, 1.05, 1e-12);
}

TEST(Matching, RandomizedAgainstExhaustiveOracle) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  for (int trial = 0; trial < 400; ++trial) {
    const int no = 1 + static_cast<int>(rng() % 4), nt = 1 + static_cast<int>(rng() % 4);
    std::vector<Vec2> obs, truth;
    for (int i = 0; i < no; ++i) obs.emplace_back(u(rng), u(rng));
    for (int j = 0; j < nt; ++j) truth.emplace_back(u(rng), u(rng));
    const double max_dist = 0.6;
    const auto m = match_observations_to_truth(Vec2::Zero(), obs, truth, max_dist);
    double score = 0.0;
    for (const auto& p : m.pairs) score += p.distance - max_dist;
    EXPECT_NEAR(score, oracles::best_gated_matching(obs, truth, max_dist), 1e-9) << "trial " << trial;
    EXPECT_EQ(m.pairs.size() + m.unmatched_observations.size(), obs.size());
  }
}

TEST(SampleCsv, RoundTripAndGroups) {
  const std::vector<CalibrationSample> s{{0.5, -0.01, "distal", "camera"}, {0.0, 0.02, "lateral", "localizer"}};
  std::stringstream ss;
  write_samples_csv(ss, s);
  const auto back = read_samples_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].error, -0.01);
  EXPECT_EQ(back[1].source, "localizer");
}

TEST(SampleCsv, RejectsMalformed) {
  std::stringstream bad_header("a,b,c\n1,2,x,y\n");
  EXPECT_THROW(read_samples_csv(bad_header), ConfigError);
  std::stringstream bad_row("predictor,error,component,source\n1,abc,distal,camera\n");
  EXPECT_THROW(read_samples_csv(bad_row), ConfigError);
  std::stringstream empty("");
  EXPECT_THROW(read_samples_csv(empty), ConfigError);
}

TEST(Closure, SweepRefitRecoversGeneratingModels) {
  const ModelSet truth = default_parameterized_models();
  CalibrationSweep sweep;
  sweep.samples_per_model = 50000;
  sweep.seed = 1;
  const auto samples = generate_calibration_samples(truth, sweep);
  const auto fitted = fit_model_groups(samples, 1, FitTarget::gaussian_sigma);
  ASSERT_EQ(fitted.size(), 6u);
  for (const char* name : kModelNames) {
    const ErrorModel& want = model_by_name(truth, name);
    const ErrorModel& got = fitted.at(name);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_NEAR(got.coefficients[k], want.coefficients[k], 0.03 * std::abs(want.coefficients[k]))
          << name << " coefficient " << k;
    }
  }
}

TEST(Closure, ParameterizedFitDominatesMeanModel) {
  const auto samples = generate_calibration_samples(default_parameterized_models(), {2000, 0.25, 3.0, 0.3, -0.3, 0.5, 1.0, 5});
  std::map<std::string, std::vector<ErrorSample>> groups;
  for (const auto& s : samples) groups[model_name_for(s.source, s.component)].push_back({s.predictor, s.error});
  for (const auto& [name, g] : groups) {
    const auto kind = name.rfind("localizer", 0) == 0 ? PredictorKind::speed : PredictorKind::distance;
    EXPECT_GE(fit_quality(g, fit_error_model(g, 1, kind)), fit_quality(g, fit_fixed_model(g, kind))) << name;
  }
}
