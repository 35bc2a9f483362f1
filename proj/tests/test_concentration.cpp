#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "penlin/concentration.hpp"
#include "test_util.hpp"

using namespace penlin;

TEST(SortedQuantile, Type7Interpolation) {
  const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(sorted_quantile(s, 1.5), 4.0);
  EXPECT_THROW_CODE(sorted_quantile(std::vector<double>{}, 0.5), ErrorCode::EmptySample);
}

TEST(CalibrateTails, ConstantSample) {
  const std::vector<double> ones(50, 1.0);
  const TailModel t = calibrate_tails(ones, ones, 10);
  EXPECT_EQ(t.s_a(), 1.0);
  EXPECT_EQ(t.s_b(), 1.0);
  for (double delta : {0.01, 0.1, kInvE, 0.5, 1.0}) {
    EXPECT_EQ(t.z_a(delta), 1.0);
    EXPECT_EQ(t.z_b(delta), 1.0);
  }
}

TEST(CalibrateTails, OrderStatistics) {
  std::vector<double> s(100);
  for (int i = 0; i < 100; ++i) s[i] = i + 1.0;
  std::shuffle(s.begin(), s.end(), std::mt19937_64(3));
  const TailModel t = calibrate_tails(s, s, 1000);
  EXPECT_EQ(t.z_a(kInvE), 1.0);
  EXPECT_EQ(t.n_train(), 100);
  EXPECT_EQ(t.sample_size(), 1000);
  // 90th percentile under type-7: h = 99 * 0.9 = 89.1 between 90 and 91.
  EXPECT_NEAR(t.z_a(0.1) * t.s_a(), 90.0 + 0.1, 1e-10);
  // s_a: h = 99 * (1 - 1/e).
  const double h = 99.0 * (1.0 - kInvE);
  EXPECT_NEAR(t.s_a(), 1.0 + h, 1e-12);
  EXPECT_NEAR(t.z_a(1.0), 1.0 / t.s_a(), 1e-15);
  // Interpolation toward the sample maximum as delta -> 0.
  EXPECT_NEAR(t.z_a(1e-9) * t.s_a(), 100.0, 100.0 * 1e-9);
  EXPECT_EQ(t.z_a(1e-300) * t.s_a(), 100.0);
}

TEST(CalibrateTails, MonotoneAndNormalized) {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> ln(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(200), b(200);
    for (auto& v : a) v = ln(rng);
    for (auto& v : b) v = ln(rng);
    const TailModel t = calibrate_tails(a, b, 100);
    EXPECT_EQ(t.z_a(kInvE), 1.0);
    EXPECT_EQ(t.z_b(kInvE), 1.0);
    EXPECT_GE(t.z_a(0.05), t.z_a(0.25));
    EXPECT_GE(t.z_a(0.25), t.z_a(0.5));
    double prev = std::numeric_limits<double>::infinity();
    for (double delta = 0.001; delta <= 1.0; delta += 0.001) {
      EXPECT_LE(t.z_b(delta), prev);
      prev = t.z_b(delta);
    }
    EXPECT_GT(t.s_a(), 0.0);
  }
}

TEST(CalibrateTails, Errors) {
  const std::vector<double> zeros(10, 0.0), ones(10, 1.0);
  EXPECT_THROW_CODE(calibrate_tails(std::vector<double>{}, ones, 1), ErrorCode::EmptySample);
  EXPECT_THROW_CODE(calibrate_tails(zeros, ones, 1), ErrorCode::DegenerateSample);
  EXPECT_THROW_CODE(calibrate_tails(std::vector<double>{-1.0}, ones, 1), ErrorCode::InvalidArgument);
  const TailModel t = calibrate_tails(ones, ones, 1);
  EXPECT_THROW_CODE(t.z_a(0.0), ErrorCode::InvalidArgument);
}

TEST(CalibrateTails, Reproducible) {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> a(100), b(100);
  for (auto& v : a) v = e(rng);
  for (auto& v : b) v = e(rng);
  const TailModel t1 = calibrate_tails(a, b, 10, "x");
  const TailModel t2 = calibrate_tails(a, b, 10, "x");
  EXPECT_EQ(t1.to_json(), t2.to_json());
}

TEST(CoverageTest, Examples) {
  std::mt19937_64 rng(6);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> a(500), b(500);
  for (auto& v : a) v = e(rng);
  for (auto& v : b) v = e(rng);
  const TailModel t = calibrate_tails(a, b, 10);
  const std::vector<double> zeros(20, 0.0);
  const Coverage zero = coverage_test(t, zeros, zeros, 0.1);
  EXPECT_EQ(zero.a, 1.0);
  EXPECT_EQ(zero.b, 1.0);
  EXPECT_EQ(zero.joint, 1.0);

  const Coverage self = coverage_test(t, a, b, kInvE);
  const double n = 500.0;
  EXPECT_GE(self.a, 1.0 - kInvE - 1.0 / n);
  EXPECT_LE(self.a, 1.0 - kInvE + 1.0 / n);
  for (double delta : {0.5, 0.25, 0.1}) {
    const Coverage c = coverage_test(t, a, b, delta);
    EXPECT_NEAR(c.a, 1.0 - delta, 1.0 / n);
    EXPECT_NEAR(c.b, 1.0 - delta, 1.0 / n);
    EXPECT_LE(c.joint, std::min(c.a, c.b));
  }
  EXPECT_THROW_CODE(coverage_test(t, std::vector<double>{}, zeros, 0.1), ErrorCode::EmptySample);
}

TEST(CoverageTest, FreshSamplesFromSameLaw) {
  std::mt19937_64 rng(7);
  std::gamma_distribution<double> g(3.0, 1.0);
  auto draw = [&] {
    std::vector<double> v(2000);
    for (auto& x : v) x = g(rng);
    return v;
  };
  const auto ca = draw(), cb = draw(), fa = draw(), fb = draw();
  const TailModel t = calibrate_tails(ca, cb, 100);
  const Coverage c = coverage_test(t, fa, fb, 0.1);
  // Independent marginals: joint coverage near 0.81, each marginal near 0.9.
  EXPECT_GE(c.a, 0.88);
  EXPECT_GE(c.b, 0.88);
}

TEST(RateFit, ExactPowerLaws) {
  std::vector<std::pair<double, double>> half, one;
  for (double n : {100.0, 400.0, 1600.0}) {
    half.emplace_back(n, 1.0 / std::sqrt(n));
    one.emplace_back(n, 3.0 / n);
  }
  EXPECT_NEAR(rate_fit(half).slope, -0.5, 1e-12);
  EXPECT_NEAR(rate_fit(one).slope, -1.0, 1e-12);
  EXPECT_NEAR(rate_fit(one).intercept, std::log(3.0), 1e-12);
}

TEST(RateFit, NeedsThreeDistinctSizes) {
  const std::vector<std::pair<double, double>> two{{10.0, 1.0}, {10.0, 2.0}, {20.0, 1.0}};
  EXPECT_THROW_CODE(rate_fit(two), ErrorCode::InsufficientPoints);
}

TEST(TailModel, JsonRoundTrip) {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e(2.0);
  std::vector<double> a(64), b(64);
  for (auto& v : a) v = e(rng);
  for (auto& v : b) v = e(rng);
  const TailModel t = calibrate_tails(a, b, 4096, "walk");
  const TailModel back = TailModel::from_json(nlohmann::json::parse(t.to_json().dump()));
  EXPECT_EQ(back.s_a(), t.s_a());
  EXPECT_EQ(back.s_b(), t.s_b());
  EXPECT_EQ(back.normalized_a(), t.normalized_a());
  EXPECT_EQ(back.normalized_b(), t.normalized_b());
  EXPECT_EQ(back.sample_size(), 4096);
  EXPECT_EQ(back.model_id(), "walk");
  for (double delta : {0.01, 0.1, 0.5}) EXPECT_EQ(back.z_a(delta), t.z_a(delta));
  EXPECT_THROW_CODE(TailModel::from_json(nlohmann::json{{"s_a", 1.0}}), ErrorCode::ParseError);
}
