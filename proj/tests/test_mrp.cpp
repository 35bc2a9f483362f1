#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "penlin/mrp.hpp"
#include "penlin/solvers.hpp"
#include "test_util.hpp"

using namespace penlin;
using testing_util::normal;
using testing_util::vec;

namespace {

Matrix random_stochastic(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) p(i, j) = u(rng);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

FiniteMrp random_mrp(std::mt19937_64& rng, int n, double noise = 0.1) {
  FiniteMrp mrp;
  mrp.transition = random_stochastic(rng, n);
  mrp.mean_reward = normal(rng, n, n);
  mrp.reward_noise_std = noise;
  mrp.gamma = 0.9;
  return mrp;
}

FiniteMrp constant_chain() {
  FiniteMrp mrp;
  mrp.transition = Matrix::Constant(2, 2, 0.5);
  mrp.mean_reward = Matrix::Ones(2, 2);
  mrp.reward_noise_std = 0.0;
  mrp.gamma = 0.9;
  return mrp;
}

FeatureMap constant_feature(int n) { return {Matrix::Ones(n, 1)}; }

}  // namespace

TEST(CheckRowStochastic, RejectsBadRows) {
  Matrix p = Matrix::Constant(2, 2, 0.5);
  EXPECT_NO_THROW(check_row_stochastic(p, "P"));
  p(1, 0) = 0.6;
  EXPECT_THROW_CODE(check_row_stochastic(p, "P"), ErrorCode::InvalidArgument);
  p << 1.5, -0.5, 0.5, 0.5;
  EXPECT_THROW_CODE(check_row_stochastic(p, "P"), ErrorCode::InvalidArgument);
  FiniteMrp mrp = constant_chain();
  mrp.gamma = 1.0;
  EXPECT_THROW_CODE(mrp.validate(), ErrorCode::InvalidArgument);
}

TEST(StationaryDistribution, Examples) {
  const Vector half = stationary_distribution(Matrix::Constant(2, 2, 0.5));
  EXPECT_NEAR(half(0), 0.5, 1e-15);
  EXPECT_NEAR(half(1), 0.5, 1e-15);
  Matrix cyc(3, 3);
  cyc << 0.1, 0.9, 0.0, 0.0, 0.1, 0.9, 0.9, 0.0, 0.1;
  const Vector mu = stationary_distribution(cyc);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(mu(i), 1.0 / 3.0, 1e-12);
}

TEST(StationaryDistribution, PeriodicChainFails) {
  Matrix flip(2, 2);
  flip << 0.0, 1.0, 1.0, 0.0;
  // The uniform start is already stationary for the flip chain; a periodic
  // chain with an uneven law oscillates instead.
  EXPECT_NO_THROW(stationary_distribution(flip));
  Matrix bipartite(3, 3);
  bipartite << 0.0, 0.5, 0.5, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0;
  EXPECT_THROW_CODE(stationary_distribution(bipartite), ErrorCode::NoUniqueStationary);
}

TEST(StationaryDistribution, EigendecompositionOracle) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix p = random_stochastic(rng, 6);
    const Vector mu = stationary_distribution(p);
    EXPECT_LE((mu.transpose() * p - mu.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(mu.sum(), 1.0, 1e-12);
    EXPECT_GE(mu.minCoeff(), 0.0);
    const Eigen::EigenSolver<Matrix> es(p.transpose());
    Eigen::Index k = 0;
    (es.eigenvalues().array() - 1.0).abs().minCoeff(&k);
    Vector v = es.eigenvectors().col(k).real();
    v /= v.sum();
    EXPECT_LE((v - mu).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ValueFunction, Examples) {
  std::mt19937_64 rng(2);
  FiniteMrp mrp = random_mrp(rng, 4);
  mrp.mean_reward = Matrix::Ones(4, 4);
  const Vector v = value_function(mrp);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(v(i), 10.0, 1e-12);
  mrp.mean_reward.setZero();
  EXPECT_EQ(value_function(mrp), Vector::Zero(4));
}

TEST(ValueFunction, BellmanResidual) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const FiniteMrp mrp = random_mrp(rng, 2 + rep % 6);
    const Vector v = value_function(mrp);
    const Vector rbar = mrp.expected_reward();
    EXPECT_LE((v - (rbar + mrp.gamma * mrp.transition * v)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ExactSystem, ConstantFeatureExample) {
  const LinearSystem sys = exact_system(constant_chain(), constant_feature(2));
  EXPECT_NEAR(sys.a(0, 0), 0.1, 1e-15);
  EXPECT_NEAR(sys.b(0), 1.0, 1e-15);
  EXPECT_NEAR(sys.c(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(sys.b(0) / sys.a(0, 0), 10.0, 1e-12);
  EXPECT_NEAR(value_function(constant_chain())(0), 10.0, 1e-12);
}

TEST(ExactSystem, OnPolicyConsistent) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const FiniteMrp mrp = random_mrp(rng, 6);
    const FeatureMap f{normal(rng, 6, 3)};
    const LinearSystem sys = exact_system(mrp, f);
    const Vector theta = sys.a.fullPivLu().solve(sys.b);
    EXPECT_LE((sys.a * theta - sys.b).norm(), 1e-10);
    EXPECT_EQ(sys.c, sys.c.transpose());
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(sys.c).eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(ExactSystem, OffPolicyInconsistent) {
  OffPolicyMrp model;
  model.base.transition.resize(3, 3);
  model.base.transition << 0, 1, 0, 0, 1, 0, 0, 0, 1;
  model.base.mean_reward = Matrix::Ones(3, 3);
  model.base.reward_noise_std = 0.1;
  model.base.gamma = 0.9;
  model.behavior.resize(3, 3);
  model.behavior << 0, 1, 0, 0.5, 0.25, 0.25, 0, 0.25, 0.75;
  FeatureMap f;
  f.phi.resize(3, 2);
  f.phi << 1, 1, 2, 2, 0, 1;
  const LinearSystem sys = exact_system(model, f);
  const double inf =
      oracle_infimum(sys.a, sys.b, inverse_weight(sys.c), 0.0, PenaltyNorm::L2, {}, 1e6);
  EXPECT_GT(inf, 1e-3);
}

TEST(ExactSystem, BehaviorEqualToTargetDegenerates) {
  std::mt19937_64 rng(5);
  const FiniteMrp mrp = random_mrp(rng, 5);
  const FeatureMap f{normal(rng, 5, 2)};
  const OffPolicyMrp same{mrp, mrp.transition};
  const LinearSystem on = exact_system(mrp, f);
  const LinearSystem off = exact_system(same, f);
  EXPECT_EQ(on.a, off.a);
  EXPECT_EQ(on.b, off.b);
  EXPECT_EQ(on.c, off.c);
}

TEST(ExactSystem, MatchesDefinitionBySummation) {
  std::mt19937_64 rng(6);
  const FiniteMrp target = random_mrp(rng, 4);
  const OffPolicyMrp model{target, random_stochastic(rng, 4)};
  const FeatureMap f{normal(rng, 4, 3)};
  const LinearSystem sys = exact_system(model, f);
  const Vector mu = stationary_distribution(model.behavior);
  const Vector rbar = target.expected_reward();
  Matrix a = Matrix::Zero(3, 3), c = Matrix::Zero(3, 3);
  Vector b = Vector::Zero(3);
  for (int x = 0; x < 4; ++x) {
    const Vector phi = f.phi.row(x).transpose();
    Vector next = Vector::Zero(3);
    for (int y = 0; y < 4; ++y) next += target.transition(x, y) * f.phi.row(y).transpose();
    a += mu(x) * phi * (phi - target.gamma * next).transpose();
    b += mu(x) * rbar(x) * phi;
    c += mu(x) * phi * phi.transpose();
  }
  EXPECT_LE((sys.a - a).norm(), 1e-12);
  EXPECT_LE((sys.b - b).norm(), 1e-12);
  EXPECT_LE((sys.c - c).norm(), 1e-12);
}

TEST(Simulate, EmptyTrajectory) {
  const Trajectory t = simulate(constant_chain(), 0, 7);
  EXPECT_EQ(t.length(), 0u);
  EXPECT_TRUE(t.rewards.empty());
  EXPECT_GE(t.initial_state, 0);
  EXPECT_LT(t.initial_state, 2);
}

TEST(Simulate, DeterministicCycle) {
  FiniteMrp mrp;
  mrp.transition.resize(3, 3);
  mrp.transition << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  mrp.mean_reward.resize(3, 3);
  mrp.mean_reward << 0, 1, 0, 0, 0, 2, 3, 0, 0;
  mrp.reward_noise_std = 0.0;
  mrp.gamma = 0.5;
  // Periodic, but the uniform start is stationary for a rotation.
  const Trajectory t = simulate(mrp, 30, 11);
  int x = t.initial_state;
  for (std::size_t i = 0; i < t.length(); ++i) {
    EXPECT_EQ(t.states[i], x);
    const int next = (x + 1) % 3;
    EXPECT_EQ(t.next_states[i], next);
    EXPECT_EQ(t.rewards[i], mrp.mean_reward(x, next));
    x = next;
  }
}

TEST(Simulate, OnPolicySuccessorIsNextState) {
  std::mt19937_64 rng(8);
  const Trajectory t = simulate(random_mrp(rng, 4), 500, 3);
  for (std::size_t i = 0; i + 1 < t.length(); ++i) EXPECT_EQ(t.next_states[i], t.states[i + 1]);
}

TEST(Simulate, LawOfLargeNumbers) {
  std::mt19937_64 rng(9);
  const FiniteMrp mrp = random_mrp(rng, 5);
  const std::size_t n = 100000;
  const Trajectory t = simulate(mrp, n, 21);
  const Vector mu = stationary_distribution(mrp.transition);
  Vector freq = Vector::Zero(5);
  for (int s : t.states) freq(s) += 1.0;
  freq /= static_cast<double>(n);
  for (int x = 0; x < 5; ++x) EXPECT_LE(std::abs(freq(x) - mu(x)), 3.0 * std::sqrt(mu(x) / n));
}

TEST(Simulate, SeededDeterminism) {
  std::mt19937_64 rng(10);
  const OffPolicyMrp model{random_mrp(rng, 4), random_stochastic(rng, 4)};
  const Trajectory t1 = simulate(model, 1000, 99);
  const Trajectory t2 = simulate(model, 1000, 99);
  EXPECT_EQ(t1.initial_state, t2.initial_state);
  EXPECT_EQ(t1.states, t2.states);
  EXPECT_EQ(t1.next_states, t2.next_states);
  EXPECT_EQ(t1.rewards, t2.rewards);
  EXPECT_NE(simulate(model, 1000, 100).rewards, t1.rewards);
}

TEST(EmpiricalSystem, SingleTransition) {
  FeatureMap f;
  f.phi.resize(2, 2);
  f.phi << 1.0, 2.0, -1.0, 0.5;
  Trajectory t;
  t.initial_state = 0;
  t.states = {0};
  t.rewards = {0.7};
  t.next_states = {1};
  const double gamma = 0.8;
  const EmpiricalSystem sys = empirical_system(t, f, gamma);
  const Vector phi = f.phi.row(0).transpose(), next = f.phi.row(1).transpose();
  EXPECT_LE((sys.a_obs - phi * (phi - gamma * next).transpose()).norm(), 1e-15);
  EXPECT_LE((sys.b_obs - 0.7 * phi).norm(), 1e-15);
  EXPECT_LE((sys.c_obs - phi * phi.transpose()).norm(), 1e-15);
}

TEST(EmpiricalSystem, ConstantFeature) {
  const Trajectory t = simulate(constant_chain(), 257, 5);
  const EmpiricalSystem sys = empirical_system(t, constant_feature(2), 0.9);
  EXPECT_NEAR(sys.a_obs(0, 0), 0.1, 1e-15);
  EXPECT_NEAR(sys.b_obs(0), 1.0, 1e-15);
}

TEST(EmpiricalSystem, EmptyTrajectoryRejected) {
  EXPECT_THROW_CODE(empirical_system(Trajectory{}, constant_feature(2), 0.9),
                    ErrorCode::EmptyTrajectory);
}

TEST(EmpiricalSystem, WithinBootstrapErrorOfExact) {
  std::mt19937_64 rng(11);
  const FiniteMrp mrp = random_mrp(rng, 5);
  const FeatureMap f{normal(rng, 5, 3)};
  const LinearSystem exact = exact_system(mrp, f);
  const std::size_t n = 100000;
  const Trajectory t = simulate(mrp, n, 1234);
  const EmpiricalSystem sys = empirical_system(t, f, mrp.gamma);
  // Bootstrap over 50 independent trajectories for the sampling spread.
  std::vector<Matrix> reps;
  Matrix mean = Matrix::Zero(3, 3);
  for (int k = 0; k < 50; ++k) {
    reps.push_back(empirical_system(simulate(mrp, n, 5000 + k), f, mrp.gamma).a_obs);
    mean += reps.back();
  }
  mean /= 50.0;
  double var = 0.0;
  for (const Matrix& r : reps) var += (r - mean).squaredNorm();
  const double se = std::sqrt(var / 49.0);
  EXPECT_LE((sys.a_obs - exact.a).norm(), 5.0 * se);
}

TEST(ProjectedBellmanError, ConstantFeatureExample) {
  const FiniteMrp mrp = constant_chain();
  EXPECT_NEAR(projected_bellman_error(vec({10.0}), mrp, constant_feature(2)), 0.0, 1e-10);
  EXPECT_NEAR(projected_bellman_error(vec({0.0}), mrp, constant_feature(2)), 1.0, 1e-12);
}

TEST(ProjectedBellmanError, ZeroAtSolution) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const FiniteMrp mrp = random_mrp(rng, 6);
    const FeatureMap f{normal(rng, 6, 3)};
    const LinearSystem sys = exact_system(mrp, f);
    const Vector theta = sys.a.fullPivLu().solve(sys.b);
    EXPECT_LE(projected_bellman_error(theta, mrp, f), 1e-10);
  }
}

TEST(ProjectedBellmanError, MatchesWeightedLoss) {
  std::mt19937_64 rng(13);
  const FiniteMrp mrp = random_mrp(rng, 6);
  const FeatureMap f{normal(rng, 6, 3)};
  const LinearSystem sys = exact_system(mrp, f);
  const WeightMatrix c_inv = inverse_weight(sys.c);
  for (int rep = 0; rep < 100; ++rep) {
    const Vector theta = normal(rng, 3, 1).col(0);
    EXPECT_NEAR(projected_bellman_error(theta, mrp, f), loss(theta, sys.a, sys.b, c_inv), 1e-10);
  }
}

TEST(InverseWeight, RankDeficientFeatures) {
  FeatureMap f;
  f.phi.resize(2, 2);
  f.phi << 1, 2, 2, 4;
  const LinearSystem sys = exact_system(constant_chain(), f);
  EXPECT_THROW_CODE(inverse_weight(sys.c), ErrorCode::RankDeficientC);
  EXPECT_THROW_CODE(projected_bellman_error(vec({1.0, 0.0}), constant_chain(), f),
                    ErrorCode::RankDeficientC);
}

TEST(EstimatorConsistency, ErrorsShrinkAtRootNRate) {
  std::mt19937_64 rng(14);
  const FiniteMrp mrp = random_mrp(rng, 5);
  const FeatureMap f{normal(rng, 5, 3)};
  const LinearSystem exact = exact_system(mrp, f);
  std::vector<std::pair<double, double>> a_pts, b_pts;
  double prev_a = std::numeric_limits<double>::infinity();
  double prev_b = prev_a;
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    std::vector<double> ea, eb;
    for (int seed = 0; seed < 100; ++seed) {
      const EmpiricalSystem sys = empirical_system(simulate(mrp, n, 77 + seed), f, mrp.gamma);
      ea.push_back((sys.a_obs - exact.a).norm());
      eb.push_back((sys.b_obs - exact.b).norm());
    }
    std::nth_element(ea.begin(), ea.begin() + 50, ea.end());
    std::nth_element(eb.begin(), eb.begin() + 50, eb.end());
    EXPECT_LT(ea[50], prev_a);
    EXPECT_LT(eb[50], prev_b);
    prev_a = ea[50];
    prev_b = eb[50];
    a_pts.emplace_back(std::log(static_cast<double>(n)), std::log(ea[50]));
    b_pts.emplace_back(std::log(static_cast<double>(n)), std::log(eb[50]));
  }
  auto slope = [](const std::vector<std::pair<double, double>>& pts) {
    double mx = 0, my = 0;
    for (auto [x, y] : pts) mx += x, my += y;
    mx /= pts.size();
    my /= pts.size();
    double sxy = 0, sxx = 0;
    for (auto [x, y] : pts) sxy += (x - mx) * (y - my), sxx += (x - mx) * (x - mx);
    return sxy / sxx;
  };
  EXPECT_GE(slope(a_pts), -0.65);
  EXPECT_LE(slope(a_pts), -0.35);
  EXPECT_GE(slope(b_pts), -0.65);
  EXPECT_LE(slope(b_pts), -0.35);
}
