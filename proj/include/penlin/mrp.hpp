#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "penlin/weighted_geometry.hpp"

namespace penlin {

/// Finite Markov reward process. Rewards on x -> x' are mean_reward(x, x')
/// plus N(0, reward_noise_std^2) noise.
struct FiniteMrp {
  Matrix transition;
  Matrix mean_reward;
  double reward_noise_std = 0.0;
  double gamma = 0.9;

  Eigen::Index n_states() const { return transition.rows(); }
  /// r_bar(x) = sum_x' P(x'|x) r(x, x').
  Vector expected_reward() const;
  void validate() const;
};

/// Successors and rewards follow `base`; the visited states X_t follow `behavior`.
struct OffPolicyMrp {
  FiniteMrp base;
  Matrix behavior;

  void validate() const;
};

using MrpModel = std::variant<FiniteMrp, OffPolicyMrp>;

struct FeatureMap {
  Matrix phi;  // n_states x d, row x is phi(x)^T

  Eigen::Index dim() const { return phi.cols(); }
};

/// (X_t, R_{t+1}, successor) for t = 0 .. n-1. On-policy the successor is
/// X_{t+1}, so next_states[t] == states[t + 1].
struct Trajectory {
  int initial_state = 0;
  std::vector<int> states;
  std::vector<double> rewards;
  std::vector<int> next_states;

  std::size_t length() const { return states.size(); }
};

struct LinearSystem {
  Matrix a;
  Vector b;
  Matrix c;
  Vector mu;  // stationary distribution of the index chain
};

/// Throws InvalidArgument unless rows are nonnegative and sum to 1 within 1e-12.
void check_row_stochastic(const Matrix& p, const std::string& what);

inline constexpr double kStationaryTolerance = 1e-12;
inline constexpr long kMaxStationaryIterations = 1000000;

/// Power iteration from the uniform vector until ||mu^T P - mu^T||_inf <= 1e-12.
Vector stationary_distribution(const Matrix& p);

/// V = (I - gamma P)^{-1} r_bar.
Vector value_function(const FiniteMrp& mrp);

/// Exact stationary expectations (A, b, C) of the LSTD system. Off-policy,
/// the expectation is over the behavior chain's stationary distribution with
/// the target kernel inside.
LinearSystem exact_system(const MrpModel& model, const FeatureMap& features);

/// Deterministic given seed; X_0 is drawn from the exact stationary law.
Trajectory simulate(const MrpModel& model, std::size_t n, std::uint64_t seed);

struct EmpiricalSystem {
  Matrix a_obs;
  Vector b_obs;
  Matrix c_obs;
};

EmpiricalSystem empirical_system(const Trajectory& traj, const FeatureMap& features,
                                 double gamma);

/// Smallest eigenvalue of C that still counts as invertible.
inline constexpr double kMinFeatureEigenvalue = 1e-10;

/// C^{-1} as a weight; throws RankDeficientC when C is (numerically) singular.
WeightMatrix inverse_weight(const Matrix& c);

/// ||Pi (T W_theta - W_theta)||_{mu,2}, computed in function space.
double projected_bellman_error(const Vector& theta, const FiniteMrp& mrp,
                               const FeatureMap& features);

const FiniteMrp& target_of(const MrpModel& model);

}  // namespace penlin
