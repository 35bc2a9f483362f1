#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "penlin/error.hpp"
#include "penlin/weighted_geometry.hpp"

namespace penlin {

struct SolveConfig {
  double objective_tolerance = 1e-8;
  int max_iterations = 200000;
  // Consecutive iterations with relative objective change below tolerance
  // needed to declare convergence.
  int stall_window = 100;

  void validate() const;
};

struct SolveResult {
  Vector theta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct RhoSelection {
  double rho_hat = 0.0;
  std::size_t index = 0;
  std::vector<double> grid;             // evaluated prefix of {2^k * 2 c lambda}
  std::vector<double> selector_values;  // empirical loss + lambda * penalty, per grid point
  SolveResult result;
};

/// argmin ||A_obs theta - b_obs||_M + lambda ||theta||.
SolveResult solve_unsquared(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                            double lambda, PenaltyNorm p, const SolveConfig& cfg = {});

/// argmin ||A_obs theta - b_obs||_M^2 + rho ||theta||. The penalty is not squared.
SolveResult solve_squared(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                          double rho, PenaltyNorm p, const SolveConfig& cfg = {});

/// Kill threshold of the rho grid: for rho at or above it the squared
/// estimator is exactly zero.
double rho_kill_threshold(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                          PenaltyNorm p);

inline constexpr int kMaxGridExponent = 60;

/// Data-driven choice of rho over the geometric grid 2^k * 2 c lambda,
/// k = 0, 1, ..., scored by the unsquared penalized empirical loss.
/// Ties go to the smallest rho.
RhoSelection select_rho(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                        double lambda, double c, PenaltyNorm p, const SolveConfig& cfg = {});

/// inf_theta ||A theta - b||_M + weight ||theta||. For weight = 0 the
/// infimum is a weighted least-squares value; a rank-deficient A then needs
/// an explicit search radius (penalty-norm ball) or UnattainedInfimum is raised.
double oracle_infimum(const Matrix& a, const Vector& b, const WeightMatrix& m, double weight,
                      PenaltyNorm p, const SolveConfig& cfg = {},
                      std::optional<double> radius = std::nullopt);

/// Duality gap of the unsquared problem at theta (infinity when the residual
/// vanishes and no dual certificate is built).
double unsquared_duality_gap(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                             double lambda, PenaltyNorm p, const Vector& theta);

/// Duality gap of the squared problem at theta.
double squared_duality_gap(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                           double rho, PenaltyNorm p, const Vector& theta);

struct GridMinimum {
  Vector theta;
  double value = std::numeric_limits<double>::infinity();
};

inline constexpr int kMaxBruteForceDim = 3;

/// Exhaustive grid minimization over [-radius, radius]^dim with the given
/// spacing. Test oracle; dim is capped at kMaxBruteForceDim.
template <class Objective>
GridMinimum brute_force_minimize(Objective&& objective, int dim, double radius,
                                 double resolution) {
  if (dim > kMaxBruteForceDim) {
    throw Error(ErrorCode::DimensionTooLarge, "brute force limited to 3 dimensions");
  }
  if (dim < 1 || !(radius > 0.0) || !(resolution > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "brute force needs dim >= 1, radius > 0, resolution > 0");
  }
  const long steps = static_cast<long>(std::floor(2.0 * radius / resolution + 1e-9));
  const long points = steps + 1;
  GridMinimum best;
  best.theta = Vector::Zero(dim);
  std::vector<long> index(dim, 0);
  Vector theta = Vector::Constant(dim, -radius);
  while (true) {
    const double value = objective(theta);
    if (value < best.value) {
      best.value = value;
      best.theta = theta;
    }
    int axis = 0;
    while (axis < dim && ++index[axis] == points) {
      index[axis] = 0;
      theta(axis) = -radius;
      ++axis;
    }
    if (axis == dim) break;
    theta(axis) = -radius + static_cast<double>(index[axis]) * resolution;
  }
  return best;
}

}  // namespace penlin
