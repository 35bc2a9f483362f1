#pragma once

#include <limits>
#include <string>

#include "penlin/concentration.hpp"
#include "penlin/solvers.hpp"
#include "penlin/weighted_geometry.hpp"

namespace penlin {

/// True system (A, b), its observed version (A_obs, b_obs), the loss weight
/// and the penalty norm.
struct ProblemInstance {
  Matrix a;
  Vector b;
  Matrix a_obs;
  Vector b_obs;
  WeightMatrix m;
  PenaltyNorm penalty = PenaltyNorm::L1;

  Eigen::Index rows() const { return a.rows(); }
  Eigen::Index cols() const { return a.cols(); }
  void validate() const;
};

struct ErrorPair {
  double delta_a = 0.0;
  double delta_b = 0.0;
};

/// Delta_A = ||M^{1/2}(A - A_obs)||_{2,*}, Delta_b = ||M^{1/2}(b - b_obs)||_2.
ErrorPair compute_errors(const ProblemInstance& inst);

// Right-hand sides of the oracle inequalities from their scalar ingredients.
// `infimum` is inf_theta [L_M(theta) + w ||theta||] at the weight the
// matching *_weight function returns.
double lemma32_weight(double lambda, const ErrorPair& errs);
double lemma32_value(double infimum, double lambda, const ErrorPair& errs);
double lemma35_weight(double lambda, const ErrorPair& errs);
double lemma35_value(double infimum, double lambda, double c, const ErrorPair& errs);

double lemma32_rhs(const ProblemInstance& inst, double lambda, const ErrorPair& errs,
                   const SolveConfig& cfg = {});
double lemma35_rhs(const ProblemInstance& inst, double lambda, double c, const ErrorPair& errs,
                   const SolveConfig& cfg = {});

// Probabilistic versions. thm34 and thm37 are the deterministic bounds with
// the error levels replaced by their delta-quantile envelopes, so they are
// computed through the lemma formulas.
double thm33_rhs(const ProblemInstance& inst, const TailModel& tails, double delta,
                 const SolveConfig& cfg = {});
double thm34_rhs(const ProblemInstance& inst, const TailModel& tails, double delta,
                 const SolveConfig& cfg = {});
double thm36_rhs(const ProblemInstance& inst, const TailModel& tails, double delta,
                 const SolveConfig& cfg = {});
double thm37_rhs(const ProblemInstance& inst, const TailModel& tails, double delta,
                 const SolveConfig& cfg = {});

double thm33_value(double infimum, double s_a, double s_b, double z_a, double z_b);
double thm36_value(double infimum, double s_a, double s_b, double z_a, double z_b);

/// Regularization levels each theorem prescribes.
struct TheoremTuning {
  double lambda = 0.0;
  double c = 0.0;
};
TheoremTuning uniform_tuning(const TailModel& tails);                  // thm33 and thm36
TheoremTuning exact_tuning(const TailModel& tails, double delta);      // thm34 and thm37

/// 1e-6 + 2 * objective_tolerance.
double default_slack(const SolveConfig& cfg);

struct BoundReport {
  std::string bound_name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = false;
  double epsilon_slack = 0.0;
};

/// lhs = L_M(theta) on the true system; holds iff rhs - lhs >= -eps_slack.
BoundReport verify_bound(const std::string& name, const Vector& theta,
                         const ProblemInstance& inst, double rhs, double eps_slack);

struct Conditioning {
  double kappa = 0.0;
  double tau = 0.0;
};

/// tau = smallest singular value of M^{1/2} C M^{1/2}; kappa = largest
/// singular value of C^{1/2} M C^{1/2} divided by tau.
Conditioning conditioning(const WeightMatrix& m, const Matrix& c);

/// kappa^{1/2} * oracle_part + tau^{-1/2} * regret_part.
double transformed_bound(double oracle_part, double regret_part, double kappa, double tau);

/// One CSV row of a bound check with its context. NaN fields are written empty.
struct BoundRecord {
  BoundReport report;
  Eigen::Index m = 0;
  Eigen::Index d = 0;
  PenaltyNorm penalty = PenaltyNorm::L1;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double c = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double delta_a = std::numeric_limits<double>::quiet_NaN();
  double delta_b = std::numeric_limits<double>::quiet_NaN();
};

std::string bound_csv_header();
std::string to_csv_row(const BoundRecord& record);

}  // namespace penlin
