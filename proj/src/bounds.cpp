#include "penlin/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "penlin/csv.hpp"
#include "penlin/error.hpp"

namespace penlin {

void ProblemInstance::validate() const {
  if (a.rows() != b.size() || a_obs.rows() != a.rows() || a_obs.cols() != a.cols() ||
      b_obs.size() != b.size() || m.dim() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "problem instance shapes disagree");
  }
  if (!a.allFinite() || !b.allFinite() || !a_obs.allFinite() || !b_obs.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "problem instance has non-finite entries");
  }
}

ErrorPair compute_errors(const ProblemInstance& inst) {
  inst.validate();
  const Matrix da = inst.m.sqrt() * (inst.a - inst.a_obs);
  const Vector db = inst.m.sqrt() * (inst.b - inst.b_obs);
  return {dual_operator_norm(da, inst.penalty), db.norm()};
}

double lemma32_weight(double lambda, const ErrorPair& errs) { return errs.delta_a + lambda; }

double lemma32_value(double infimum, double lambda, const ErrorPair& errs) {
  const double ratio = errs.delta_a / lambda;
  return std::max(1.0, ratio) * infimum + std::max(2.0, 1.0 + ratio) * errs.delta_b;
}

double lemma35_weight(double lambda, const ErrorPair& errs) { return errs.delta_a + 2.0 * lambda; }

double lemma35_value(double infimum, double lambda, double c, const ErrorPair& errs) {
  const double ratio = errs.delta_a / lambda;
  const double lead = std::max(1.0, ratio);
  return lead * infimum + std::max(2.0, 1.0 + ratio) * errs.delta_b + lead * c;
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be positive and finite");
  }
}

void require_probability(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
  }
}

double true_infimum(const ProblemInstance& inst, double weight, const SolveConfig& cfg) {
  return oracle_infimum(inst.a, inst.b, inst.m, weight, inst.penalty, cfg);
}

}  // namespace

double lemma32_rhs(const ProblemInstance& inst, double lambda, const ErrorPair& errs,
                   const SolveConfig& cfg) {
  require_positive(lambda, "lambda");
  inst.validate();
  return lemma32_value(true_infimum(inst, lemma32_weight(lambda, errs), cfg), lambda, errs);
}

double lemma35_rhs(const ProblemInstance& inst, double lambda, double c, const ErrorPair& errs,
                   const SolveConfig& cfg) {
  require_positive(lambda, "lambda");
  require_positive(c, "c");
  inst.validate();
  return lemma35_value(true_infimum(inst, lemma35_weight(lambda, errs), cfg), lambda, c, errs);
}

double thm33_value(double infimum, double s_a, double s_b, double z_a, double z_b) {
  (void)s_a;
  return std::max(1.0, z_a) * infimum + s_b * (1.0 + z_a) * z_b;
}

double thm36_value(double infimum, double s_a, double s_b, double z_a, double z_b) {
  (void)s_a;
  const double lead = std::max(1.0, z_a);
  return lead * infimum + std::max(2.0, 1.0 + z_a) * s_b * z_b + lead * s_b;
}

TheoremTuning uniform_tuning(const TailModel& tails) { return {tails.s_a(), tails.s_b()}; }

TheoremTuning exact_tuning(const TailModel& tails, double delta) {
  return {tails.s_a() * tails.z_a(delta), tails.s_b() * tails.z_b(delta)};
}

double thm33_rhs(const ProblemInstance& inst, const TailModel& tails, double delta,
                 const SolveConfig& cfg) {
  require_probability(delta);
  inst.validate();
  const double z_a = tails.z_a(delta);
  const double inf = true_infimum(inst, tails.s_a() * (1.0 + z_a), cfg);
  return thm33_value(inf, tails.s_a(), tails.s_b(), z_a, tails.z_b(delta));
}

double thm34_rhs(const ProblemInstance& inst, const TailModel& tails, double delta,
                 const SolveConfig& cfg) {
  require_probability(delta);
  const TheoremTuning t = exact_tuning(tails, delta);
  return lemma32_rhs(inst, t.lambda, ErrorPair{t.lambda, t.c}, cfg);
}

double thm36_rhs(const ProblemInstance& inst, const TailModel& tails, double delta,
                 const SolveConfig& cfg) {
  require_probability(delta);
  inst.validate();
  const double z_a = tails.z_a(delta);
  const double inf = true_infimum(inst, tails.s_a() * (z_a + 2.0), cfg);
  return thm36_value(inf, tails.s_a(), tails.s_b(), z_a, tails.z_b(delta));
}

double thm37_rhs(const ProblemInstance& inst, const TailModel& tails, double delta,
                 const SolveConfig& cfg) {
  require_probability(delta);
  const TheoremTuning t = exact_tuning(tails, delta);
  return lemma35_rhs(inst, t.lambda, t.c, ErrorPair{t.lambda, t.c}, cfg);
}

double default_slack(const SolveConfig& cfg) { return 1e-6 + 2.0 * cfg.objective_tolerance; }

BoundReport verify_bound(const std::string& name, const Vector& theta,
                         const ProblemInstance& inst, double rhs, double eps_slack) {
  BoundReport out;
  out.bound_name = name;
  out.lhs = loss(theta, inst.a, inst.b, inst.m);
  out.rhs = rhs;
  out.slack = rhs - out.lhs;
  out.epsilon_slack = eps_slack;
  out.holds = out.slack >= -eps_slack;
  return out;
}

Conditioning conditioning(const WeightMatrix& m, const Matrix& c) {
  if (c.rows() != m.dim() || c.cols() != m.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "C and M must have the same dimension");
  }
  const Matrix c_root = psd_sqrt(c);
  const Matrix inner = m.sqrt() * c * m.sqrt();
  const Matrix outer = c_root * m.matrix() * c_root;
  const Vector inner_sv = Eigen::JacobiSVD<Matrix>(inner).singularValues();
  const Vector outer_sv = Eigen::JacobiSVD<Matrix>(outer).singularValues();
  Conditioning out;
  out.tau = inner_sv.size() ? inner_sv.minCoeff() : 0.0;
  const double top = outer_sv.size() ? outer_sv.maxCoeff() : 0.0;
  out.kappa = out.tau > 0.0 ? top / out.tau : std::numeric_limits<double>::infinity();
  return out;
}

double transformed_bound(double oracle_part, double regret_part, double kappa, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::NonpositiveTau, "tau must be positive");
  if (!(kappa >= 1.0 - 1e-10)) throw Error(ErrorCode::InvalidArgument, "kappa must be >= 1");
  return std::sqrt(kappa) * oracle_part + regret_part / std::sqrt(tau);
}

std::string bound_csv_header() {
  return "bound_name,m,d,penalty,lambda,c,delta,delta_a,delta_b,lhs,rhs,slack,holds";
}

std::string to_csv_row(const BoundRecord& r) {
  return csv::join({r.report.bound_name, csv::integer(r.m), csv::integer(r.d),
                    to_string(r.penalty), csv::number(r.lambda), csv::number(r.c),
                    csv::number(r.delta), csv::number(r.delta_a), csv::number(r.delta_b),
                    csv::number(r.report.lhs), csv::number(r.report.rhs),
                    csv::number(r.report.slack), csv::boolean(r.report.holds)});
}

}  // namespace penlin
