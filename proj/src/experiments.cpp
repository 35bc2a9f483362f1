#include "penlin/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "penlin/concentration.hpp"
#include "penlin/csv.hpp"
#include "penlin/error.hpp"
#include "penlin/model_io.hpp"
#include "penlin/mrp.hpp"

namespace penlin {

using nlohmann::json;

std::optional<ExperimentKind> parse_experiment(std::string_view name) {
  if (name == "verify-deterministic") return ExperimentKind::VerifyDeterministic;
  if (name == "mrp-rate") return ExperimentKind::MrpRate;
  if (name == "coverage") return ExperimentKind::Coverage;
  if (name == "offpolicy-bounds") return ExperimentKind::OffpolicyBounds;
  if (name == "solve-one") return ExperimentKind::SolveOne;
  return std::nullopt;
}

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::VerifyDeterministic: return "verify-deterministic";
    case ExperimentKind::MrpRate: return "mrp-rate";
    case ExperimentKind::Coverage: return "coverage";
    case ExperimentKind::OffpolicyBounds: return "offpolicy-bounds";
    case ExperimentKind::SolveOne: return "solve-one";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (trials < 1) fail("trials must be >= 1");
  if (calibration_trials < 0) fail("calibration_trials must be >= 0");
  if (penalties.empty()) fail("penalty list is empty");
  for (double d : deltas) {
    if (!(d > 0.0 && d < 1.0)) fail("deltas must lie in (0, 1)");
  }
  for (long n : sizes) {
    if (n < 1) fail("sizes must be positive");
  }
  if (noise_scale && !(*noise_scale >= 0.0 && std::isfinite(*noise_scale))) {
    fail("noise_scale must be finite and >= 0");
  }
  if (!(coverage_margin >= 0.0 && coverage_margin < 1.0)) fail("coverage_margin must lie in [0, 1)");
  if (slope_range && !(slope_range->first <= slope_range->second)) fail("slope_range is empty");
  solver.validate();
  const bool needs_model = experiment != ExperimentKind::VerifyDeterministic;
  if (needs_model && model_path.empty()) fail("model_path is required for this experiment");
  const bool needs_sizes =
      experiment == ExperimentKind::MrpRate || experiment == ExperimentKind::Coverage ||
      experiment == ExperimentKind::OffpolicyBounds;
  if (needs_sizes && sizes.empty()) fail("sizes must not be empty");
  if (needs_sizes && experiment != ExperimentKind::MrpRate && deltas.empty()) {
    fail("deltas must not be empty");
  }
}

namespace {

std::string penalty_field(const std::vector<PenaltyNorm>& ps) {
  if (ps.size() == 2) return "both";
  return std::string(to_string(ps.front()));
}

std::vector<PenaltyNorm> parse_penalty_field(const std::string& s) {
  if (s == "both") return {PenaltyNorm::L1, PenaltyNorm::L2};
  if (auto p = parse_penalty(s)) return {*p};
  throw Error(ErrorCode::ParseError, "penalty must be l1, l2 or both, got '" + s + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
  ExperimentConfig cfg;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "experiment") {
        auto kind = parse_experiment(value.get<std::string>());
        if (!kind) throw Error(ErrorCode::ParseError, "unknown experiment '" + value.get<std::string>() + "'");
        cfg.experiment = *kind;
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "trials") {
        cfg.trials = value.get<long>();
      } else if (key == "calibration_trials") {
        cfg.calibration_trials = value.get<long>();
      } else if (key == "penalty") {
        cfg.penalties = parse_penalty_field(value.get<std::string>());
      } else if (key == "deltas") {
        cfg.deltas = value.get<std::vector<double>>();
      } else if (key == "sizes") {
        cfg.sizes = value.get<std::vector<long>>();
      } else if (key == "model_path") {
        cfg.model_path = value.get<std::string>();
      } else if (key == "output_path") {
        cfg.output_path = value.get<std::string>();
      } else if (key == "noise_scale") {
        if (!value.is_null()) cfg.noise_scale = value.get<double>();
      } else if (key == "coverage_margin") {
        cfg.coverage_margin = value.get<double>();
      } else if (key == "slope_range") {
        if (!value.is_null()) {
          const auto r = value.get<std::vector<double>>();
          if (r.size() != 2) throw Error(ErrorCode::ParseError, "slope_range needs two numbers");
          cfg.slope_range = std::make_pair(r[0], r[1]);
        }
      } else if (key == "solver") {
        for (const auto& [skey, svalue] : value.items()) {
          if (skey == "objective_tolerance") {
            cfg.solver.objective_tolerance = svalue.get<double>();
          } else if (skey == "max_iterations") {
            cfg.solver.max_iterations = svalue.get<int>();
          } else if (skey == "stall_window") {
            cfg.solver.stall_window = svalue.get<int>();
          } else {
            throw Error(ErrorCode::ParseError, "unknown solver field '" + skey + "'");
          }
        }
      } else {
        throw Error(ErrorCode::ParseError, "unknown config field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  return cfg;
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["experiment"] = std::string(to_string(experiment));
  doc["seed"] = seed;
  doc["trials"] = trials;
  doc["calibration_trials"] = calibration_trials;
  doc["penalty"] = penalty_field(penalties);
  doc["deltas"] = deltas;
  doc["sizes"] = sizes;
  doc["model_path"] = model_path;
  doc["output_path"] = output_path;
  doc["noise_scale"] = noise_scale ? json(*noise_scale) : json(nullptr);
  doc["coverage_margin"] = coverage_margin;
  doc["slope_range"] = slope_range ? json::array({slope_range->first, slope_range->second})
                                   : json(nullptr);
  doc["solver"] = {{"objective_tolerance", solver.objective_tolerance},
                   {"max_iterations", solver.max_iterations},
                   {"stall_window", solver.stall_window}};
  return doc;
}

std::string ExperimentConfig::hash() const {
  json doc = to_json();
  doc.erase("output_path");
  const std::string text = doc.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string metadata_line(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# config_hash=" << cfg.hash() << " seed=" << cfg.seed
     << " experiment=" << to_string(cfg.experiment);
  return os.str();
}

std::uint64_t derive_seed(std::uint64_t master, std::uint32_t role, std::uint64_t a,
                          std::uint64_t b) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(master), hi(master), role, lo(a), hi(a), lo(b), hi(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptySample, "median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

Matrix normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = z(rng);
  }
  return out;
}

}  // namespace

RandomTrial random_trial(std::uint64_t seed, PenaltyNorm p, std::optional<double> noise_scale) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 12);
  const int m = dim(rng);
  const int d = dim(rng);
  RandomTrial out;
  Matrix a = normal_matrix(rng, m, d);
  Vector b = normal_matrix(rng, m, 1).col(0);
  const Matrix q = normal_matrix(rng, m, m);
  Matrix weight = q * q.transpose() / static_cast<double>(m) + 0.1 * Matrix::Identity(m, m);
  weight = 0.5 * (weight + weight.transpose()).eval();
  const double drawn_noise = log_uniform(rng, 1e-3, 1.0);
  out.noise = noise_scale.value_or(drawn_noise);
  const Matrix noise_a = normal_matrix(rng, m, d);
  const Vector noise_b = normal_matrix(rng, m, 1).col(0);
  out.lambda = log_uniform(rng, 1e-3, 10.0);
  out.c = log_uniform(rng, 1e-3, 10.0);
  out.instance = ProblemInstance{a,
                                 b,
                                 a + out.noise * noise_a,
                                 b + out.noise * noise_b,
                                 WeightMatrix(std::move(weight)),
                                 p};
  return out;
}

json to_json(const ProblemInstance& inst) {
  return {{"A", to_json(inst.a)},         {"b", to_json(inst.b)},
          {"A_obs", to_json(inst.a_obs)}, {"b_obs", to_json(inst.b_obs)},
          {"M", to_json(inst.m.matrix())}, {"penalty", std::string(to_string(inst.penalty))}};
}

namespace {

std::string with_trailer(std::string body, const ExperimentConfig& cfg) {
  body += metadata_line(cfg);
  body += '\n';
  return body;
}

ExperimentConfig checked(const ExperimentConfig& cfg, ExperimentKind kind) {
  ExperimentConfig out = cfg;
  out.experiment = kind;
  out.validate();
  return out;
}

}  // namespace

ExperimentResult run_verify_deterministic(const ExperimentConfig& config) {
  const ExperimentConfig cfg = checked(config, ExperimentKind::VerifyDeterministic);
  const double slack = default_slack(cfg.solver);
  std::string body = "trial," + bound_csv_header() + "\n";
  ExperimentResult result;
  for (long t = 0; t < cfg.trials; ++t) {
    const PenaltyNorm p = cfg.penalties[static_cast<std::size_t>(t) % cfg.penalties.size()];
    const RandomTrial trial =
        random_trial(derive_seed(cfg.seed, kRoleInstance, 0, static_cast<std::uint64_t>(t)), p,
                     cfg.noise_scale);
    const ProblemInstance& inst = trial.instance;
    try {
      const ErrorPair errs = compute_errors(inst);
      const SolveResult un =
          solve_unsquared(inst.a_obs, inst.b_obs, inst.m, trial.lambda, p, cfg.solver);
      const double rhs32 = lemma32_rhs(inst, trial.lambda, errs, cfg.solver);
      const RhoSelection sel =
          select_rho(inst.a_obs, inst.b_obs, inst.m, trial.lambda, trial.c, p, cfg.solver);
      const double rhs35 = lemma35_rhs(inst, trial.lambda, trial.c, errs, cfg.solver);

      BoundRecord r32;
      r32.report = verify_bound("lemma32", un.theta, inst, rhs32, slack);
      r32.m = inst.rows();
      r32.d = inst.cols();
      r32.penalty = p;
      r32.lambda = trial.lambda;
      r32.delta_a = errs.delta_a;
      r32.delta_b = errs.delta_b;
      BoundRecord r35 = r32;
      r35.report = verify_bound("lemma35", sel.result.theta, inst, rhs35, slack);
      r35.c = trial.c;
      for (const BoundRecord* r : {&r32, &r35}) {
        body += csv::integer(t) + "," + to_csv_row(*r) + "\n";
        result.passed = result.passed && r->report.holds;
      }
    } catch (const Error& e) {
      json replay = to_json(inst);
      replay["lambda"] = trial.lambda;
      replay["c"] = trial.c;
      replay["trial"] = t;
      throw Error(e.code(), std::string(e.what()) + "; instance: " + replay.dump());
    }
  }
  result.csv = with_trailer(std::move(body), cfg);
  return result;
}

namespace {

std::vector<EmpiricalSystem> sample_systems(const ModelFile& file, long n, long count,
                                            std::uint64_t seed, std::uint32_t role) {
  const double gamma = target_of(file.model).gamma;
  std::vector<EmpiricalSystem> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) {
    const Trajectory traj =
        simulate(file.model, static_cast<std::size_t>(n),
                 derive_seed(seed, role, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k)));
    out.push_back(empirical_system(traj, file.features, gamma));
  }
  return out;
}

ProblemInstance make_instance(const LinearSystem& sys, const EmpiricalSystem& emp,
                              const WeightMatrix& m, PenaltyNorm p) {
  return ProblemInstance{sys.a, sys.b, emp.a_obs, emp.b_obs, m, p};
}

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

ExperimentResult run_mrp_rate(const ExperimentConfig& config) {
  const ExperimentConfig cfg = checked(config, ExperimentKind::MrpRate);
  const ModelFile file = load_model(cfg.model_path);
  if (!std::holds_alternative<FiniteMrp>(file.model)) {
    throw Error(ErrorCode::InvalidArgument, "mrp-rate needs an on-policy model (no behavior matrix)");
  }
  const LinearSystem sys = exact_system(file.model, file.features);
  const WeightMatrix m = inverse_weight(sys.c);
  const long cal_count = cfg.effective_calibration_trials();

  std::string body = "row_type,penalty,n,trial,s_a,s_b,lambda,delta_a,delta_b,loss,value\n";
  ExperimentResult result;
  const std::string nan;
  for (PenaltyNorm p : cfg.penalties) {
    const std::string pname(to_string(p));
    std::vector<std::pair<double, double>> loss_points, sa_points, sb_points;
    for (long n : cfg.sizes) {
      std::vector<double> cal_a, cal_b;
      for (const EmpiricalSystem& emp : sample_systems(file, n, cal_count, cfg.seed, kRoleCalibration)) {
        const ErrorPair e = compute_errors(make_instance(sys, emp, m, p));
        cal_a.push_back(e.delta_a);
        cal_b.push_back(e.delta_b);
      }
      const double s_a = sorted_quantile(sorted(cal_a), 1.0 - kInvE);
      const double s_b = sorted_quantile(sorted(cal_b), 1.0 - kInvE);
      // Noise-free sampling makes s_a vanish; any positive lambda then works.
      const double lambda = s_a > 0.0 ? s_a : 1e-12;

      std::vector<double> losses;
      const auto eval = sample_systems(file, n, cfg.trials, cfg.seed, kRoleEvaluation);
      for (std::size_t t = 0; t < eval.size(); ++t) {
        const ProblemInstance inst = make_instance(sys, eval[t], m, p);
        const ErrorPair e = compute_errors(inst);
        const SolveResult fit = solve_unsquared(inst.a_obs, inst.b_obs, m, lambda, p, cfg.solver);
        const double l = loss(fit.theta, sys.a, sys.b, m);
        losses.push_back(l);
        body += csv::join({"trial", pname, csv::integer(n), csv::integer(static_cast<long long>(t)),
                           csv::number(s_a), csv::number(s_b), csv::number(lambda), csv::number(e.delta_a), csv::number(e.delta_b),
                           csv::number(l), nan}) + "\n";
      }
      const double med = median(losses);
      body += csv::join({"median", pname, csv::integer(n), nan, csv::number(s_a), csv::number(s_b),
                         csv::number(lambda), nan, nan, csv::number(med), nan}) + "\n";
      loss_points.emplace_back(static_cast<double>(n), med);
      sa_points.emplace_back(static_cast<double>(n), s_a);
      sb_points.emplace_back(static_cast<double>(n), s_b);
    }
    auto slope_of = [](const std::vector<std::pair<double, double>>& pts) {
      try {
        return rate_fit(pts).slope;
      } catch (const Error&) {
        // Fewer than three sizes or a zero median: no slope to report.
        return std::numeric_limits<double>::quiet_NaN();
      }
    };
    const double loss_slope = slope_of(loss_points);
    for (const auto& [name, pts] :
         {std::pair{"slope_loss", &loss_points}, std::pair{"slope_s_a", &sa_points},
          std::pair{"slope_s_b", &sb_points}}) {
      body += csv::join({name, pname, nan, nan, nan, nan, nan, nan, nan, nan,
                         csv::number(slope_of(*pts))}) +
              "\n";
    }
    if (cfg.slope_range) {
      result.passed = result.passed && loss_slope >= cfg.slope_range->first &&
                      loss_slope <= cfg.slope_range->second;
    }
  }
  result.csv = with_trailer(std::move(body), cfg);
  return result;
}

namespace {

// Distance of the weight-0 infimum search: generous, the least-squares value
// is attained at the min-norm point whenever that point lies inside.
constexpr double kInfimumRadius = 1e6;

struct CoverageRow {
  long n = 0;
  PenaltyNorm penalty = PenaltyNorm::L1;
  std::string weight;
  std::string bound;
  double delta = std::numeric_limits<double>::quiet_NaN();
  long evaluated = 0;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double required = std::numeric_limits<double>::quiet_NaN();
  bool gated = false;
  bool passed = true;
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  double value = std::numeric_limits<double>::quiet_NaN();
};

const char* kCoverageHeader = "n,penalty,weight,bound_name,delta,evaluated,coverage,required,gated,passed,kappa,tau,value\n";

std::string to_csv_row(const CoverageRow& r) {
  return csv::join({csv::integer(r.n), to_string(r.penalty), r.weight, r.bound, csv::number(r.delta),
                    csv::integer(r.evaluated), csv::number(r.coverage), csv::number(r.required),
                    csv::boolean(r.gated), csv::boolean(r.passed), csv::number(r.kappa),
                    csv::number(r.tau), csv::number(r.value)}) +
         "\n";
}

struct WeightCase {
  std::string name;
  WeightMatrix m;
  bool transformed = false;  // also check the C^-1 loss via kappa/tau
};

// One (n, penalty, weight) block of the probabilistic bound checks.
void coverage_block(const ExperimentConfig& cfg, const LinearSystem& sys, const WeightMatrix& c_inv,
                    long n, const std::vector<EmpiricalSystem>& cal,
                    const std::vector<EmpiricalSystem>& eval, const WeightCase& wc, PenaltyNorm p,
                    std::vector<CoverageRow>& rows) {
  const WeightMatrix& m = wc.m;
  const SolveConfig& sc = cfg.solver;
  const double slack = default_slack(sc);
  std::vector<double> cal_a, cal_b;
  for (const EmpiricalSystem& emp : cal) {
    const ErrorPair e = compute_errors(make_instance(sys, emp, m, p));
    cal_a.push_back(e.delta_a);
    cal_b.push_back(e.delta_b);
  }
  const TailModel tails = calibrate_tails(cal_a, cal_b, n);

  // The right-hand sides depend on the true system only: evaluate them once.
  const ProblemInstance truth{sys.a, sys.b, sys.a, sys.b, m, p};
  const std::size_t nd = cfg.deltas.size();
  std::vector<double> rhs33(nd), rhs34(nd), rhs36(nd), rhs37(nd), tr34(nd), tr37(nd);
  Conditioning cond{1.0, 1.0};
  if (wc.transformed) cond = conditioning(m, sys.c);
  const double scale = std::sqrt(cond.kappa * cond.tau);
  for (std::size_t i = 0; i < nd; ++i) {
    const double delta = cfg.deltas[i];
    rhs33[i] = thm33_rhs(truth, tails, delta, sc);
    rhs34[i] = thm34_rhs(truth, tails, delta, sc);
    rhs36[i] = thm36_rhs(truth, tails, delta, sc);
    rhs37[i] = thm37_rhs(truth, tails, delta, sc);
    if (wc.transformed) {
      const TheoremTuning t = exact_tuning(tails, delta);
      // With the substitution Delta = envelope the M-loss regret is
      // 2 lambda ||theta|| + 2 c (thm34) and 3 lambda ||theta|| + 3 c (thm37).
      tr34[i] = transformed_bound(oracle_infimum(sys.a, sys.b, c_inv, 2.0 * t.lambda / scale, p, sc),
                                  2.0 * t.c, cond.kappa, cond.tau);
      tr37[i] = transformed_bound(oracle_infimum(sys.a, sys.b, c_inv, 3.0 * t.lambda / scale, p, sc),
                                  3.0 * t.c, cond.kappa, cond.tau);
    }
  }

  std::vector<long> hold33(nd), hold34(nd), hold36(nd), hold37(nd), holdt34(nd), holdt37(nd);
  std::vector<double> fresh_a, fresh_b;
  const TheoremTuning uniform = uniform_tuning(tails);
  for (const EmpiricalSystem& emp : eval) {
    const ProblemInstance inst = make_instance(sys, emp, m, p);
    const ErrorPair e = compute_errors(inst);
    fresh_a.push_back(e.delta_a);
    fresh_b.push_back(e.delta_b);
    auto within = [&](const Vector& theta, double rhs) {
      return loss(theta, sys.a, sys.b, m) <= rhs + slack;
    };
    auto within_c = [&](const Vector& theta, double rhs) {
      return loss(theta, sys.a, sys.b, c_inv) <= rhs + slack;
    };
    const Vector th33 = solve_unsquared(inst.a_obs, inst.b_obs, m, uniform.lambda, p, sc).theta;
    const Vector th36 =
        select_rho(inst.a_obs, inst.b_obs, m, uniform.lambda, uniform.c, p, sc).result.theta;
    for (std::size_t i = 0; i < nd; ++i) {
      const TheoremTuning t = exact_tuning(tails, cfg.deltas[i]);
      const Vector th34 = solve_unsquared(inst.a_obs, inst.b_obs, m, t.lambda, p, sc).theta;
      const Vector th37 = select_rho(inst.a_obs, inst.b_obs, m, t.lambda, t.c, p, sc).result.theta;
      hold33[i] += within(th33, rhs33[i]);
      hold34[i] += within(th34, rhs34[i]);
      hold36[i] += within(th36, rhs36[i]);
      hold37[i] += within(th37, rhs37[i]);
      if (wc.transformed) {
        holdt34[i] += within_c(th34, tr34[i]);
        holdt37[i] += within_c(th37, tr37[i]);
      }
    }
  }

  const long total = static_cast<long>(eval.size());
  auto add = [&](const std::string& bound, std::size_t i, double coverage, bool gated) {
    CoverageRow r;
    r.n = n;
    r.penalty = p;
    r.weight = wc.name;
    r.bound = bound;
    r.delta = cfg.deltas[i];
    r.evaluated = total;
    r.coverage = coverage;
    r.required = 1.0 - r.delta - cfg.coverage_margin;
    r.gated = gated;
    r.passed = coverage >= r.required;
    r.kappa = cond.kappa;
    r.tau = cond.tau;
    rows.push_back(r);
  };
  auto frac = [total](long k) { return static_cast<double>(k) / static_cast<double>(total); };
  for (std::size_t i = 0; i < nd; ++i) {
    const Coverage cov = coverage_test(tails, fresh_a, fresh_b, cfg.deltas[i]);
    add("thm33", i, frac(hold33[i]), false);
    add("thm34", i, frac(hold34[i]), true);
    add("thm36", i, frac(hold36[i]), false);
    add("thm37", i, frac(hold37[i]), true);
    if (wc.transformed) {
      add("transformed34", i, frac(holdt34[i]), true);
      add("transformed37", i, frac(holdt37[i]), true);
    }
    add("assumption_a", i, cov.a, true);
    add("assumption_b", i, cov.b, true);
    add("assumption_joint", i, cov.joint, false);
  }
}

ExperimentResult bound_suite(const ExperimentConfig& cfg, bool off_policy) {
  const ModelFile file = load_model(cfg.model_path);
  if (off_policy && !std::holds_alternative<OffPolicyMrp>(file.model)) {
    throw Error(ErrorCode::InvalidArgument, "offpolicy-bounds needs a model with a behavior matrix");
  }
  const LinearSystem sys = exact_system(file.model, file.features);
  const WeightMatrix c_inv = inverse_weight(sys.c);
  std::vector<WeightCase> weights{{"c_inv", c_inv, false}};
  if (off_policy) {
    weights.push_back({"identity", WeightMatrix::identity(sys.b.size()), true});
  }
  const long cal_count = cfg.effective_calibration_trials();

  std::vector<CoverageRow> rows;
  for (long n : cfg.sizes) {
    CoverageRow min_loss;
    min_loss.n = n;
    min_loss.weight = "c_inv";
    min_loss.bound = "min_loss";
    min_loss.value = oracle_infimum(sys.a, sys.b, c_inv, 0.0, PenaltyNorm::L2, cfg.solver,
                                    kInfimumRadius);
    rows.push_back(min_loss);
    for (const WeightCase& wc : weights) {
      const Conditioning cond = conditioning(wc.m, sys.c);
      CoverageRow row;
      row.n = n;
      row.weight = wc.name;
      row.bound = "conditioning";
      row.kappa = cond.kappa;
      row.tau = cond.tau;
      rows.push_back(row);
    }
    const auto cal = sample_systems(file, n, cal_count, cfg.seed, kRoleCalibration);
    const auto eval = sample_systems(file, n, cfg.trials, cfg.seed, kRoleEvaluation);
    for (PenaltyNorm p : cfg.penalties) {
      for (const WeightCase& wc : weights) {
        coverage_block(cfg, sys, c_inv, n, cal, eval, wc, p, rows);
      }
    }
  }

  ExperimentResult result;
  std::string body = kCoverageHeader;
  for (const CoverageRow& r : rows) {
    body += to_csv_row(r);
    if (r.gated) result.passed = result.passed && r.passed;
  }
  result.csv = with_trailer(std::move(body), cfg);
  return result;
}

}  // namespace

ExperimentResult run_coverage(const ExperimentConfig& config) {
  return bound_suite(checked(config, ExperimentKind::Coverage), false);
}

ExperimentResult run_offpolicy_bounds(const ExperimentConfig& config) {
  return bound_suite(checked(config, ExperimentKind::OffpolicyBounds), true);
}

ExperimentResult run_solve_one(const ExperimentConfig& config) {
  const ExperimentConfig cfg = checked(config, ExperimentKind::SolveOne);
  const SolveRequest req = parse_solve_request(read_text_file(cfg.model_path), cfg.model_path);
  const WeightMatrix m =
      req.m ? WeightMatrix(*req.m) : WeightMatrix::identity(req.a_obs.rows());
  SolveResult fit;
  double rho = req.rho;
  switch (req.estimator) {
    case Estimator::Unsquared:
      fit = solve_unsquared(req.a_obs, req.b_obs, m, req.lambda, req.penalty, cfg.solver);
      break;
    case Estimator::Squared:
      fit = solve_squared(req.a_obs, req.b_obs, m, req.rho, req.penalty, cfg.solver);
      break;
    case Estimator::SelectRho: {
      RhoSelection sel = select_rho(req.a_obs, req.b_obs, m, req.lambda, req.c, req.penalty, cfg.solver);
      rho = sel.rho_hat;
      fit = std::move(sel.result);
      break;
    }
  }
  const std::string nan;
  auto optional_number = [&](double v) { return v > 0.0 ? csv::number(v) : nan; };
  std::string theta_field;
  for (Eigen::Index i = 0; i < fit.theta.size(); ++i) {
    if (i) theta_field += ' ';
    theta_field += csv::number(fit.theta(i));
  }
  std::string body = "estimator,penalty,lambda,rho,c,objective,iterations,converged,theta\n";
  body += csv::join({to_string(req.estimator), to_string(req.penalty), optional_number(req.lambda),
                     optional_number(rho), optional_number(req.c), csv::number(fit.objective),
                     csv::integer(fit.iterations), csv::boolean(fit.converged), theta_field}) +
          "\n";
  json doc;
  doc["estimator"] = std::string(to_string(req.estimator));
  doc["penalty"] = std::string(to_string(req.penalty));
  doc["theta"] = to_json(fit.theta);
  doc["objective"] = fit.objective;
  doc["iterations"] = fit.iterations;
  doc["converged"] = fit.converged;
  if (req.estimator == Estimator::SelectRho) doc["rho_hat"] = rho;

  ExperimentResult result;
  result.csv = with_trailer(std::move(body), cfg);
  result.document = doc.dump(2) + "\n";
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case ExperimentKind::VerifyDeterministic: return run_verify_deterministic(cfg);
    case ExperimentKind::MrpRate: return run_mrp_rate(cfg);
    case ExperimentKind::Coverage: return run_coverage(cfg);
    case ExperimentKind::OffpolicyBounds: return run_offpolicy_bounds(cfg);
    case ExperimentKind::SolveOne: return run_solve_one(cfg);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown experiment");
}

}  // namespace penlin
