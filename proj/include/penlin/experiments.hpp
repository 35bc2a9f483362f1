#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "penlin/bounds.hpp"
#include "penlin/solvers.hpp"

namespace penlin {

enum class ExperimentKind { VerifyDeterministic, MrpRate, Coverage, OffpolicyBounds, SolveOne };

std::optional<ExperimentKind> parse_experiment(std::string_view name);
std::string_view to_string(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::VerifyDeterministic;
  std::uint64_t seed = 0;
  long trials = 100;
  // Replications used for tail calibration; 0 means "same as trials".
  long calibration_trials = 0;
  std::vector<PenaltyNorm> penalties{PenaltyNorm::L1, PenaltyNorm::L2};
  std::vector<double> deltas{0.5, 0.25, 0.1};
  std::vector<long> sizes{1000};
  std::string model_path;
  std::string output_path;
  SolveConfig solver;
  // verify-deterministic: fixed noise scale instead of log-uniform draws.
  std::optional<double> noise_scale;
  // Allowed shortfall of a coverage below 1 - delta.
  double coverage_margin = 0.02;
  // mrp-rate: optional acceptance window for the median-loss slope.
  std::optional<std::pair<double, double>> slope_range;

  long effective_calibration_trials() const {
    return calibration_trials > 0 ? calibration_trials : trials;
  }
  void validate() const;

  /// Strict: unknown keys and ill-typed values raise ParseError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  /// 64-bit FNV-1a of the canonical JSON without output_path, as 16 hex digits.
  std::string hash() const;
};

struct ExperimentResult {
  std::string csv;
  // Extra document (solve-one writes theta here); empty otherwise.
  std::string document;
  bool passed = true;
};

/// Independent 64-bit stream seed for (master seed, role, a, b).
std::uint64_t derive_seed(std::uint64_t master, std::uint32_t role, std::uint64_t a,
                          std::uint64_t b);

// Seed roles keep calibration, evaluation and instance streams disjoint.
inline constexpr std::uint32_t kRoleInstance = 1;
inline constexpr std::uint32_t kRoleCalibration = 2;
inline constexpr std::uint32_t kRoleEvaluation = 3;

/// Random instance of the deterministic suite: m, d uniform in [1, 12],
/// standard normal A and b, random positive definite M, and noisy copies with
/// a log-uniform noise scale in [1e-3, 1] (or `noise_scale` if given).
struct RandomTrial {
  ProblemInstance instance;
  double noise = 0.0;
  double lambda = 0.0;
  double c = 0.0;
};
RandomTrial random_trial(std::uint64_t seed, PenaltyNorm p, std::optional<double> noise_scale);

/// Instance as a JSON document, for replaying solver failures.
nlohmann::json to_json(const ProblemInstance& inst);

ExperimentResult run_verify_deterministic(const ExperimentConfig& cfg);
ExperimentResult run_mrp_rate(const ExperimentConfig& cfg);
ExperimentResult run_coverage(const ExperimentConfig& cfg);
ExperimentResult run_offpolicy_bounds(const ExperimentConfig& cfg);
ExperimentResult run_solve_one(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// "# config_hash=<hex> seed=<seed> experiment=<name>".
std::string metadata_line(const ExperimentConfig& cfg);

double median(std::vector<double> values);

}  // namespace penlin
