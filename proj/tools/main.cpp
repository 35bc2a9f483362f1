// Experiment driver. Exit status: 0 all checks passed, 1 a check failed,
// 2 configuration, parse or runtime error.
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "penlin/error.hpp"
#include "penlin/experiments.hpp"
#include "penlin/model_io.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> trials;
  std::optional<long> calibration_trials;
  std::optional<std::string> penalty;
  std::vector<double> deltas;
  std::vector<long> sizes;
  std::optional<std::string> model_path;
  std::optional<std::string> output_path;
  std::optional<double> tolerance;
  std::optional<int> max_iterations;
  std::optional<int> stall_window;
  std::optional<double> noise_scale;
  std::optional<double> coverage_margin;
};

void add_options(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config_path, "JSON config file");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--trials", o.trials, "evaluation replications");
  sub->add_option("--calibration-trials", o.calibration_trials, "calibration replications");
  sub->add_option("--penalty", o.penalty, "l1, l2 or both");
  sub->add_option("--deltas", o.deltas, "confidence levels")->delimiter(',');
  sub->add_option("--sizes", o.sizes, "sample sizes")->delimiter(',');
  sub->add_option("--model", o.model_path, "model or request document");
  sub->add_option("-o,--output", o.output_path, "CSV output path (stdout if omitted)");
  sub->add_option("--objective-tolerance", o.tolerance, "solver tolerance");
  sub->add_option("--max-iterations", o.max_iterations, "solver iteration cap");
  sub->add_option("--stall-window", o.stall_window, "solver stall window");
  sub->add_option("--noise-scale", o.noise_scale, "fixed noise scale (verify-deterministic)");
  sub->add_option("--coverage-margin", o.coverage_margin, "allowed coverage shortfall");
}

penlin::ExperimentConfig build_config(penlin::ExperimentKind kind, const Overrides& o) {
  penlin::ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    cfg = penlin::ExperimentConfig::from_json(
        penlin::parse_json(penlin::read_text_file(o.config_path), o.config_path));
  }
  cfg.experiment = kind;
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.trials = *o.trials;
  if (o.calibration_trials) cfg.calibration_trials = *o.calibration_trials;
  if (o.penalty) {
    if (*o.penalty == "both") {
      cfg.penalties = {penlin::PenaltyNorm::L1, penlin::PenaltyNorm::L2};
    } else if (auto p = penlin::parse_penalty(*o.penalty)) {
      cfg.penalties = {*p};
    } else {
      throw penlin::Error(penlin::ErrorCode::ParseError, "--penalty must be l1, l2 or both");
    }
  }
  if (!o.deltas.empty()) cfg.deltas = o.deltas;
  if (!o.sizes.empty()) cfg.sizes = o.sizes;
  if (o.model_path) cfg.model_path = *o.model_path;
  if (o.output_path) cfg.output_path = *o.output_path;
  if (o.tolerance) cfg.solver.objective_tolerance = *o.tolerance;
  if (o.max_iterations) cfg.solver.max_iterations = *o.max_iterations;
  if (o.stall_window) cfg.solver.stall_window = *o.stall_window;
  if (o.noise_scale) cfg.noise_scale = *o.noise_scale;
  if (o.coverage_margin) cfg.coverage_margin = *o.coverage_margin;
  cfg.validate();
  return cfg;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw penlin::Error(penlin::ErrorCode::InvalidArgument, "cannot write " + path);
  out << text;
  if (!out) throw penlin::Error(penlin::ErrorCode::InvalidArgument, "failed writing " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized estimators for statistical linear inverse problems"};
  app.require_subcommand(1);
  Overrides overrides;
  const std::vector<std::pair<const char*, const char*>> commands{
      {"verify-deterministic", "check the deterministic oracle inequalities on random instances"},
      {"mrp-rate", "loss of the unsquared estimator versus sample size"},
      {"coverage", "empirical coverage of the probabilistic bounds"},
      {"offpolicy-bounds", "probabilistic bounds on an off-policy model"},
      {"solve-one", "run one estimator on a request document"},
  };
  for (const auto& [name, help] : commands) add_options(app.add_subcommand(name, help), overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    const auto kind = penlin::parse_experiment(name);
    const penlin::ExperimentConfig cfg = build_config(*kind, overrides);
    const penlin::ExperimentResult result = penlin::run_experiment(cfg);
    if (cfg.output_path.empty()) {
      std::cout << result.csv << result.document;
    } else {
      write_file(cfg.output_path, result.csv);
      if (!result.document.empty()) write_file(cfg.output_path + ".json", result.document);
    }
    if (!result.passed) {
      std::cerr << name << ": at least one check failed\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
