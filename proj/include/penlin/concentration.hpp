#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace penlin {

/// The normalization point of the tail functions: z(1/e) = 1.
inline const double kInvE = std::exp(-1.0);

/// Empirical type-7 quantile (linear interpolation between order statistics)
/// of an ascending sample. p is clamped to [0, 1].
double sorted_quantile(std::span<const double> sorted, double p);

/// Calibrated high-probability model for the coefficient errors:
/// Delta_A <= s_a z_a(delta) and Delta_b <= s_b z_b(delta).
class TailModel {
 public:
  TailModel() = default;
  TailModel(double s_a, double s_b, std::vector<double> normalized_a,
            std::vector<double> normalized_b, long sample_size, std::string model_id = {});

  double s_a() const { return s_a_; }
  double s_b() const { return s_b_; }
  long sample_size() const { return sample_size_; }
  long n_train() const { return static_cast<long>(normalized_a_.size()); }
  const std::string& model_id() const { return model_id_; }
  const std::vector<double>& normalized_a() const { return normalized_a_; }
  const std::vector<double>& normalized_b() const { return normalized_b_; }

  /// Non-increasing in delta, exactly 1 at delta = kInvE. delta >= 1 gives the
  /// sample minimum; delta -> 0 saturates at the sample maximum.
  double z_a(double delta) const { return tail(normalized_a_, delta); }
  double z_b(double delta) const { return tail(normalized_b_, delta); }

  nlohmann::json to_json() const;
  static TailModel from_json(const nlohmann::json& doc);

 private:
  static double tail(const std::vector<double>& normalized, double delta);

  double s_a_ = 0.0;
  double s_b_ = 0.0;
  std::vector<double> normalized_a_;
  std::vector<double> normalized_b_;
  long sample_size_ = 0;
  std::string model_id_;
};

/// s = empirical (1 - 1/e)-quantile of each sample, z(delta) = the
/// (1 - delta)-quantile divided by s. Throws EmptySample / DegenerateSample.
TailModel calibrate_tails(std::span<const double> delta_a_samples,
                          std::span<const double> delta_b_samples, long n,
                          std::string model_id = {});

struct Coverage {
  double a = 0.0;
  double b = 0.0;
  double joint = 0.0;
};

/// Fraction of fresh errors inside the calibrated envelopes at delta.
Coverage coverage_test(const TailModel& tails, std::span<const double> fresh_delta_a,
                       std::span<const double> fresh_delta_b, double delta);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares line through (log n, log s). Needs >= 3 distinct n.
RateFit rate_fit(std::span<const std::pair<double, double>> pairs);

}  // namespace penlin
