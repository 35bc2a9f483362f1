#include "penlin/concentration.hpp"

#include <algorithm>
#include <set>

#include "penlin/error.hpp"

namespace penlin {

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::EmptySample, "quantile of an empty sample");
  p = std::clamp(p, 0.0, 1.0);
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto j = static_cast<std::size_t>(std::floor(h));
  if (j + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(j);
  return sorted[j] + frac * (sorted[j + 1] - sorted[j]);
}

TailModel::TailModel(double s_a, double s_b, std::vector<double> normalized_a,
                     std::vector<double> normalized_b, long sample_size, std::string model_id)
    : s_a_(s_a),
      s_b_(s_b),
      normalized_a_(std::move(normalized_a)),
      normalized_b_(std::move(normalized_b)),
      sample_size_(sample_size),
      model_id_(std::move(model_id)) {
  if (normalized_a_.empty() || normalized_b_.empty()) {
    throw Error(ErrorCode::EmptySample, "tail model needs samples for both A and b");
  }
  if (!(s_a_ > 0.0) || !(s_b_ > 0.0)) {
    throw Error(ErrorCode::DegenerateSample, "tail scales must be positive");
  }
  std::sort(normalized_a_.begin(), normalized_a_.end());
  std::sort(normalized_b_.begin(), normalized_b_.end());
}

double TailModel::tail(const std::vector<double>& normalized, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  // Dividing by the quantile at the normalization point makes z(1/e) == 1
  // exactly instead of up to interpolation rounding.
  const double anchor = sorted_quantile(normalized, 1.0 - kInvE);
  return sorted_quantile(normalized, 1.0 - std::min(delta, 1.0)) / anchor;
}

nlohmann::json TailModel::to_json() const {
  return {
      {"s_a", s_a_},
      {"s_b", s_b_},
      {"normalized_a", normalized_a_},
      {"normalized_b", normalized_b_},
      {"sample_size", sample_size_},
      {"n_train", n_train()},
      {"model_id", model_id_},
  };
}

TailModel TailModel::from_json(const nlohmann::json& doc) {
  try {
    return TailModel(doc.at("s_a").get<double>(), doc.at("s_b").get<double>(),
                     doc.at("normalized_a").get<std::vector<double>>(),
                     doc.at("normalized_b").get<std::vector<double>>(),
                     doc.at("sample_size").get<long>(), doc.value("model_id", std::string{}));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("tail model document: ") + e.what());
  }
}

namespace {

std::vector<double> checked_sorted(std::span<const double> samples, const char* which) {
  if (samples.empty()) {
    throw Error(ErrorCode::EmptySample, std::string("no ") + which + " samples");
  }
  std::vector<double> out(samples.begin(), samples.end());
  for (double v : out) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::InvalidArgument, std::string(which) + " samples must be finite and >= 0");
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> normalized(const std::vector<double>& sorted, double scale) {
  std::vector<double> out(sorted.size());
  std::transform(sorted.begin(), sorted.end(), out.begin(), [scale](double v) { return v / scale; });
  return out;
}

}  // namespace

TailModel calibrate_tails(std::span<const double> delta_a_samples,
                          std::span<const double> delta_b_samples, long n, std::string model_id) {
  const auto a = checked_sorted(delta_a_samples, "Delta_A");
  const auto b = checked_sorted(delta_b_samples, "Delta_b");
  const double s_a = sorted_quantile(a, 1.0 - kInvE);
  const double s_b = sorted_quantile(b, 1.0 - kInvE);
  if (!(s_a > 0.0) || !(s_b > 0.0)) {
    throw Error(ErrorCode::DegenerateSample,
                "calibrated scale is zero; the errors vanish and the tail model is vacuous");
  }
  return TailModel(s_a, s_b, normalized(a, s_a), normalized(b, s_b), n, std::move(model_id));
}

Coverage coverage_test(const TailModel& tails, std::span<const double> fresh_delta_a,
                       std::span<const double> fresh_delta_b, double delta) {
  if (fresh_delta_a.empty() || fresh_delta_b.empty()) {
    throw Error(ErrorCode::EmptySample, "coverage needs fresh samples");
  }
  if (fresh_delta_a.size() != fresh_delta_b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "fresh samples must be paired");
  }
  const double bound_a = tails.s_a() * tails.z_a(delta);
  const double bound_b = tails.s_b() * tails.z_b(delta);
  std::size_t in_a = 0, in_b = 0, in_both = 0;
  for (std::size_t i = 0; i < fresh_delta_a.size(); ++i) {
    const bool ok_a = fresh_delta_a[i] <= bound_a;
    const bool ok_b = fresh_delta_b[i] <= bound_b;
    in_a += ok_a;
    in_b += ok_b;
    in_both += ok_a && ok_b;
  }
  const double total = static_cast<double>(fresh_delta_a.size());
  return {static_cast<double>(in_a) / total, static_cast<double>(in_b) / total,
          static_cast<double>(in_both) / total};
}

RateFit rate_fit(std::span<const std::pair<double, double>> pairs) {
  std::set<double> distinct;
  for (const auto& [n, s] : pairs) {
    if (!(n > 0.0) || !(s > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "rate fit needs positive n and s");
    }
    distinct.insert(n);
  }
  if (distinct.size() < 3) {
    throw Error(ErrorCode::InsufficientPoints, "rate fit needs at least 3 distinct sample sizes");
  }
  const double count = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [n, s] : pairs) {
    mx += std::log(n);
    my += std::log(s);
  }
  mx /= count;
  my /= count;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [n, s] : pairs) {
    const double dx = std::log(n) - mx;
    sxy += dx * (std::log(s) - my);
    sxx += dx * dx;
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace penlin
