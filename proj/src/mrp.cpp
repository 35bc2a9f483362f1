#include "penlin/mrp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <type_traits>

#include "penlin/error.hpp"

namespace penlin {

void check_row_stochastic(const Matrix& p, const std::string& what) {
  if (p.rows() == 0 || p.rows() != p.cols()) {
    throw Error(ErrorCode::DimensionMismatch, what + " must be a non-empty square matrix");
  }
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if ((p.row(i).array() < 0.0).any() || !p.row(i).allFinite()) {
      std::ostringstream os;
      os << what << " row " << i << " has a negative or non-finite entry";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
    const double sum = p.row(i).sum();
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream os;
      os.precision(17);
      os << what << " row " << i << " sums to " << sum << ", not 1";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
  }
}

Vector FiniteMrp::expected_reward() const {
  return (transition.array() * mean_reward.array()).rowwise().sum().matrix();
}

void FiniteMrp::validate() const {
  check_row_stochastic(transition, "transition");
  if (mean_reward.rows() != transition.rows() || mean_reward.cols() != transition.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "mean_reward must match the transition shape");
  }
  if (!mean_reward.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "mean_reward has non-finite entries");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "gamma must lie strictly inside (0, 1)");
  }
  if (!(reward_noise_std >= 0.0) || !std::isfinite(reward_noise_std)) {
    throw Error(ErrorCode::InvalidArgument, "reward_noise_std must be finite and >= 0");
  }
}

void OffPolicyMrp::validate() const {
  base.validate();
  check_row_stochastic(behavior, "behavior");
  if (behavior.rows() != base.n_states()) {
    throw Error(ErrorCode::DimensionMismatch, "behavior and target chains differ in size");
  }
}

const FiniteMrp& target_of(const MrpModel& model) {
  return std::visit(
      [](const auto& m) -> const FiniteMrp& {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, FiniteMrp>) {
          return m;
        } else {
          return m.base;
        }
      },
      model);
}

namespace {

const Matrix& index_chain(const MrpModel& model) {
  if (const auto* off = std::get_if<OffPolicyMrp>(&model)) return off->behavior;
  return std::get<FiniteMrp>(model).transition;
}

void validate_model(const MrpModel& model) {
  std::visit([](const auto& m) { m.validate(); }, model);
}

void check_features(const FeatureMap& features, Eigen::Index n_states) {
  if (features.phi.rows() != n_states || features.phi.cols() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "feature matrix must have one row per state");
  }
  if (!features.phi.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "feature matrix has non-finite entries");
  }
}

int draw(const Matrix& p, int row, double u) {
  double cumulative = 0.0;
  int last = 0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    if (p(row, j) <= 0.0) continue;
    cumulative += p(row, j);
    last = static_cast<int>(j);
    if (u < cumulative) return last;
  }
  return last;
}

int draw_vector(const Vector& mu, double u) {
  double cumulative = 0.0;
  int last = 0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    if (mu(j) <= 0.0) continue;
    cumulative += mu(j);
    last = static_cast<int>(j);
    if (u < cumulative) return last;
  }
  return last;
}

}  // namespace

Vector stationary_distribution(const Matrix& p) {
  check_row_stochastic(p, "transition");
  const Eigen::Index n = p.rows();
  const Matrix pt = p.transpose();
  Vector mu = Vector::Constant(n, 1.0 / static_cast<double>(n));
  double best = std::numeric_limits<double>::infinity();
  long since_best = 0;
  for (long it = 0; it < kMaxStationaryIterations; ++it) {
    Vector next = pt * mu;
    next /= next.sum();
    const double residual = (next - mu).lpNorm<Eigen::Infinity>();
    mu = std::move(next);
    if (residual <= 1e-16) break;
    if (residual < 0.5 * best) {
      best = residual;
      since_best = 0;
    } else if (++since_best > 10000) {
      break;
    }
  }
  const double residual = (pt * mu - mu).lpNorm<Eigen::Infinity>();
  if (!(residual <= kStationaryTolerance)) {
    std::ostringstream os;
    os << "power iteration stalled with residual " << residual;
    throw Error(ErrorCode::NoUniqueStationary, os.str());
  }
  return mu;
}

Vector value_function(const FiniteMrp& mrp) {
  mrp.validate();
  const Eigen::Index n = mrp.n_states();
  const Matrix system = Matrix::Identity(n, n) - mrp.gamma * mrp.transition;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularSystem, "I - gamma P is singular");
  return lu.solve(mrp.expected_reward());
}

LinearSystem exact_system(const MrpModel& model, const FeatureMap& features) {
  validate_model(model);
  const FiniteMrp& target = target_of(model);
  check_features(features, target.n_states());
  LinearSystem out;
  out.mu = stationary_distribution(index_chain(model));
  const Matrix& phi = features.phi;
  const auto weights = out.mu.asDiagonal();
  // Temporal-difference feature (phi(x) - gamma E[phi(X') | x]) per state.
  const Matrix td = phi - target.gamma * target.transition * phi;
  out.a = phi.transpose() * weights * td;
  out.b = phi.transpose() * weights * target.expected_reward();
  const Matrix c = phi.transpose() * weights * phi;
  out.c = 0.5 * (c + c.transpose());
  return out;
}

Trajectory simulate(const MrpModel& model, std::size_t n, std::uint64_t seed) {
  validate_model(model);
  const FiniteMrp& target = target_of(model);
  const Matrix& index = index_chain(model);
  const bool off_policy = std::holds_alternative<OffPolicyMrp>(model);
  const Vector mu = stationary_distribution(index);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Trajectory traj;
  traj.states.reserve(n);
  traj.rewards.reserve(n);
  traj.next_states.reserve(n);
  int x = draw_vector(mu, uniform(rng));
  traj.initial_state = x;
  for (std::size_t t = 0; t < n; ++t) {
    const int successor = draw(target.transition, x, uniform(rng));
    double reward = target.mean_reward(x, successor);
    if (target.reward_noise_std > 0.0) reward += target.reward_noise_std * noise(rng);
    const int next_index = off_policy ? draw(index, x, uniform(rng)) : successor;
    traj.states.push_back(x);
    traj.rewards.push_back(reward);
    traj.next_states.push_back(successor);
    x = next_index;
  }
  return traj;
}

EmpiricalSystem empirical_system(const Trajectory& traj, const FeatureMap& features,
                                 double gamma) {
  const std::size_t n = traj.length();
  if (n == 0) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no transitions");
  if (traj.rewards.size() != n || traj.next_states.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "trajectory sequences differ in length");
  }
  const Matrix& phi = features.phi;
  const Eigen::Index states = phi.rows();
  // Sufficient statistics: transition counts and per-state reward sums.
  Matrix counts = Matrix::Zero(states, states);
  Vector reward_sums = Vector::Zero(states);
  for (std::size_t t = 0; t < n; ++t) {
    const int x = traj.states[t];
    const int y = traj.next_states[t];
    if (x < 0 || x >= states || y < 0 || y >= states) {
      throw Error(ErrorCode::DimensionMismatch, "trajectory visits a state without features");
    }
    counts(x, y) += 1.0;
    reward_sums(x) += traj.rewards[t];
  }
  const double scale = 1.0 / static_cast<double>(n);
  const Vector visits = counts.rowwise().sum();
  EmpiricalSystem out;
  const Matrix td = visits.asDiagonal() * phi - gamma * counts * phi;
  out.a_obs = scale * (phi.transpose() * td);
  out.b_obs = scale * (phi.transpose() * reward_sums);
  out.c_obs = scale * (phi.transpose() * visits.asDiagonal() * phi);
  return out;
}

WeightMatrix inverse_weight(const Matrix& c) {
  check_symmetric(c);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (c + c.transpose()));
  const Vector values = eig.eigenvalues();
  if (values.size() == 0 || values.minCoeff() <= kMinFeatureEigenvalue) {
    throw Error(ErrorCode::RankDeficientC, "feature second-moment matrix is singular");
  }
  Matrix inv = eig.eigenvectors() * values.cwiseInverse().asDiagonal() *
               eig.eigenvectors().transpose();
  return WeightMatrix(0.5 * (inv + inv.transpose()));
}

double projected_bellman_error(const Vector& theta, const FiniteMrp& mrp,
                               const FeatureMap& features) {
  mrp.validate();
  check_features(features, mrp.n_states());
  if (theta.size() != features.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "theta length must equal the feature count");
  }
  const Vector mu = stationary_distribution(mrp.transition);
  const Matrix& phi = features.phi;
  const Matrix gram = phi.transpose() * mu.asDiagonal() * phi;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (gram + gram.transpose()));
  if (eig.eigenvalues().minCoeff() <= kMinFeatureEigenvalue) {
    throw Error(ErrorCode::RankDeficientC, "features are linearly dependent under mu");
  }
  const Vector w = phi * theta;
  const Vector bellman = mrp.expected_reward() + mrp.gamma * mrp.transition * w;
  const Vector residual = bellman - w;
  // mu-orthogonal projection onto span(phi).
  const Vector coef = gram.ldlt().solve(phi.transpose() * mu.asDiagonal() * residual);
  const Vector projected = phi * coef;
  return std::sqrt((mu.array() * projected.array().square()).sum());
}

}  // namespace penlin
