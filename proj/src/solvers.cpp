#include "penlin/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace penlin {

void SolveConfig::validate() const {
  if (!(objective_tolerance > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "objective_tolerance must be positive");
  }
  if (stall_window < 1 || max_iterations < stall_window) {
    throw Error(ErrorCode::InvalidArgument, "need 1 <= stall_window <= max_iterations");
  }
}

namespace {

// Relative duality-gap target for the inner solvers. Tighter than any
// user-facing tolerance: downstream bound checks amplify solver error.
constexpr double kGapTarget = 1e-13;
// Rank threshold (relative to the largest pivot) for least-squares solves.
constexpr double kRankThreshold = 1e-9;
constexpr int kPolishRounds = 4;

// The problem expressed in the Euclidean geometry: a = M^{1/2} A,
// b = M^{1/2} b, so that ||A theta - b||_M = ||a theta - b||_2.
struct Whitened {
  Matrix a;
  Vector b;
  Matrix gram;
  Vector corr;
  double b_norm = 0.0;
  // Eigen-pairs of the Gram matrix, used by the closed-form L2 path.
  Matrix eigvecs;
  Vector eigvals;
};

Whitened whiten(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m) {
  if (a_obs.rows() != b_obs.size() || b_obs.size() != m.dim()) {
    std::ostringstream os;
    os << "A is " << a_obs.rows() << "x" << a_obs.cols() << ", b has " << b_obs.size()
       << " entries, M is " << m.dim() << "x" << m.dim();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  if (!a_obs.allFinite() || !b_obs.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "non-finite entries in the system");
  }
  Whitened w;
  w.a = m.sqrt() * a_obs;
  w.b = m.sqrt() * b_obs;
  const Matrix gram = w.a.transpose() * w.a;
  w.gram = 0.5 * (gram + gram.transpose());
  w.corr = w.a.transpose() * w.b;
  w.b_norm = w.b.norm();
  if (w.gram.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(w.gram);
    w.eigvecs = eig.eigenvectors();
    w.eigvals = eig.eigenvalues().cwiseMax(0.0);
  }
  return w;
}

double residual_norm(const Whitened& w, const Vector& theta) {
  return (w.b - w.a * theta).norm();
}

double squared_objective(const Whitened& w, const Vector& theta, double rho, PenaltyNorm p) {
  const double r = residual_norm(w, theta);
  return r * r + rho * penalty_norm(theta, p);
}

double unsquared_objective(const Whitened& w, const Vector& theta, double lambda, PenaltyNorm p) {
  return residual_norm(w, theta) + lambda * penalty_norm(theta, p);
}

// Gap written so that no term of the size of ||b||^2 is cancelled.
double squared_gap(const Whitened& w, const Vector& theta, double rho, PenaltyNorm p) {
  const Vector r = w.b - w.a * theta;
  const Vector ar = w.a.transpose() * r;
  const double dual = 2.0 * dual_norm(ar, p);
  const double s = dual > rho ? rho / dual : 1.0;
  const double gap = (1.0 - s) * (1.0 - s) * r.squaredNorm() + rho * penalty_norm(theta, p) -
                     2.0 * s * ar.dot(theta);
  return std::max(gap, 0.0);
}

double unsquared_gap(const Whitened& w, const Vector& theta, double lambda, PenaltyNorm p) {
  const Vector r = w.b - w.a * theta;
  const double rn = r.norm();
  if (rn == 0.0) return std::numeric_limits<double>::infinity();
  const Vector ar = w.a.transpose() * r;
  const double dual = dual_norm(ar, p);
  const double s = dual > lambda * rn ? lambda * rn / dual : 1.0;
  const double gap = (1.0 - s) * rn + lambda * penalty_norm(theta, p) - s * ar.dot(theta) / rn;
  return std::max(gap, 0.0);
}

SolveResult finish(const Whitened& w, Vector theta, int iterations, bool converged, double weight,
                   PenaltyNorm p, bool squared) {
  SolveResult out;
  out.objective = squared ? squared_objective(w, theta, weight, p)
                          : unsquared_objective(w, theta, weight, p);
  out.theta = std::move(theta);
  out.iterations = iterations;
  out.converged = converged;
  return out;
}

// Exact solve of the squared problem restricted to the current support with
// its signs frozen; coordinates whose sign flips are dropped and the solve
// repeated. Returns nothing if the support empties without a candidate.
std::optional<Vector> polish_l1(const Whitened& w, double rho, const Vector& theta) {
  const Eigen::Index d = theta.size();
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (theta(j) != 0.0) support.push_back(j);
  }
  for (Eigen::Index round = 0; round <= d; ++round) {
    if (support.empty()) return Vector::Zero(d);
    const auto k = static_cast<Eigen::Index>(support.size());
    Matrix g(k, k);
    Vector rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double sign = theta(support[i]) > 0.0 ? 1.0 : -1.0;
      rhs(i) = w.corr(support[i]) - 0.5 * rho * sign;
      for (Eigen::Index j = 0; j < k; ++j) g(i, j) = w.gram(support[i], support[j]);
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(g);
    cod.setThreshold(kRankThreshold);
    const Vector x = cod.solve(rhs);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double sign = theta(support[i]) > 0.0 ? 1.0 : -1.0;
      if (x(i) * sign > 0.0) kept.push_back(support[i]);
    }
    if (kept.size() == support.size()) {
      Vector candidate = Vector::Zero(d);
      for (Eigen::Index i = 0; i < k; ++i) candidate(support[i]) = x(i);
      return candidate;
    }
    support = std::move(kept);
  }
  return std::nullopt;
}

SolveResult squared_l1(const Whitened& w, double rho, const SolveConfig& cfg, Vector theta) {
  const Eigen::Index d = w.gram.rows();
  if (theta.size() != d) theta = Vector::Zero(d);
  if (d == 0 || 2.0 * dual_norm(w.corr, PenaltyNorm::L1) <= rho) {
    return finish(w, Vector::Zero(d), 0, true, rho, PenaltyNorm::L1, true);
  }
  const double half = 0.5 * rho;
  int total = 0;
  bool converged = false;

  for (int round = 0; round < kPolishRounds; ++round) {
    Vector q = w.gram * theta;
    double f_prev = squared_objective(w, theta, rho, PenaltyNorm::L1);
    int stall = 0;
    bool gap_ok = false;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      ++total;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double gjj = w.gram(j, j);
        double next = 0.0;
        if (gjj > 0.0) {
          const double z = w.corr(j) - (q(j) - gjj * theta(j));
          if (z > half) {
            next = (z - half) / gjj;
          } else if (z < -half) {
            next = (z + half) / gjj;
          }
        }
        const double delta = next - theta(j);
        if (delta != 0.0) {
          q.noalias() += w.gram.col(j) * delta;
          theta(j) = next;
        }
      }
      if ((it + 1) % 64 == 0) q.noalias() = w.gram * theta;
      const double f = squared_objective(w, theta, rho, PenaltyNorm::L1);
      if (squared_gap(w, theta, rho, PenaltyNorm::L1) <= kGapTarget * f) {
        gap_ok = true;
        converged = true;
        break;
      }
      if (std::abs(f_prev - f) <= cfg.objective_tolerance * std::abs(f)) {
        if (++stall >= cfg.stall_window) {
          converged = true;
          break;
        }
      } else {
        stall = 0;
      }
      f_prev = f;
    }
    if (auto candidate = polish_l1(w, rho, theta)) {
      const double f_old = squared_objective(w, theta, rho, PenaltyNorm::L1);
      const double f_new = squared_objective(w, *candidate, rho, PenaltyNorm::L1);
      if (f_new <= f_old) {
        theta = std::move(*candidate);
        const double gap = squared_gap(w, theta, rho, PenaltyNorm::L1);
        if (gap <= kGapTarget * std::max(f_new, 1e-300) || gap <= 1e-15 * w.b_norm * w.b_norm) {
          converged = true;
          break;
        }
        continue;
      }
    }
    if (gap_ok || total >= cfg.max_iterations) break;
  }
  return finish(w, std::move(theta), total, converged, rho, PenaltyNorm::L1, true);
}

// Closed form: theta = (2G + sI)^{-1} 2g with s = rho / ||theta||, where s
// solves the monotone secular equation ||s (2G + sI)^{-1} 2g|| = rho.
SolveResult squared_l2(const Whitened& w, double rho) {
  const Eigen::Index d = w.gram.rows();
  const Vector g2 = 2.0 * w.corr;
  if (d == 0 || g2.norm() <= rho) {
    return finish(w, Vector::Zero(d), 0, true, rho, PenaltyNorm::L2, true);
  }
  const Vector gh = w.eigvecs.transpose() * g2;
  auto scaled_norm = [&](double s) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double t = gh(i) * (s / (2.0 * w.eigvals(i) + s));
      acc += t * t;
    }
    return std::sqrt(acc);
  };
  auto theta_at = [&](double s) {
    Vector coef(d);
    for (Eigen::Index i = 0; i < d; ++i) coef(i) = gh(i) / (2.0 * w.eigvals(i) + s);
    return Vector(w.eigvecs * coef);
  };
  int iterations = 0;
  double hi = rho;
  while (scaled_norm(hi) < rho && iterations < 2000) {
    hi *= 2.0;
    ++iterations;
  }
  double lo = hi * 0.5;
  while (scaled_norm(lo) >= rho && lo > 1e-300) {
    lo *= 0.5;
    ++iterations;
  }
  for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-16; ++it) {
    ++iterations;
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    if (scaled_norm(mid) < rho) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  Vector a = theta_at(lo);
  Vector b = theta_at(hi);
  Vector best = squared_objective(w, a, rho, PenaltyNorm::L2) <=
                        squared_objective(w, b, rho, PenaltyNorm::L2)
                    ? std::move(a)
                    : std::move(b);
  return finish(w, std::move(best), iterations, true, rho, PenaltyNorm::L2, true);
}

SolveResult squared_solve(const Whitened& w, double rho, PenaltyNorm p, const SolveConfig& cfg,
                          Vector warm) {
  return p == PenaltyNorm::L1 ? squared_l1(w, rho, cfg, std::move(warm)) : squared_l2(w, rho);
}

// Basis pursuit, min ||theta||_1 subject to a theta = b, as a linear program
// in (u, v) >= 0 with theta = u - v. Two-phase dense simplex with Bland's
// rule; returns nothing when the system has no exact solution.
std::optional<Vector> min_l1_interpolant(const Matrix& a, const Vector& b) {
  const Eigen::Index m = a.rows(), d = a.cols();
  const Eigen::Index nx = 2 * d;
  const Eigen::Index cols = nx + m;
  Matrix t = Matrix::Zero(m, cols + 1);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = b(i) < 0.0 ? -1.0 : 1.0;
    t.row(i).segment(0, d) = sign * a.row(i);
    t.row(i).segment(d, d) = -sign * a.row(i);
    t(i, nx + i) = 1.0;
    t(i, cols) = sign * b(i);
    basis[static_cast<std::size_t>(i)] = nx + i;
  }
  const double scale =
      std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  const double eps = 1e-11 * scale;

  auto pivot = [&](Eigen::Index r, Eigen::Index c) {
    t.row(r) /= t(r, c);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i != r && t(i, c) != 0.0) t.row(i) -= t(i, c) * t.row(r);
    }
    basis[static_cast<std::size_t>(r)] = c;
  };
  auto in_basis = [&](Eigen::Index j) {
    return std::find(basis.begin(), basis.end(), j) != basis.end();
  };
  // Columns below `allowed` may enter the basis.
  auto run = [&](const Vector& cost, Eigen::Index allowed) {
    const long max_pivots = 100 * static_cast<long>(cols + m) + 1000;
    for (long it = 0; it < max_pivots; ++it) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed && enter < 0; ++j) {
        if (in_basis(j)) continue;
        double reduced = cost(j);
        for (Eigen::Index i = 0; i < m; ++i) reduced -= cost(basis[static_cast<std::size_t>(i)]) * t(i, j);
        if (reduced < -eps) enter = j;
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        if (t(i, enter) <= eps) continue;
        const double ratio = t(i, cols) / t(i, enter);
        if (ratio < best || (ratio == best && basis[static_cast<std::size_t>(i)] <
                                                  basis[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return false;
  };

  Vector phase1 = Vector::Zero(cols);
  phase1.tail(m).setOnes();
  if (!run(phase1, cols)) return std::nullopt;
  double infeasibility = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] >= nx) infeasibility += t(i, cols);
  }
  if (infeasibility > 1e-9 * scale) return std::nullopt;
  // Drive zero-level artificials out; rows where that fails are redundant.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] < nx) continue;
    for (Eigen::Index j = 0; j < nx; ++j) {
      if (!in_basis(j) && std::abs(t(i, j)) > eps) {
        pivot(i, j);
        break;
      }
    }
  }
  Vector phase2 = Vector::Zero(cols);
  phase2.head(nx).setOnes();
  if (!run(phase2, nx)) return std::nullopt;

  Vector theta = Vector::Zero(d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index j = basis[static_cast<std::size_t>(i)];
    if (j < d) theta(j) += t(i, cols);
    else if (j < nx) theta(j - d) -= t(i, cols);
  }
  return theta;
}

// Least-squares solve restricted to the nonzero coordinates of `support_of`.
Vector restricted_solve(const Whitened& w, const Vector& support_of) {
  const Eigen::Index d = w.a.cols();
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (support_of(j) != 0.0) support.push_back(j);
  }
  Vector out = Vector::Zero(d);
  if (support.empty()) return out;
  Matrix sub(w.a.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) sub.col(i) = w.a.col(support[i]);
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sub);
  cod.setThreshold(kRankThreshold);
  const Vector x = cod.solve(w.b);
  for (std::size_t i = 0; i < support.size(); ++i) out(support[i]) = x(i);
  return out;
}

// Minimum-penalty interpolant candidates for the regime where the unsquared
// optimum has zero residual.
std::vector<Vector> interpolants(const Whitened& w, const Vector& hint, PenaltyNorm p) {
  if (p == PenaltyNorm::L2) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(w.a);
    cod.setThreshold(kRankThreshold);
    return {Vector(cod.solve(w.b))};
  }
  std::vector<Vector> out{restricted_solve(w, hint)};
  if (auto bp = min_l1_interpolant(w.a, w.b)) {
    out.push_back(*bp);
    // Re-solving on the optimal support removes the simplex round-off.
    out.push_back(restricted_solve(w, *bp));
  }
  return out;
}

SolveResult unsquared_solve(const Whitened& w, double lambda, PenaltyNorm p,
                            const SolveConfig& cfg) {
  const Eigen::Index d = w.a.cols();
  if (d == 0 || w.b_norm == 0.0 || dual_norm(w.corr, p) <= lambda * w.b_norm) {
    return finish(w, Vector::Zero(d), 0, true, lambda, p, false);
  }

  // Variational form: ||r|| = min_sigma ||r||^2 / (2 sigma) + sigma / 2. For
  // fixed sigma the inner problem is the squared estimator with
  // rho = 2 sigma lambda, and the outer function of sigma is convex, so
  // ||r(sigma)|| - sigma changes sign at most once.
  Vector best = Vector::Zero(d);
  double best_value = w.b_norm;
  Vector warm = Vector::Zero(d);
  int iterations = 0;
  bool inner_converged = true;

  auto consider = [&](const Vector& theta) {
    const double value = unsquared_objective(w, theta, lambda, p);
    if (value < best_value) {
      best_value = value;
      best = theta;
    }
  };
  auto probe = [&](double sigma) {
    SolveResult inner = squared_solve(w, 2.0 * sigma * lambda, p, cfg, warm);
    iterations += inner.iterations;
    inner_converged = inner_converged && inner.converged;
    warm = inner.theta;
    consider(inner.theta);
    return residual_norm(w, inner.theta) - sigma;
  };

  double hi = w.b_norm;
  double lo = w.b_norm * 1e-12;
  if (probe(lo) > 0.0) {
    for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-16; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (mid <= lo || mid >= hi) break;
      if (probe(mid) > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
  }
  // Zero-residual regime: the bisection only approaches the interpolant, so
  // offer the exact one as a candidate as well.
  for (const Vector& candidate : interpolants(w, best, p)) consider(candidate);
  const double gap = unsquared_gap(w, best, lambda, p);
  const bool converged =
      inner_converged || gap <= cfg.objective_tolerance * (1.0 + best_value);
  return finish(w, std::move(best), iterations, converged, lambda, p, false);
}

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be positive and finite");
  }
}

}  // namespace

SolveResult solve_unsquared(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                            double lambda, PenaltyNorm p, const SolveConfig& cfg) {
  require_positive(lambda, "lambda");
  cfg.validate();
  return unsquared_solve(whiten(a_obs, b_obs, m), lambda, p, cfg);
}

SolveResult solve_squared(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                          double rho, PenaltyNorm p, const SolveConfig& cfg) {
  require_positive(rho, "rho");
  cfg.validate();
  return squared_solve(whiten(a_obs, b_obs, m), rho, p, cfg, Vector());
}

double rho_kill_threshold(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                          PenaltyNorm p) {
  const Whitened w = whiten(a_obs, b_obs, m);
  return 2.0 * dual_norm(w.corr, p);
}

RhoSelection select_rho(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                        double lambda, double c, PenaltyNorm p, const SolveConfig& cfg) {
  require_positive(lambda, "lambda");
  require_positive(c, "c");
  cfg.validate();
  const Whitened w = whiten(a_obs, b_obs, m);
  const double kill = 2.0 * dual_norm(w.corr, p);

  RhoSelection out;
  std::vector<SolveResult> results;
  Vector warm;
  for (int k = 0; k <= kMaxGridExponent; ++k) {
    const double rho = std::ldexp(2.0 * c * lambda, k);
    SolveResult res = squared_solve(w, rho, p, cfg, warm);
    warm = res.theta;
    out.grid.push_back(rho);
    out.selector_values.push_back(unsquared_objective(w, res.theta, lambda, p));
    results.push_back(std::move(res));
    if (rho > kill) break;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.selector_values.size(); ++i) {
    if (out.selector_values[i] < out.selector_values[best]) best = i;
  }
  out.index = best;
  out.rho_hat = out.grid[best];
  out.result = std::move(results[best]);
  return out;
}

double oracle_infimum(const Matrix& a, const Vector& b, const WeightMatrix& m, double weight,
                      PenaltyNorm p, const SolveConfig& cfg, std::optional<double> radius) {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw Error(ErrorCode::InvalidArgument, "weight must be nonnegative and finite");
  }
  cfg.validate();
  const Whitened w = whiten(a, b, m);
  if (weight > 0.0) return unsquared_solve(w, weight, p, cfg).objective;

  if (w.a.cols() == 0) return w.b_norm;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(w.a);
  cod.setThreshold(kRankThreshold);
  const bool full_rank = cod.rank() == w.a.cols();
  if (!full_rank && !radius) {
    throw Error(ErrorCode::UnattainedInfimum,
                "weight 0 with a column-rank-deficient A needs a search radius");
  }
  const Vector theta = cod.solve(w.b);
  if (!full_rank && penalty_norm(theta, p) > *radius) {
    throw Error(ErrorCode::UnattainedInfimum, "least-squares minimizer lies outside the radius");
  }
  return residual_norm(w, theta);
}

double unsquared_duality_gap(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                             double lambda, PenaltyNorm p, const Vector& theta) {
  return unsquared_gap(whiten(a_obs, b_obs, m), theta, lambda, p);
}

double squared_duality_gap(const Matrix& a_obs, const Vector& b_obs, const WeightMatrix& m,
                           double rho, PenaltyNorm p, const Vector& theta) {
  return squared_gap(whiten(a_obs, b_obs, m), theta, rho, p);
}

}  // namespace penlin
