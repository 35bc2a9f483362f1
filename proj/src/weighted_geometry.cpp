#include "penlin/weighted_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "penlin/error.hpp"

namespace penlin {

std::string_view to_string(PenaltyNorm p) {
  return p == PenaltyNorm::L1 ? "l1" : "l2";
}

std::optional<PenaltyNorm> parse_penalty(std::string_view name) {
  if (name == "l1" || name == "L1") return PenaltyNorm::L1;
  if (name == "l2" || name == "L2") return PenaltyNorm::L2;
  return std::nullopt;
}

void check_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "weight matrix is not square");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * (1.0 + std::abs(m(i, j)))) {
        std::ostringstream os;
        os << "entries (" << i << "," << j << ") and (" << j << "," << i << ") differ";
        throw Error(ErrorCode::NotSymmetric, os.str());
      }
    }
  }
}

Matrix psd_sqrt(const Matrix& m) {
  check_symmetric(m);
  if (m.size() == 0) return m;
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "symmetric eigendecomposition failed");
  }
  Vector values = eig.eigenvalues();
  const double radius = values.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < -1e-10 * radius) {
      std::ostringstream os;
      os << "eigenvalue " << values(i) << " below tolerance (spectral radius " << radius << ")";
      throw Error(ErrorCode::NotPsd, os.str());
    }
    values(i) = std::sqrt(std::max(values(i), 0.0));
  }
  const Matrix& q = eig.eigenvectors();
  Matrix root = q * values.asDiagonal() * q.transpose();
  return 0.5 * (root + root.transpose());
}

WeightMatrix::WeightMatrix(Matrix m) : matrix_(std::move(m)), sqrt_(psd_sqrt(matrix_)) {}

WeightMatrix WeightMatrix::identity(Eigen::Index dim) {
  return WeightMatrix(Matrix::Identity(dim, dim));
}

double weighted_norm(const Vector& x, const WeightMatrix& m) {
  if (x.size() != m.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "vector length does not match weight dimension");
  }
  return (m.sqrt() * x).norm();
}

double penalty_norm(const Vector& theta, PenaltyNorm p) {
  if (theta.size() == 0) return 0.0;
  return p == PenaltyNorm::L1 ? theta.lpNorm<1>() : theta.norm();
}

double dual_norm(const Vector& v, PenaltyNorm p) {
  if (v.size() == 0) return 0.0;
  return p == PenaltyNorm::L1 ? v.lpNorm<Eigen::Infinity>() : v.norm();
}

double spectral_norm(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  // Work with the smaller Gram matrix. Repeated squaring raises it to the
  // power 2^k, so every eigen-direction below the top one dies out
  // doubly-exponentially fast.
  const bool use_cols = x.cols() <= x.rows();
  Matrix power = use_cols ? Matrix(x.transpose() * x) : Matrix(x * x.transpose());
  const double scale = power.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  power /= scale;

  auto estimate = [&](const Matrix& p) {
    Eigen::Index col = 0;
    p.colwise().squaredNorm().maxCoeff(&col);
    const Vector v = p.col(col);
    const double vv = v.squaredNorm();
    if (vv == 0.0) return 0.0;
    const double num = use_cols ? (x * v).squaredNorm() : (x.transpose() * v).squaredNorm();
    return std::sqrt(num / vv);
  };

  double previous = estimate(power);
  int settled = 0;
  for (int it = 0; it < kMaxSpectralIterations; ++it) {
    Matrix next = power * power;
    next = 0.5 * (next + next.transpose()).eval();
    const double peak = next.cwiseAbs().maxCoeff();
    if (peak == 0.0 || !std::isfinite(peak)) break;
    power = next / peak;
    const double current = estimate(power);
    if (std::abs(current - previous) <= kSpectralTolerance * current) {
      if (++settled >= 2) return std::max(current, previous);
    } else {
      settled = 0;
    }
    previous = current;
  }
  throw Error(ErrorCode::ConvergenceFailure, "spectral norm iteration did not settle");
}

double dual_operator_norm(const Matrix& x, PenaltyNorm p) {
  if (x.size() == 0) return 0.0;
  if (p == PenaltyNorm::L1) return x.colwise().norm().maxCoeff();
  return spectral_norm(x);
}

double loss(const Vector& theta, const Matrix& a, const Vector& b, const WeightMatrix& m) {
  if (a.cols() != theta.size() || a.rows() != b.size() || b.size() != m.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "loss operands have inconsistent shapes");
  }
  return weighted_norm(a * theta - b, m);
}

}  // namespace penlin
