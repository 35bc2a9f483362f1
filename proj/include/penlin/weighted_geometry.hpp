#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace penlin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Norm used in the penalty term. L-infinity is deliberately absent: its
/// (2,*)-operator norm needs a search over all sign patterns.
enum class PenaltyNorm { L1, L2 };

std::string_view to_string(PenaltyNorm p);
std::optional<PenaltyNorm> parse_penalty(std::string_view name);

// Spectral-norm iteration limits.
inline constexpr int kMaxSpectralIterations = 10000;
inline constexpr double kSpectralTolerance = 1e-10;

/// Throws NotSymmetric unless |M_ij - M_ji| <= 1e-12 (1 + |M_ij|).
void check_symmetric(const Matrix& m);

/// Symmetric PSD square root via eigendecomposition. Eigenvalues in
/// [-1e-10 * spectral radius, 0) are clamped to zero; anything more negative
/// raises NotPsd.
Matrix psd_sqrt(const Matrix& m);

/// Immutable PSD weight with its square root computed once.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  explicit WeightMatrix(Matrix m);

  static WeightMatrix identity(Eigen::Index dim);

  Eigen::Index dim() const { return matrix_.rows(); }
  const Matrix& matrix() const { return matrix_; }
  const Matrix& sqrt() const { return sqrt_; }

 private:
  Matrix matrix_;
  Matrix sqrt_;
};

/// sqrt(x^T M x), evaluated as ||M^{1/2} x||_2.
double weighted_norm(const Vector& x, const WeightMatrix& m);

double penalty_norm(const Vector& theta, PenaltyNorm p);

/// Dual of the penalty norm: l-infinity for L1, l2 for L2.
double dual_norm(const Vector& v, PenaltyNorm p);

/// Largest singular value, by repeated squaring of the Gram matrix.
/// Throws ConvergenceFailure if the estimate has not settled to
/// kSpectralTolerance within kMaxSpectralIterations squarings.
double spectral_norm(const Matrix& x);

/// sup_{v != 0} ||X v||_2 / ||v||. Max column norm for L1, spectral norm for L2.
double dual_operator_norm(const Matrix& x, PenaltyNorm p);

/// ||A theta - b||_M.
double loss(const Vector& theta, const Matrix& a, const Vector& b, const WeightMatrix& m);

}  // namespace penlin
