#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mdfn {

/// Raised when (I - R^T) cannot be inverted, i.e. the routing matrix is not
/// Schur stable.
class SingularRoutingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Dense solves switch to Neumann iteration above this many cells.
inline constexpr Eigen::Index kDenseSolveLimit = 2000;

// Sum_{m>=0} (R^T)^m v, stopping when the added term drops below tol (l1) or
// after max_terms terms.
template <typename MatrixType, typename VectorType>
Eigen::Matrix<typename MatrixType::Scalar, Eigen::Dynamic, 1>
neumann_series_apply(const Eigen::MatrixBase<MatrixType>& routing,
                     const Eigen::MatrixBase<VectorType>& v,
                     typename MatrixType::Scalar tol = 1e-12,
                     long max_terms = 1000000) {
  using Scalar = typename MatrixType::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vec term = v;
  Vec sum = term;
  for (long m = 1; m < max_terms; ++m) {
    term = routing.transpose() * term;
    sum += term;
    const Scalar size = term.template lpNorm<1>();
    if (!std::isfinite(static_cast<double>(size))) break;
    if (size <= tol) return sum;
  }
  throw SingularRoutingError(
      "Neumann series for (I - R^T)^{-1} did not converge; routing matrix is "
      "not Schur stable");
}

/// Applies the Leontief inverse (I - R^T)^{-1} to v.
///
/// Small systems use a dense LU factorization, large ones fall back to the
/// Neumann series. The result is the transported flow: direct inflow plus
/// everything it induces downstream.
template <typename MatrixType, typename VectorType>
Eigen::Matrix<typename MatrixType::Scalar, Eigen::Dynamic, 1>
leontief_inverse_apply(const Eigen::MatrixBase<MatrixType>& routing,
                       const Eigen::MatrixBase<VectorType>& v) {
  using Scalar = typename MatrixType::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = routing.rows();
  if (routing.cols() != n || v.size() != n)
    throw std::invalid_argument("leontief_inverse_apply: dimension mismatch");
  if (n == 0) return Vec();
  if (n > kDenseSolveLimit) return neumann_series_apply(routing, v);

  const Mat system = Mat::Identity(n, n) - routing.transpose();
  Eigen::FullPivLU<Mat> lu(system);
  if (!lu.isInvertible())
    throw SingularRoutingError("I - R^T is singular; routing matrix is not Schur stable");
  Vec u = lu.solve(v);
  const Scalar residual = (system * u - v).template lpNorm<Eigen::Infinity>();
  const Scalar scale = std::max<Scalar>(Scalar(1), v.template lpNorm<Eigen::Infinity>());
  if (!u.allFinite() || residual > Scalar(1e-9) * scale)
    throw SingularRoutingError("I - R^T is numerically singular");
  return u;
}

/// l1 matrix measure (logarithmic norm induced by the l1 norm):
/// max over columns j of J_jj + sum_{i != j} |J_ij|.
template <typename Derived>
typename Derived::Scalar l1_matrix_measure(const Eigen::MatrixBase<Derived>& jac) {
  using Scalar = typename Derived::Scalar;
  if (jac.rows() != jac.cols())
    throw std::invalid_argument("l1_matrix_measure: matrix must be square");
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index j = 0; j < jac.cols(); ++j) {
    Scalar col = jac(j, j);
    for (Eigen::Index i = 0; i < jac.rows(); ++i)
      if (i != j) col += std::abs(jac(i, j));
    best = std::max(best, col);
  }
  return best;
}

struct HurwitzResult {
  bool is_hurwitz = false;
  double max_real_part = 0.0;
};

inline constexpr double kHurwitzMargin = 1e-10;

/// Eigenvalue-based Hurwitz test: every eigenvalue must have real part
/// below -1e-10.
template <typename Derived>
HurwitzResult hurwitz_check(const Eigen::MatrixBase<Derived>& jac) {
  if (jac.rows() != jac.cols())
    throw std::invalid_argument("hurwitz_check: matrix must be square");
  if (jac.rows() == 0) return {true, -std::numeric_limits<double>::infinity()};
  const Eigen::MatrixXd dense = jac.template cast<double>();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("hurwitz_check: eigenvalue solver did not converge");
  const double max_re = solver.eigenvalues().real().maxCoeff();
  return {max_re < -kHurwitzMargin, max_re};
}

template <typename Derived>
double spectral_radius(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() == 0) return 0.0;
  const Eigen::MatrixXd dense = m.template cast<double>();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, false);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("spectral_radius: eigenvalue solver did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace mdfn
