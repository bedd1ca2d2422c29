#pragma once

/** @file
 * Structured matrices used by the scale model: Toeplitz covariances,
 * powers of the difference operator, the DCT-VIII basis that diagonalizes
 * them, and the whitening transform that turns the noise covariance into the
 * identity and the signal covariance into a diagonal matrix.
 */

#include <lapacke.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scalefisher/error.hpp"
#include "scalefisher/numeric.hpp"

namespace scalefisher {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Dense symmetric matrix in full storage; symmetric by construction.
using SymMatrix = Eigen::MatrixXd;

/// Which power of the difference operator generates the noise covariance:
/// tau^2 (Delta Delta^t)^K or tau^2 (Delta^t Delta)^K.
enum class NoiseConvention { delta_deltaT, deltaT_delta };

inline const char* to_string(NoiseConvention c) {
  return c == NoiseConvention::delta_deltaT ? "delta_deltaT" : "deltaT_delta";
}

/// T_n(gamma) = (gamma_{|i-j|}) for the first n lags.
inline SymMatrix toeplitz(std::span<const double> gamma, std::size_t n) {
  detail::require(n >= 1, "toeplitz: order must be positive");
  detail::require(gamma.size() >= n, "toeplitz: need at least n autocovariances");
  SymMatrix t(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) t(i, j) = gamma[i > j ? i - j : j - i];
  return t;
}

inline SymMatrix toeplitz(std::span<const double> gamma) { return toeplitz(gamma, gamma.size()); }

/// Backward difference operator: ones on the diagonal, -1 below it.
inline Matrix backward_difference(std::size_t n) {
  Matrix d = Matrix::Identity(n, n);
  for (std::size_t i = 1; i < n; ++i) d(i, i - 1) = -1.0;
  return d;
}

namespace detail {

// Delta^t Delta: tridiag(-1; 2,...,2,1; -1). Delta Delta^t: tridiag(-1; 1,2,...,2; -1).
inline SymMatrix second_difference(std::size_t n, NoiseConvention convention) {
  SymMatrix m = SymMatrix::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 2.0;
    if (i + 1 < n) m(i, i + 1) = m(i + 1, i) = -1.0;
  }
  if (convention == NoiseConvention::deltaT_delta)
    m(n - 1, n - 1) = 1.0;
  else
    m(0, 0) = 1.0;
  return m;
}

}  // namespace detail

/// tau^2 (Delta Delta^t)^K or tau^2 (Delta^t Delta)^K. The integer entries of
/// the K-th power are formed exactly by repeated tridiagonal products.
inline SymMatrix diff_cov(std::size_t n, int K, double tau, NoiseConvention convention) {
  detail::require(n >= 1, "diff_cov: order must be positive");
  detail::require(K >= 0, "diff_cov: K must be nonnegative");
  const SymMatrix base = detail::second_difference(n, convention);
  SymMatrix p = SymMatrix::Identity(n, n);
  for (int step = 0; step < K; ++step) {
    SymMatrix next = SymMatrix::Zero(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = p(i, j) * base(j, j);
        if (j > 0) s += p(i, j - 1) * base(j - 1, j);
        if (j + 1 < n) s += p(i, j + 1) * base(j + 1, j);
        next(i, j) = s;
      }
    }
    p = std::move(next);
  }
  return tau * tau * p;
}

/// Orthonormal DCT-VIII of order n. The matrix is symmetric and its own
/// inverse; column j is an eigenvector of Delta^t Delta with eigenvalue
/// 4 sin^2(u_j / 2).
struct DctBasis {
  Vector nodes;   ///< u_j = pi (2j - 1) / (2n + 1), j = 1..n
  Matrix matrix;  ///< C_ij = 2 / sqrt(2n + 1) cos((i - 1/2) u_j)
};

inline Vector dct_nodes(std::size_t n) {
  Vector u(n);
  const double denom = 2.0 * static_cast<double>(n) + 1.0;
  for (std::size_t j = 0; j < n; ++j) u(j) = pi * (2.0 * static_cast<double>(j) + 1.0) / denom;
  return u;
}

inline DctBasis dct_viii(std::size_t n) {
  detail::require(n >= 1, "dct_viii: order must be positive");
  DctBasis basis{dct_nodes(n), Matrix(n, n)};
  // (i - 1/2) u_j = pi m / (2 (2n + 1)) with m = (2i - 1)(2j - 1); reducing m
  // modulo the period 4 (2n + 1) keeps the cosine argument small and exact.
  const std::size_t period = 4 * (2 * n + 1);
  const double scale = 2.0 / std::sqrt(2.0 * static_cast<double>(n) + 1.0);
  const double step = pi / (2.0 * (2.0 * static_cast<double>(n) + 1.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i <= j; ++i) {
      const std::size_t m = ((2 * i + 1) * (2 * j + 1)) % period;
      const double c = scale * std::cos(step * static_cast<double>(m));
      basis.matrix(i, j) = c;
      basis.matrix(j, i) = c;
    }
  }
  return basis;
}

/// Spectral decomposition cov = basis * diag(eigenvalues) * basis^t.
struct NoiseDiagonalization {
  Vector eigenvalues;
  Matrix basis;
};

/// Closed-form diagonalization of tau^2 (Delta Delta^t)^K in the DCT-VIII
/// basis: cos((i - 1/2) u) satisfies the first row v_1 - v_2 = 4 sin^2(u/2) v_1
/// of Delta Delta^t. The Delta^t Delta convention is the index reversal of
/// that one, so it shares the eigenvalues and uses the row-reversed basis.
inline NoiseDiagonalization dct_diagonalize_noise(std::size_t n, int K, double tau,
                                                  NoiseConvention convention) {
  detail::require(K >= 0, "dct_diagonalize_noise: K must be nonnegative");
  DctBasis dct = dct_viii(n);
  NoiseDiagonalization out;
  out.eigenvalues.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    out.eigenvalues(i) = tau * tau * std::pow(2.0 * std::sin(dct.nodes(i) / 2.0), 2 * K);
  if (convention == NoiseConvention::delta_deltaT)
    out.basis = std::move(dct.matrix);
  else
    out.basis = dct.matrix.colwise().reverse();
  return out;
}

/// D_n(g) = C diag(g(u_1), ..., g(u_n)) C.
inline SymMatrix dn_matrix(const std::function<double(double)>& g, std::size_t n) {
  const DctBasis dct = dct_viii(n);
  Vector values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values(i) = g(dct.nodes(i));
    if (!std::isfinite(values(i)))
      throw DomainError("dn_matrix: symbol is not finite at u_" + std::to_string(i + 1));
  }
  SymMatrix d = dct.matrix * values.asDiagonal() * dct.matrix;
  return (0.5 * (d + d.transpose())).eval();
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order (LAPACK dsyevd, divide and conquer).
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

inline SymmetricEigen symmetric_eigen(const SymMatrix& a) {
  const auto n = static_cast<lapack_int>(a.rows());
  SymmetricEigen out{Vector(a.rows()), a};
  if (n == 0) return out;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n,
                                         out.values.data());
  if (info != 0) throw NumericalError("symmetric_eigen: dsyevd failed, info = " + std::to_string(info));
  // Column swaps rather than rowwise().reverseInPlace(), which corrupts
  // larger matrices in Eigen 3.4.0.
  for (Eigen::Index i = 0, j = n - 1; i < j; ++i, --j) {
    std::swap(out.values(i), out.values(j));
    out.vectors.col(i).swap(out.vectors.col(j));
  }
  return out;
}

/// Result of whitening a signal covariance against a noise covariance.
///
/// With Cov(Y) = A^t A and D orthogonal, Lambda = (A^{-1} D)^t Cov(X) (A^{-1} D)
/// is diagonal. The data map z -> (A^{-1} D)^t z is applied through the
/// stored factor (triangular solves for a Cholesky factor), never through an
/// explicit inverse. Immutable after construction.
class WhitenedSystem {
 public:
  /// A = L^t with L the lower Cholesky factor of cov_y.
  static WhitenedSystem from_cholesky(const SymMatrix& cov_x, const SymMatrix& cov_y) {
    check_square(cov_x, cov_y);
    Eigen::LLT<Matrix> llt(cov_y);
    if (llt.info() != Eigen::Success)
      throw NumericalError("whiten: noise covariance is not positive definite (Cholesky failed)");
    Matrix lower = llt.matrixL();
    const auto l = lower.triangularView<Eigen::Lower>();
    Matrix half = l.solve(cov_x);                       // L^{-1} Cov(X)
    Matrix m = l.solve(half.transpose()).transpose();   // L^{-1} Cov(X) L^{-t}
    WhitenedSystem out(CholeskyFactor{std::move(lower)});
    out.decompose(std::move(m));
    return out;
  }

  /// A = diag(sqrt(mu)) B^t from an exact spectral decomposition of Cov(Y).
  static WhitenedSystem from_noise_diagonalization(const SymMatrix& cov_x,
                                                   const NoiseDiagonalization& noise) {
    detail::require(cov_x.rows() == noise.basis.rows(), "whiten: dimension mismatch");
    if ((noise.eigenvalues.array() <= 0.0).any())
      throw NumericalError("whiten: noise covariance is not positive definite");
    Vector inv_sqrt = noise.eigenvalues.array().rsqrt();
    Matrix m = inv_sqrt.asDiagonal() * (noise.basis.transpose() * cov_x * noise.basis) *
               inv_sqrt.asDiagonal();
    WhitenedSystem out(SpectralFactor{noise.basis, noise.eigenvalues.array().sqrt()});
    out.decompose(std::move(m));
    return out;
  }

  std::size_t size() const { return static_cast<std::size_t>(lambda_.size()); }
  /// lambda_1 >= ... >= lambda_n >= 0.
  const Vector& eigenvalues() const { return lambda_; }
  /// Orthogonal D, columns ordered like eigenvalues().
  const Matrix& eigenvectors() const { return basis_; }
  bool uses_cholesky() const { return std::holds_alternative<CholeskyFactor>(factor_); }

  /// A with Cov(Y) = A^t A (upper triangular for the Cholesky route).
  Matrix noise_factor() const {
    if (const auto* c = std::get_if<CholeskyFactor>(&factor_)) return c->lower.transpose();
    const auto& s = std::get<SpectralFactor>(factor_);
    return s.sqrt_eigenvalues.asDiagonal() * s.basis.transpose();
  }

  /// (A^{-1} D)^t z.
  Vector transform(const Vector& z) const {
    detail::require(static_cast<std::size_t>(z.size()) == size(), "transform: length mismatch");
    return basis_.transpose() * apply_inverse_factor_transpose(z);
  }

  /// (A^{-1} D)^t M, column by column.
  Matrix transform(const Matrix& m) const {
    detail::require(static_cast<std::size_t>(m.rows()) == size(), "transform: row mismatch");
    return basis_.transpose() * apply_inverse_factor_transpose(m);
  }

 private:
  struct CholeskyFactor {
    Matrix lower;
  };
  struct SpectralFactor {
    Matrix basis;
    Vector sqrt_eigenvalues;
  };

  explicit WhitenedSystem(std::variant<CholeskyFactor, SpectralFactor> factor)
      : factor_(std::move(factor)) {}

  static void check_square(const SymMatrix& cov_x, const SymMatrix& cov_y) {
    detail::require(cov_x.rows() == cov_x.cols() && cov_y.rows() == cov_y.cols() &&
                        cov_x.rows() == cov_y.rows() && cov_x.rows() > 0,
                    "whiten: covariances must be square and of equal order");
  }

  // A^{-t} x
  template <typename Derived>
  Matrix apply_inverse_factor_transpose(const Eigen::MatrixBase<Derived>& x) const {
    if (const auto* c = std::get_if<CholeskyFactor>(&factor_))
      return c->lower.triangularView<Eigen::Lower>().solve(x);
    const auto& s = std::get<SpectralFactor>(factor_);
    return s.sqrt_eigenvalues.cwiseInverse().asDiagonal() * (s.basis.transpose() * x);
  }

  void decompose(Matrix m) {
    m = (0.5 * (m + m.transpose())).eval();
    SymmetricEigen eig = symmetric_eigen(m);
    const double top = eig.values.size() > 0 ? eig.values(0) : 0.0;
    const double tolerance = 1e-8 * std::max(top, 0.0);
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
      if (eig.values(i) < -tolerance)
        throw NumericalError("whiten: whitened signal covariance has eigenvalue " +
                             std::to_string(eig.values(i)) + " below tolerance");
      if (eig.values(i) < 0.0) eig.values(i) = 0.0;
    }
    lambda_ = std::move(eig.values);
    basis_ = std::move(eig.vectors);
  }

  std::variant<CholeskyFactor, SpectralFactor> factor_;
  Vector lambda_;
  Matrix basis_;
};

/// Whitening through the Cholesky factor of cov_y.
inline WhitenedSystem whiten(const SymMatrix& cov_x, const SymMatrix& cov_y) {
  return WhitenedSystem::from_cholesky(cov_x, cov_y);
}

}  // namespace scalefisher
