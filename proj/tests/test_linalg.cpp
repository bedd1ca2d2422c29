#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "scalefisher/fisher.hpp"
#include "scalefisher/linalg.hpp"
#include "scalefisher/model.hpp"

using namespace scalefisher;

TEST(Toeplitz, Builds) {
  const std::vector<double> g = {3.0, 1.0, 0.5};
  const SymMatrix t = toeplitz(g);
  EXPECT_EQ(t(0, 0), 3.0);
  EXPECT_EQ(t(2, 0), 0.5);
  EXPECT_EQ(t(1, 2), 1.0);
}

TEST(Differences, BackwardDifferenceAndProducts) {
  const Matrix d = backward_difference(4);
  EXPECT_EQ(d(0, 0), 1.0);
  EXPECT_EQ(d(1, 0), -1.0);
  EXPECT_EQ(d(0, 1), 0.0);
  const Matrix ddt = d * d.transpose();
  const Matrix dtd = d.transpose() * d;
  EXPECT_TRUE(diff_cov(4, 1, 1.0, NoiseConvention::delta_deltaT).isApprox(ddt, 1e-15));
  EXPECT_TRUE(diff_cov(4, 1, 1.0, NoiseConvention::deltaT_delta).isApprox(dtd, 1e-15));
  // Powers and tau^2.
  EXPECT_TRUE(diff_cov(6, 2, 3.0, NoiseConvention::delta_deltaT)
                  .isApprox(9.0 * (backward_difference(6) * backward_difference(6).transpose()) *
                                (backward_difference(6) * backward_difference(6).transpose()),
                            1e-14));
  EXPECT_TRUE(diff_cov(5, 0, 2.0, NoiseConvention::delta_deltaT).isApprox(4.0 * Matrix::Identity(5, 5)));
}

TEST(Dct, IsOrthonormal) {
  for (std::size_t n : {1u, 2u, 7u, 64u, 300u}) {
    const DctBasis b = dct_viii(n);
    const Matrix e = b.matrix.transpose() * b.matrix - Matrix::Identity(n, n);
    EXPECT_LE(e.cwiseAbs().maxCoeff(), 1e-12) << "n=" << n;
    EXPECT_TRUE(b.matrix.isApprox(b.matrix.transpose()));
  }
}

TEST(Dct, EigenvaluesMatchDenseEigenvalues) {
  const std::size_t n = 64;
  for (int K : {1, 2}) {
    for (auto conv : {NoiseConvention::deltaT_delta, NoiseConvention::delta_deltaT}) {
      const Vector dense = oracle::dense_eigenvalues_desc(diff_cov(n, K, 1.0, conv));
      Vector dct = dct_diagonalize_noise(n, K, 1.0, conv).eigenvalues;
      std::sort(dct.data(), dct.data() + dct.size(), std::greater<>());
      EXPECT_LE((dense - dct).cwiseAbs().maxCoeff(), 1e-8) << "K=" << K;
    }
  }
}

TEST(Dct, ReconstructsNoiseCovariance) {
  for (auto conv : {NoiseConvention::deltaT_delta, NoiseConvention::delta_deltaT}) {
    for (int K : {1, 2, 3}) {
      const std::size_t n = 40;
      const auto d = dct_diagonalize_noise(n, K, 0.7, conv);
      const Matrix rebuilt = d.basis * d.eigenvalues.asDiagonal() * d.basis.transpose();
      const Matrix want = diff_cov(n, K, 0.7, conv);
      EXPECT_LE((rebuilt - want).cwiseAbs().maxCoeff(), 1e-10 * want.cwiseAbs().maxCoeff()) << "K=" << K;
    }
  }
}

TEST(Dct, SymbolFourSinSquaredIsFirstDifferenceProduct) {
  // C diag(4 sin^2(u/2)) C is the product whose (1,1) entry is 1.
  const std::size_t n = 20;
  const SymMatrix d = dn_matrix([](double u) { return 4.0 * std::sin(u / 2) * std::sin(u / 2); }, n);
  const SymMatrix want = diff_cov(n, 1, 1.0, NoiseConvention::delta_deltaT);
  EXPECT_LE((d - want).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(d(0, 0), 1.0, 1e-12);
}

TEST(SymmetricEigen, MatchesEigenSolver) {
  const auto spec = fbm_wn_preset(0.3, 1, 1, 150);
  const SymMatrix a = covariance_z(spec);
  const SymmetricEigen e = symmetric_eigen(a);
  const Vector ref = oracle::dense_eigenvalues_desc(a);
  EXPECT_LE((e.values - ref).cwiseAbs().maxCoeff(), 1e-10 * ref(0));
  const Matrix rebuilt = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  EXPECT_LE((rebuilt - a).cwiseAbs().maxCoeff(), 1e-10 * ref(0));
  for (Eigen::Index i = 1; i < e.values.size(); ++i) EXPECT_LE(e.values(i), e.values(i - 1));
}

namespace {

void expect_whitened_diagonal(const ModelSpec& spec, WhitenRoute route) {
  const WhitenedSystem w = whiten_model(spec, route);
  // (A^{-1} D)^t Cov(Z) (A^{-1} D) = diag(sigma^2 s lambda_i + 1)
  const Matrix t = w.transform(Matrix(Matrix::Identity(spec.n, spec.n)));  // (A^{-1} D)^t
  const Matrix cov = t * covariance_z(spec) * t.transpose();
  Vector want = (spec.sigma * spec.sigma * spec.signal_factor() * w.eigenvalues()).array() + 1.0;
  Matrix diff = cov;
  diff.diagonal() -= want;
  EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-9 * want.maxCoeff()) << spec.preset;
  // The noise alone whitens to the identity.
  const Matrix noise = t * covariance_y(spec) * t.transpose();
  EXPECT_LE((noise - Matrix::Identity(spec.n, spec.n)).cwiseAbs().maxCoeff(), 1e-9);
}

}  // namespace

TEST(Whitening, DiagonalizesCovarianceCholeskyRoute) {
  expect_whitened_diagonal(fbm_wn_preset(0.5, 1, 1, 128), WhitenRoute::cholesky);
  expect_whitened_diagonal(fbm_wn_preset(0.25, 1.3, 0.8, 128), WhitenRoute::cholesky);
}

TEST(Whitening, DiagonalizesCovarianceDctRoute) {
  expect_whitened_diagonal(fbm_wn_preset(0.75, 1, 1, 128), WhitenRoute::noise_dct);
  auto spec = fbm_wn_preset(0.4, 1, 1, 128);
  spec.convention = NoiseConvention::deltaT_delta;
  expect_whitened_diagonal(spec, WhitenRoute::noise_dct);
  expect_whitened_diagonal(integrated_fbm_preset(0.1, 1, 1, 64), WhitenRoute::noise_dct);
}

TEST(Whitening, RoutesGiveSameEigenvalues) {
  const auto spec = fbm_wn_preset(0.6, 1, 1, 100);
  const auto a = whiten_model(spec, WhitenRoute::cholesky).eigenvalues();
  const auto b = whiten_model(spec, WhitenRoute::noise_dct).eigenvalues();
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9 * a(0));
  EXPECT_TRUE(whiten_model(spec, WhitenRoute::automatic).uses_cholesky());
  EXPECT_FALSE(whiten_model(integrated_fbm_preset(0.1, 1, 1, 20)).uses_cholesky());
}

TEST(Whitening, NoiseFactorSquaresToNoiseCovariance) {
  const auto spec = fbm_wn_preset(0.6, 1, 1, 30);
  for (auto route : {WhitenRoute::cholesky, WhitenRoute::noise_dct}) {
    const Matrix a = whiten_model(spec, route).noise_factor();
    EXPECT_LE((a.transpose() * a - covariance_y(spec)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Whitening, RejectsSingularNoise) {
  const Matrix x = Matrix::Identity(3, 3);
  EXPECT_THROW(whiten(x, Matrix::Zero(3, 3)), NumericalError);
  EXPECT_THROW(whiten(x, Matrix::Identity(4, 4)), DomainError);
}
