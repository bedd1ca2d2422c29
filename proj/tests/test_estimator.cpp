#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "scalefisher/estimator.hpp"
#include "scalefisher/fisher.hpp"
#include "scalefisher/model.hpp"

using namespace scalefisher;

namespace {

std::vector<double> expected_squares(const Vector& lambda, double sigma2, double s) {
  std::vector<double> w(static_cast<std::size_t>(lambda.size()));
  for (Eigen::Index i = 0; i < lambda.size(); ++i) w[static_cast<std::size_t>(i)] = sigma2 * s * lambda(i) + 1.0;
  return w;
}

}  // namespace

TEST(PartialFisher, EmptySetIsZero) {
  const Vector lambda = Vector::Constant(4, 3.0);
  EXPECT_EQ(partial_fisher(1.0, std::vector<std::size_t>{}, lambda, 4, 0.5), 0.0);
}

TEST(PartialFisher, ConstantEigenvalues) {
  const double c = 3.0;
  const std::size_t n = 16;
  const Vector lambda = Vector::Constant(n, c);
  const double beta = 0.25;
  const double u = 1.7;
  const std::vector<std::size_t> B = {0, 3, 5, 9, 11};
  const double s = std::pow(16.0, -2 * beta);
  EXPECT_NEAR(partial_fisher(u, B, lambda, n, beta), 5 * c * c * s * s / (2 * (u * c * s + 1) * (u * c * s + 1)),
              1e-14);
  EXPECT_THROW(partial_fisher(0.0, B, lambda, n, beta), DomainError);
}

TEST(PartialFisher, FullSetIsExactInformation) {
  const auto spec = fbm_wn_preset(0.4, 1.3, 1, 200);
  const auto w = whiten_model(spec);
  const auto all = detail::all_indices(spec.n);
  EXPECT_NEAR(partial_fisher(1.69, all, w.eigenvalues(), spec.n, spec.beta) / fisher_exact(spec, w), 1.0, 1e-13);
}

TEST(Split, ConstantMassesGiveCeilingFormula) {
  // c_i = (a / (a + 1))^2 with a = lambda s; choose lambda = s^{-1} so c = 1/4.
  const std::size_t n = 100;
  const double beta = 0.5;
  const double s = 1.0 / n;
  const Vector lambda = Vector::Constant(n, 1.0 / s);
  const auto plan = make_split(lambda, n, beta);
  const double c = 0.25;
  EXPECT_EQ(plan.k_star, static_cast<std::size_t>(std::ceil(std::sqrt(n * c) / c)));
  EXPECT_NEAR(plan.S_n, n * c, 1e-12);
}

TEST(Split, Invariants) {
  for (double H : {0.3, 0.5, 0.6}) {
    const auto spec = fbm_wn_preset(H, 1, 1, 512);
    const auto w = whiten_model(spec);
    const auto plan = make_split(w.eigenvalues(), spec.n, spec.beta);
    EXPECT_EQ(plan.A.size() + plan.complement.size(), spec.n);
    std::vector<std::size_t> all = plan.A;
    all.insert(all.end(), plan.complement.begin(), plan.complement.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < spec.n; ++i) EXPECT_EQ(all[i], i);
    EXPECT_LE(std::sqrt(plan.S_n), plan.S_An);
    EXPECT_LE(plan.S_An, std::sqrt(plan.S_n) + 1.0);
    EXPECT_NEAR(plan.I1_An, plan.S_An / 2, 1e-15);
    EXPECT_NEAR(plan.delta_n, std::min(1.0, std::pow(plan.I1_An, -0.125)), 1e-15);
    EXPECT_GT(plan.delta_n, 0.0);
    EXPECT_LE(plan.delta_n, 1.0);
    // Additivity: I_1^{A} + I_1^{A^c} = I_1^n
    const double rest = partial_fisher(1.0, plan.complement, w.eigenvalues(), spec.n, spec.beta);
    EXPECT_NEAR((plan.I1_An + rest) / plan.I1_n, 1.0, 1e-12);
  }
}

TEST(Split, InsufficientInformation) {
  const std::size_t n = 10;
  const Vector lambda = Vector::Constant(n, 1.0);
  try {
    make_split(lambda, n, 0.5);
    FAIL() << "expected InsufficientInformation";
  } catch (const InsufficientInformation& e) {
    EXPECT_LT(e.information(), 2.0);
  }
}

TEST(Split, RoughSignalAtSmallNIsInsufficient) {
  const auto spec = fbm_wn_preset(0.7, 1, 1, 512);
  const auto w = whiten_model(spec);
  EXPECT_THROW(make_split(w.eigenvalues(), spec.n, spec.beta), InsufficientInformation);
}

TEST(Split, RequiresDescendingEigenvalues) {
  Vector lambda(3);
  lambda << 1.0, 2.0, 3.0;
  EXPECT_THROW(make_split(lambda, 3, 0.5), DomainError);
}

TEST(Split, DeltaOverride) {
  const auto spec = fbm_wn_preset(0.5, 1, 1, 256);
  const auto w = whiten_model(spec);
  EXPECT_EQ(make_split(w.eigenvalues(), spec.n, spec.beta, 0.3).delta_n, 0.3);
  EXPECT_THROW(make_split(w.eigenvalues(), spec.n, spec.beta, 1.5), DomainError);
}

TEST(Oracle, ExpectedSquaresReturnSigmaSquared) {
  const auto spec = fbm_wn_preset(0.6, 1.4, 0.8, 300);
  const auto w = whiten_model(spec);
  const double s = spec.signal_factor();
  const auto squares = expected_squares(w.eigenvalues(), 1.96, s);
  EXPECT_NEAR(oracle_from_squares(squares, w.eigenvalues(), 1.96, s) / 1.96, 1.0, 1e-10);
}

TEST(Oracle, ZeroDataClosedForm) {
  const auto spec = fbm_wn_preset(0.5, 1, 1, 100);
  const auto w = whiten_model(spec);
  const double s = spec.signal_factor();
  const double I = fisher_exact(spec, w);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < w.eigenvalues().size(); ++i) {
    const double a = w.eigenvalues()(i) * s;
    sum += a / ((a + 1) * (a + 1));
  }
  EXPECT_NEAR(oracle_estimate(Vector::Zero(100), w, spec), -sum / (2 * I), 1e-12);
}

TEST(Estimator, UnbiasedForAnyPluginValue) {
  const auto spec = fbm_wn_preset(0.5, 1, 1, 512);
  const auto w = whiten_model(spec);
  const double s = spec.signal_factor();
  const auto plan = make_split(w.eigenvalues(), spec.n, spec.beta);
  for (double sigma2 : {0.5, 1.0, 2.0}) {
    const auto squares = expected_squares(w.eigenvalues(), sigma2, s);
    for (double u : {0.3, 1.0, 3.0}) {
      const double est = detail::weighted_estimate(squares, plan.complement, w.eigenvalues(), u, s);
      EXPECT_NEAR(est / sigma2, 1.0, 1e-10);
    }
    const auto r = estimate_from_squares(squares, w.eigenvalues(), plan, s);
    EXPECT_NEAR(r.preliminary_V / sigma2, 1.0, 1e-10);
    EXPECT_NEAR(r.sigma2_hat / sigma2, 1.0, 1e-10);
  }
}

TEST(Estimator, ClampsPreliminaryValue) {
  const auto spec = fbm_wn_preset(0.5, 1, 1, 512);
  const auto w = whiten_model(spec);
  const double s = spec.signal_factor();
  const auto plan = make_split(w.eigenvalues(), spec.n, spec.beta);
  const auto low = expected_squares(w.eigenvalues(), 1e-6, s);
  const auto r = estimate_from_squares(low, w.eigenvalues(), plan, s);
  EXPECT_LT(r.preliminary_V, plan.delta_n);
  EXPECT_EQ(r.sigma2_tilde, plan.delta_n);
  const auto high = expected_squares(w.eigenvalues(), 1e3, s);
  EXPECT_EQ(estimate_from_squares(high, w.eigenvalues(), plan, s).sigma2_tilde, 1.0 / plan.delta_n);
}

TEST(Estimator, PermutationInvariantWithinComplement) {
  const auto spec = fbm_wn_preset(0.5, 1, 1, 256);
  const auto w = whiten_model(spec);
  const double s = spec.signal_factor();
  const auto plan = make_split(w.eigenvalues(), spec.n, spec.beta);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal;
  std::vector<double> squares(spec.n);
  for (auto& x : squares) x = std::pow(normal(gen), 2) * 1.3;
  auto shuffled = plan.complement;
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const double a = detail::weighted_estimate(squares, plan.complement, w.eigenvalues(), 0.9, s);
  const double b = detail::weighted_estimate(squares, shuffled, w.eigenvalues(), 0.9, s);
  EXPECT_NEAR(a, b, 1e-13 * std::abs(a));
}

TEST(Estimator, RejectsBadData) {
  const auto spec = fbm_wn_preset(0.5, 1, 1, 256);
  EXPECT_THROW(estimate(Vector::Zero(100), spec), DomainError);
  Vector z = Vector::Zero(256);
  z(7) = std::nan("");
  EXPECT_THROW(estimate(z, spec), DomainError);
  EXPECT_THROW(estimate(Vector::Zero(8), fbm_wn_preset(0.5, 1, 1, 8)), InsufficientInformation);
}
