#pragma once

/** @file
 * Estimators of sigma^2 in the whitened model: the oracle with the true
 * sigma^2 in its weights, and the sample-splitting estimator that plugs a
 * truncated preliminary estimate into the same weights.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scalefisher/error.hpp"
#include "scalefisher/fisher.hpp"
#include "scalefisher/linalg.hpp"
#include "scalefisher/model.hpp"
#include "scalefisher/numeric.hpp"

namespace scalefisher {

namespace detail {

inline double partial_fisher_scaled(double u, std::span<const std::size_t> indices, const Vector& lambda,
                                    double s) {
  CompensatedSum sum;
  for (std::size_t i : indices) {
    detail::require(i < static_cast<std::size_t>(lambda.size()), "partial_fisher: index out of range");
    const double a = lambda(static_cast<Eigen::Index>(i)) * s;
    const double d = u * a + 1.0;
    sum += a * a / (d * d);
  }
  return 0.5 * sum.value();
}

}  // namespace detail

/// I_u^B = 1/2 sum_{i in B} lambda_i^2 n^{-4 beta} / (u lambda_i n^{-2 beta} + 1)^2.
/// Indices are 0-based positions in `lambda`, summed in the given order.
inline double partial_fisher(double u, std::span<const std::size_t> indices, const Vector& lambda,
                             std::size_t n, double beta) {
  detail::require(u > 0.0, "partial_fisher: u must be positive");
  return detail::partial_fisher_scaled(u, indices, lambda, std::pow(static_cast<double>(n), -2.0 * beta));
}

/// Partition of the whitened coordinates into a preliminary part A_n (a
/// prefix of the descending eigenvalues) and its complement.
///
/// With c_i = lambda_i^2 n^{-4 beta} (n^{-2 beta} lambda_i + 1)^{-2} in [0, 1)
/// and S_k = c_1 + ... + c_k, k* is the smallest k with S_k >= sqrt(S_n), so
/// sqrt(S_n) <= S_{k*} <= sqrt(S_n) + 1. Note S_k = 2 I_1^{{1..k}}.
struct SplitPlan {
  std::size_t n = 0;
  std::size_t k_star = 0;
  std::vector<std::size_t> A;           ///< 0-based, ascending
  std::vector<std::size_t> complement;  ///< 0-based, ascending
  double S_An = 0.0;                    ///< S_{k*}
  double S_n = 0.0;
  double I1_An = 0.0;                   ///< I_1^{A_n} = S_{k*} / 2
  double I1_n = 0.0;                    ///< I_1^n = S_n / 2
  double delta_n = 1.0;                 ///< min(1, (I_1^{A_n})^{-1/8}) unless overridden
};

/// Minimum S_n below which no split is attempted.
inline constexpr double minimum_split_mass = 4.0;

inline SplitPlan make_split(const Vector& lambda, std::size_t n, double beta,
                            std::optional<double> delta_override = std::nullopt) {
  detail::require(static_cast<std::size_t>(lambda.size()) == n, "make_split: need n eigenvalues");
  for (Eigen::Index i = 1; i < lambda.size(); ++i)
    detail::require(lambda(i) <= lambda(i - 1), "make_split: eigenvalues must be sorted descending");
  const double s = std::pow(static_cast<double>(n), -2.0 * beta);
  std::vector<double> c(n);
  CompensatedSum total;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = lambda(static_cast<Eigen::Index>(i)) * s;
    c[i] = a * a / ((a + 1.0) * (a + 1.0));
    total += c[i];
  }
  SplitPlan plan;
  plan.n = n;
  plan.S_n = total.value();
  plan.I1_n = 0.5 * plan.S_n;
  if (plan.S_n < minimum_split_mass)
    throw InsufficientInformation("make_split: total information S_n = " + std::to_string(plan.S_n) +
                                      " is below " + std::to_string(minimum_split_mass) +
                                      "; the sample cannot be split",
                                  plan.I1_n);
  const double target = std::sqrt(plan.S_n);
  CompensatedSum partial;
  std::size_t k = 0;
  while (k < n && partial.value() < target) partial += c[k++];
  plan.k_star = k;
  plan.S_An = partial.value();
  plan.I1_An = 0.5 * plan.S_An;
  for (std::size_t i = 0; i < n; ++i) (i < k ? plan.A : plan.complement).push_back(i);
  if (delta_override) {
    detail::require(*delta_override > 0.0 && *delta_override <= 1.0, "make_split: delta must lie in (0,1]");
    plan.delta_n = *delta_override;
  } else {
    plan.delta_n = std::min(1.0, std::pow(plan.I1_An, -0.125));
  }
  return plan;
}

namespace detail {

// (2 I_u^B)^{-1} sum_{i in B} lambda_i s (w_i - 1) / (u lambda_i s + 1)^2 where
// w_i is the squared whitened observation (or its expectation).
inline double weighted_estimate(std::span<const double> squares, std::span<const std::size_t> indices,
                                const Vector& lambda, double u, double s) {
  CompensatedSum numerator;
  CompensatedSum information;
  for (std::size_t i : indices) {
    const double a = lambda(static_cast<Eigen::Index>(i)) * s;
    const double d = u * a + 1.0;
    numerator += a * (squares[i] - 1.0) / (d * d);
    information += a * a / (d * d);
  }
  if (!(information.value() > 0.0))
    throw NumericalError("estimator: index set carries no information");
  return numerator.value() / information.value();
}

inline std::vector<double> squares_of(const Vector& z) {
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z(i) * z(i);
  return out;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

inline void require_finite(const Vector& z) {
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (!std::isfinite(z(i)))
      throw DomainError("estimator: observation " + std::to_string(i + 1) + " is not finite");
}

}  // namespace detail

/// Oracle estimate from squared whitened observations w_i:
/// (2I)^{-1} sum lambda_i s (w_i - 1) / (sigma^2 lambda_i s + 1)^2.
inline double oracle_from_squares(std::span<const double> squares, const Vector& lambda, double sigma2,
                                  double signal_factor) {
  detail::require(squares.size() == static_cast<std::size_t>(lambda.size()), "oracle: length mismatch");
  const auto idx = detail::all_indices(squares.size());
  return detail::weighted_estimate(squares, idx, lambda, sigma2, signal_factor);
}

/// Oracle estimator with the true sigma of `spec` (for testing).
inline double oracle_estimate(const Vector& z, const WhitenedSystem& system, const ModelSpec& spec) {
  detail::require(static_cast<std::size_t>(z.size()) == spec.n && system.size() == spec.n,
                  "oracle_estimate: data length must equal n");
  detail::require_finite(z);
  const auto squares = detail::squares_of(system.transform(z));
  return oracle_from_squares(squares, system.eigenvalues(), spec.sigma * spec.sigma, spec.signal_factor());
}

struct EstimateResult {
  double preliminary_V = 0.0;
  double sigma2_tilde = 0.0;
  double sigma2_hat = 0.0;
  double plugin_fisher = 0.0;  ///< I^{A_n^c} at sigma2_tilde
  SplitPlan split;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
};

/// Both estimation steps from squared whitened observations.
inline EstimateResult estimate_from_squares(std::span<const double> squares, const Vector& lambda,
                                            const SplitPlan& plan, double signal_factor) {
  detail::require(squares.size() == plan.n, "estimate: length mismatch");
  EstimateResult r;
  r.preliminary_V = detail::weighted_estimate(squares, plan.A, lambda, 1.0, signal_factor);
  r.sigma2_tilde = std::clamp(r.preliminary_V, plan.delta_n, 1.0 / plan.delta_n);
  if (plan.complement.empty()) throw NumericalError("estimate: the complement of A_n is empty");
  r.sigma2_hat = detail::weighted_estimate(squares, plan.complement, lambda, r.sigma2_tilde, signal_factor);
  r.plugin_fisher = detail::partial_fisher_scaled(r.sigma2_tilde, plan.complement, lambda, signal_factor);
  r.split = plan;
  r.lambda_max = lambda.size() ? lambda(0) : 0.0;
  r.lambda_min = lambda.size() ? lambda(lambda.size() - 1) : 0.0;
  return r;
}

struct EstimateOptions {
  std::optional<double> delta;  ///< replaces (I_1^{A_n})^{-1/8}
  WhitenRoute route = WhitenRoute::automatic;
};

/// Sample-splitting estimator on a precomputed whitening of `spec`.
inline EstimateResult estimate(const Vector& z, const WhitenedSystem& system, const ModelSpec& spec,
                               const SplitPlan& plan) {
  detail::require(static_cast<std::size_t>(z.size()) == spec.n,
                  "estimate: data length " + std::to_string(z.size()) + " differs from n = " +
                      std::to_string(spec.n));
  detail::require(system.size() == spec.n, "estimate: whitened system has wrong order");
  detail::require_finite(z);
  const auto squares = detail::squares_of(system.transform(z));
  return estimate_from_squares(squares, system.eigenvalues(), plan, spec.signal_factor());
}

inline EstimateResult estimate(const Vector& z, const WhitenedSystem& system, const ModelSpec& spec,
                               const EstimateOptions& options = {}) {
  const SplitPlan plan = make_split(system.eigenvalues(), spec.n, spec.beta, options.delta);
  return estimate(z, system, spec, plan);
}

/// Sample-splitting estimator of sigma^2. The value of spec.sigma is not used.
inline EstimateResult estimate(const Vector& z, const ModelSpec& spec, const EstimateOptions& options = {}) {
  detail::require(static_cast<std::size_t>(z.size()) == spec.n,
                  "estimate: data length " + std::to_string(z.size()) + " differs from n = " +
                      std::to_string(spec.n));
  detail::require_finite(z);
  return estimate(z, whiten_model(spec, options.route), spec, options);
}

}  // namespace scalefisher
