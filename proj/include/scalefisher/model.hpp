#pragma once

/** @file
 * Model specifications for Z = sigma n^{-beta} X + Y: autocovariance kernels
 * of the signal X, the slowly varying factor of its power-law tail, the
 * difference-noise Y, and the named presets.
 */

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "scalefisher/error.hpp"
#include "scalefisher/linalg.hpp"
#include "scalefisher/numeric.hpp"
#include "scalefisher/quadrature.hpp"

namespace scalefisher {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Autocovariance at lag k of unit-variance fractional Gaussian noise,
/// gamma_k = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2.
inline double gamma_fgn(double hurst, std::size_t lag) {
  detail::require(hurst > 0.0 && hurst < 1.0, "gamma_fgn: Hurst index must lie in (0,1)");
  const double h2 = 2.0 * hurst;
  if (lag == 0) return 1.0;
  const double k = static_cast<double>(lag);
  if (lag < 16) return 0.5 * (std::pow(k + 1.0, h2) - 2.0 * std::pow(k, h2) + std::pow(k - 1.0, h2));
  // Large lags: the second difference cancels to O(k^{2H-2}); use the even
  // part of the binomial series of (1 +- 1/k)^{2H} instead.
  const double x2 = 1.0 / (k * k);
  double binom = 1.0;  // C(2H, j)
  double power = 1.0;  // k^{-j}
  double sum = 0.0;
  for (int j = 1; j <= 80; ++j) {
    binom *= (h2 - (j - 1)) / j;
    if (j % 2 == 1) continue;
    power *= x2;
    const double term = binom * power;
    sum += term;
    if (term == 0.0 || std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return std::pow(k, h2) * sum;
}

namespace detail {

// Autocorrelation of the weight 1_[0,1] - 1_[-1,0] that turns integrated fBM
// into its second difference; piecewise linear on [-2, 2].
inline double box_difference_autocorrelation(double u) {
  const double a = std::abs(u);
  if (a <= 1.0) return 2.0 - 3.0 * a;
  if (a <= 2.0) return a - 2.0;
  return 0.0;
}

// Integral of g over [m, m+1] when g may have an algebraic singularity at
// t = 0 or t = 1 (the kinks of the fBM kernel on the unit grid).
template <typename F>
double unit_segment_integral(F g, double m) {
  if (m == 0.0 || m == 1.0 || m == -1.0) return quadrature::tanh_sinh(g, m, m + 1.0);
  return quadrature::gauss_legendre<20>(g, m, m + 1.0);
}

}  // namespace detail

/// Stationary autocovariance Cov(X_2, X_{2+k}) of the second difference of
/// integrated fBM, X_i = int_{i-1}^{i} B - int_{i-2}^{i-1} B.
///
/// The double integral of the fBM covariance over the two unit squares
/// reduces exactly to a one-dimensional integral against the autocorrelation
/// r of the difference weight, gamma_k = -1/2 int |k + u|^{2H} r(u) du, which
/// is evaluated on the unit segments where r is linear.
inline double gamma_integrated_fbm(double hurst, std::size_t lag) {
  detail::require(hurst > 0.0 && hurst < 0.25,
                  "gamma_integrated_fbm: Hurst index must lie in (0,1/4)");
  const double h2 = 2.0 * hurst;
  const double k = static_cast<double>(lag);
  double total = 0.0;
  // v = k + u ranges over [k-2, k+2]; split at integers so that the
  // singularity of |v|^{2H} at v = 0 sits on a segment end.
  for (int s = -2; s < 2; ++s) {
    const double m = k + s;
    auto g = [&](double v) {
      return std::pow(std::abs(v), h2) * detail::box_difference_autocorrelation(v - k);
    };
    total += detail::unit_segment_integral(g, m);
  }
  return -0.5 * total;
}

/// Cov(X_1, X_j), j >= 1, for the boundary term X_1 = int_0^1 B of the
/// integrated fBM preset (X_1 is not part of the stationary sequence).
inline double integrated_fbm_boundary_covariance(double hurst, std::size_t j) {
  detail::require(hurst > 0.0 && hurst < 0.25,
                  "integrated_fbm_boundary_covariance: Hurst index must lie in (0,1/4)");
  detail::require(j >= 1, "integrated_fbm_boundary_covariance: index starts at 1");
  const double h2 = 2.0 * hurst;
  // int_0^1 |t - s|^{2H} ds
  auto inner = [&](double t) {
    if (t <= 1.0) return (std::pow(t, h2 + 1.0) + std::pow(1.0 - t, h2 + 1.0)) / (h2 + 1.0);
    return (std::pow(t, h2 + 1.0) - std::pow(t - 1.0, h2 + 1.0)) / (h2 + 1.0);
  };
  // Cov = 1/2 int_0^1 ds int w_j(t) (s^{2H} + t^{2H} - |t-s|^{2H}) dt.
  auto piece = [&](double m, double weight) {
    auto g = [&](double t) { return std::pow(t, h2) - inner(t); };
    return weight * (1.0 / (h2 + 1.0) + detail::unit_segment_integral(g, m));
  };
  const double jj = static_cast<double>(j);
  if (j == 1) return 0.5 * piece(0.0, 1.0);
  return 0.5 * (piece(jj - 1.0, 1.0) + piece(jj - 2.0, -1.0));
}

// ---------------------------------------------------------------------------
// Specifications
// ---------------------------------------------------------------------------

/// Slowly varying factor l of the autocovariance tail: c or c |log x|^rho.
struct SlowlyVaryingSpec {
  enum class Kind { constant, log_power };
  Kind kind = Kind::constant;
  double c = 1.0;
  double rho = 0.0;

  static SlowlyVaryingSpec constant(double c) {
    detail::require(c >= 0.0 && std::isfinite(c), "slowly varying: constant must be nonnegative");
    return {Kind::constant, c, 0.0};
  }
  static SlowlyVaryingSpec log_power(double c, double rho) {
    detail::require(c > 0.0 && std::isfinite(c), "slowly varying: c must be positive");
    detail::require(rho > -0.5, "slowly varying: rho must exceed -1/2");
    return {Kind::log_power, c, rho};
  }

  double operator()(double x) const {
    if (kind == Kind::constant) return c;
    return c * std::pow(std::abs(std::log(x)), rho);
  }
  /// Exponent of the logarithm (0 for the constant kind).
  double log_exponent() const { return kind == Kind::constant ? 0.0 : rho; }
};

/// Power-law continuation sign(-alpha) k^{-2 alpha - 1} l(k) of an
/// autocovariance sequence.
struct PowerLawTail {
  double alpha = 0.0;
  SlowlyVaryingSpec ell;

  double operator()(double k) const {
    return sign(-alpha) * ell(k) * std::pow(k, -2.0 * alpha - 1.0);
  }
};

/// Autocovariance of the signal X. `scale` multiplies every gamma_k.
struct AutocovarianceSpec {
  struct Fgn {
    double hurst;
  };
  struct IntegratedFbm {
    double hurst;
  };
  struct UserSequence {
    std::vector<double> values;  ///< gamma_0, gamma_1, ...
  };

  std::variant<Fgn, IntegratedFbm, UserSequence> kind = Fgn{0.5};
  double scale = 1.0;

  static AutocovarianceSpec fgn(double hurst, double scale = 1.0) {
    detail::require(hurst > 0.0 && hurst < 1.0, "fgn: Hurst index must lie in (0,1)");
    return {Fgn{hurst}, scale};
  }
  static AutocovarianceSpec integrated_fbm(double hurst) {
    detail::require(hurst > 0.0 && hurst < 0.25, "integrated_fbm: Hurst index must lie in (0,1/4)");
    return {IntegratedFbm{hurst}, 1.0};
  }
  static AutocovarianceSpec user_sequence(std::vector<double> values) {
    detail::require(values.size() >= 2, "user_sequence: need at least gamma_0 and gamma_1");
    for (double v : values)
      detail::require(std::isfinite(v), "user_sequence: autocovariances must be finite");
    detail::require(values.front() > 0.0, "user_sequence: gamma_0 must be positive");
    return {UserSequence{std::move(values)}, 1.0};
  }

  bool is_fgn() const { return std::holds_alternative<Fgn>(kind); }
  bool is_integrated_fbm() const { return std::holds_alternative<IntegratedFbm>(kind); }
  bool is_user_sequence() const { return std::holds_alternative<UserSequence>(kind); }
  double hurst() const {
    if (const auto* f = std::get_if<Fgn>(&kind)) return f->hurst;
    if (const auto* g = std::get_if<IntegratedFbm>(&kind)) return g->hurst;
    throw DomainError("autocovariance: user sequences carry no Hurst index");
  }

  /// gamma_k. User sequences continue past their last entry with `tail`.
  double at(std::size_t lag, const PowerLawTail& tail) const {
    if (const auto* f = std::get_if<Fgn>(&kind)) return scale * gamma_fgn(f->hurst, lag);
    if (const auto* g = std::get_if<IntegratedFbm>(&kind))
      return scale * gamma_integrated_fbm(g->hurst, lag);
    const auto& values = std::get<UserSequence>(kind).values;
    if (lag < values.size()) return scale * values[lag];
    return scale * tail(static_cast<double>(lag));
  }
};

/// One instance of Z_i = sigma n^{-beta} X_i + Y_i, i = 1..n.
struct ModelSpec {
  std::size_t n = 1;
  double beta = 0.5;
  double sigma = 1.0;
  double tau = 1.0;
  int K = 0;
  NoiseConvention convention = NoiseConvention::delta_deltaT;
  AutocovarianceSpec x_cov;
  SlowlyVaryingSpec ell;
  double alpha = 0.0;
  std::string preset = "user";

  /// 1 / (K - alpha).
  double diamond() const { return 1.0 / (static_cast<double>(K) - alpha); }
  PowerLawTail tail() const { return {alpha, ell}; }
  double gamma(std::size_t lag) const { return x_cov.at(lag, tail()); }
  /// n^{-2 beta}.
  double signal_factor() const { return std::pow(static_cast<double>(n), -2.0 * beta); }

  /// Throws DomainError unless every parameter lies in its admissible range.
  /// `allow_zero_sigma` admits sigma = 0 (noise-only sampling).
  void validate(bool allow_zero_sigma = false) const {
    detail::require(n >= 1, "model: n must be positive");
    detail::require(beta > 0.0 && std::isfinite(beta), "model: beta must be positive");
    detail::require(allow_zero_sigma ? sigma >= 0.0 : sigma > 0.0, "model: sigma must be positive");
    detail::require(std::isfinite(sigma), "model: sigma must be finite");
    detail::require(tau > 0.0 && std::isfinite(tau), "model: tau must be positive");
    detail::require(K >= 0, "model: K must be nonnegative");
    detail::require(alpha > -0.5 && alpha < 0.5, "model: alpha must lie in (-1/2,1/2)");
    detail::require(static_cast<double>(K) > alpha, "model: K - alpha must be positive");
    detail::require(x_cov.scale > 0.0 && std::isfinite(x_cov.scale), "model: scale must be positive");
  }
};

/// Autocovariances gamma_0 .. gamma_{count-1} of the signal.
inline std::vector<double> autocovariances(const ModelSpec& spec, std::size_t count) {
  std::vector<double> out(count);
  const PowerLawTail tail = spec.tail();
  for (std::size_t k = 0; k < count; ++k) out[k] = spec.x_cov.at(k, tail);
  return out;
}

/// Cov(X) of the first n observations. Stationary kinds give T_n(gamma); the
/// integrated-fBM preset replaces the first row and column by the exact
/// covariances of the boundary variable X_1.
inline SymMatrix covariance_x(const ModelSpec& spec) {
  SymMatrix cov = toeplitz(autocovariances(spec, spec.n), spec.n);
  if (spec.x_cov.is_integrated_fbm()) {
    const double h = spec.x_cov.hurst();
    for (std::size_t j = 0; j < spec.n; ++j) {
      const double c = spec.x_cov.scale * integrated_fbm_boundary_covariance(h, j + 1);
      cov(0, j) = c;
      cov(j, 0) = c;
    }
  }
  return cov;
}

/// Cov(Y) = tau^2 (Delta Delta^t)^K or tau^2 (Delta^t Delta)^K.
inline SymMatrix covariance_y(const ModelSpec& spec) {
  return diff_cov(spec.n, spec.K, spec.tau, spec.convention);
}

/// Cov(Z) = sigma^2 n^{-2 beta} Cov(X) + Cov(Y).
inline SymMatrix covariance_z(const ModelSpec& spec) {
  return spec.sigma * spec.sigma * spec.signal_factor() * covariance_x(spec) + covariance_y(spec);
}

/// sum_{k in Z} gamma_k^2 with the truncation error controlled by the
/// power-law tail bound.
struct SquaredSum {
  double value = 0.0;
  std::size_t truncation = 0;  ///< last lag summed exactly
  double tail = 0.0;           ///< analytic tail added past the truncation
  bool converged = false;      ///< corrected totals at m/2 and m agree to rel_tol
};

/// Requires alpha > -1/4 (square-summable tail). The truncation doubles
/// until two successive tail-corrected totals agree to rel_tol; slow tails
/// (H near 3/4) rely on the correction rather than on a small remainder.
inline SquaredSum sum_squared_autocovariance(const ModelSpec& spec, double rel_tol = 1e-6,
                                             std::size_t max_lag = std::size_t{1} << 27) {
  detail::require(spec.alpha > -0.25, "sum of squared autocovariances diverges for alpha <= -1/4");
  const PowerLawTail tail = spec.tail();
  const double decay = 4.0 * spec.alpha + 2.0;  // gamma_k^2 ~ k^{-decay}
  auto tail_estimate = [&](std::size_t m) {
    const double x = static_cast<double>(m) + 0.5;
    const double l = spec.x_cov.scale * spec.ell(static_cast<double>(m));
    return 2.0 * l * l * std::pow(x, 1.0 - decay) / (decay - 1.0);
  };
  CompensatedSum partial;
  const double g0 = spec.gamma(0);
  partial += g0 * g0;
  std::size_t done = 0;
  std::size_t target = 1024;
  double previous = NAN;
  SquaredSum out;
  while (true) {
    for (std::size_t k = done + 1; k <= target; ++k) {
      const double g = spec.x_cov.at(k, tail);
      partial += 2.0 * g * g;
    }
    done = target;
    const double t = tail_estimate(done);
    const double total = partial.value() + t;
    const bool agree = std::abs(total - previous) < rel_tol * total;
    if (agree || target >= max_lag) {
      out.truncation = done;
      out.tail = t;
      out.converged = agree;
      out.value = total;
      return out;
    }
    previous = total;
    target = std::min(2 * target, max_lag);
  }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// fBM observed on i/n under white noise, in increments: X = unit fGn(H),
/// Y_i = tau (eps_i - eps_{i-1}), so K = 1, beta = H, alpha = 1/2 - H and
/// l = H |2H - 1|.
inline ModelSpec fbm_wn_preset(double hurst, double sigma, double tau, std::size_t n) {
  detail::require(hurst > 0.0 && hurst < 1.0, "fbm-wn: H must lie in (0,1)");
  ModelSpec spec;
  spec.preset = "fbm-wn";
  spec.n = n;
  spec.beta = hurst;
  spec.sigma = sigma;
  spec.tau = tau;
  spec.K = 1;
  spec.convention = NoiseConvention::delta_deltaT;
  spec.x_cov = AutocovarianceSpec::fgn(hurst);
  spec.alpha = 0.5 - hurst;
  spec.ell = SlowlyVaryingSpec::constant(hurst * std::abs(2.0 * hurst - 1.0));
  spec.validate();
  return spec;
}

/// Long-memory signal under noise growing like n^beta, rescaled to
/// Z / n^beta = sigma n^{-beta} X + tau eps. X is fGn(H), H in (1/2, 1), so
/// K = 0 and alpha = 1/2 - H. With `normalize`, X is scaled to
/// sum gamma_k^2 = 1 (only possible for H < 3/4).
inline ModelSpec large_error_preset(double hurst, double sigma, double tau, std::size_t n,
                                    double beta, bool normalize) {
  detail::require(hurst > 0.5 && hurst < 1.0, "large-error: H must lie in (1/2,1)");
  detail::require(beta > 0.0 && beta < hurst - 0.5, "large-error: beta must lie in (0, H - 1/2)");
  detail::require(!normalize || hurst < 0.75,
                  "large-error: sum of squared autocovariances diverges for H >= 3/4");
  ModelSpec spec;
  spec.preset = "large-error";
  spec.n = n;
  spec.beta = beta;
  spec.sigma = sigma;
  spec.tau = tau;
  spec.K = 0;
  spec.convention = NoiseConvention::delta_deltaT;
  spec.x_cov = AutocovarianceSpec::fgn(hurst);
  spec.alpha = 0.5 - hurst;
  spec.ell = SlowlyVaryingSpec::constant(hurst * (2.0 * hurst - 1.0));
  if (normalize) {
    const double total = sum_squared_autocovariance(spec).value;
    const double s = 1.0 / std::sqrt(total);
    spec.x_cov.scale = s;
  }
  spec.validate();
  return spec;
}

/// Default noise exponent of the large-error preset: halfway into (0, H - 1/2).
inline double large_error_default_beta(double hurst) { return 0.5 * (hurst - 0.5); }

/// Integrated fBM under white noise after applying Delta Delta^t: X is the
/// second difference of int B (with boundary term X_1), K = 2 in the
/// Delta Delta^t convention, beta = 1 + H, alpha = 1/2 - H, l = H (1 - 2H).
inline ModelSpec integrated_fbm_preset(double hurst, double sigma, double tau, std::size_t n) {
  detail::require(hurst > 0.0 && hurst < 0.25, "integrated-fbm: H must lie in (0,1/4)");
  ModelSpec spec;
  spec.preset = "integrated-fbm";
  spec.n = n;
  spec.beta = 1.0 + hurst;
  spec.sigma = sigma;
  spec.tau = tau;
  spec.K = 2;
  spec.convention = NoiseConvention::delta_deltaT;
  spec.x_cov = AutocovarianceSpec::integrated_fbm(hurst);
  spec.alpha = 0.5 - hurst;
  spec.ell = SlowlyVaryingSpec::constant(hurst * (1.0 - 2.0 * hurst));
  spec.validate();
  return spec;
}

}  // namespace scalefisher
