#pragma once

/** @file
 * Fisher information for sigma^2: the exact finite-n eigenvalue sum, the
 * spectral integral approximation, and the closed-form asymptotics with
 * the scaling regime they belong to.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "scalefisher/error.hpp"
#include "scalefisher/linalg.hpp"
#include "scalefisher/model.hpp"
#include "scalefisher/numeric.hpp"
#include "scalefisher/quadrature.hpp"
#include "scalefisher/spectral.hpp"

namespace scalefisher {

// ---------------------------------------------------------------------------
// Whitening of a model
// ---------------------------------------------------------------------------

/// Factor A of Cov(Y) = A^t A used to whiten a model. `automatic` takes the
/// Cholesky factor for K <= 1 and the exact DCT factor for K >= 2, where
/// Cov(Y) has condition number of order n^{2K}.
enum class WhitenRoute { automatic, cholesky, noise_dct };

inline WhitenedSystem whiten_model(const ModelSpec& spec, WhitenRoute route = WhitenRoute::automatic) {
  spec.validate(true);
  if (route == WhitenRoute::automatic) route = spec.K <= 1 ? WhitenRoute::cholesky : WhitenRoute::noise_dct;
  const SymMatrix cov_x = covariance_x(spec);
  if (route == WhitenRoute::cholesky) return WhitenedSystem::from_cholesky(cov_x, covariance_y(spec));
  return WhitenedSystem::from_noise_diagonalization(
      cov_x, dct_diagonalize_noise(spec.n, spec.K, spec.tau, spec.convention));
}

// ---------------------------------------------------------------------------
// Exact information
// ---------------------------------------------------------------------------

/// 1/2 sum_i (lambda_i s)^2 / (sigma2 lambda_i s + 1)^2 with s = n^{-2 beta},
/// summed in index order.
inline double fisher_from_eigenvalues(const Vector& lambda, double sigma2, double signal_factor) {
  CompensatedSum sum;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double a = lambda(i) * signal_factor;
    const double d = sigma2 * a + 1.0;
    sum += a * a / (d * d);
  }
  return 0.5 * sum.value();
}

/// 1/2 tr([n^{-2 beta} Cov(X) Cov(Z)^{-1}]^2) from dense matrices.
inline double fisher_trace(const ModelSpec& spec) {
  spec.validate();
  const SymMatrix cov_z = covariance_z(spec);
  Eigen::LLT<Matrix> llt(cov_z);
  if (llt.info() != Eigen::Success) throw NumericalError("fisher_trace: Cov(Z) is not positive definite");
  const Matrix b = llt.solve(spec.signal_factor() * covariance_x(spec));  // Cov(Z)^{-1} s Cov(X)
  return 0.5 * (b.array() * b.transpose().array()).sum();
}

struct ExactOptions {
  WhitenRoute route = WhitenRoute::automatic;
  /// Compare against fisher_trace (only for n <= 256) and throw
  /// NumericalError if the relative difference exceeds 1e-6.
  bool verify_trace = false;
};

inline double fisher_exact(const ModelSpec& spec, const WhitenedSystem& system) {
  detail::require(system.size() == spec.n, "fisher_exact: whitened system has wrong order");
  return fisher_from_eigenvalues(system.eigenvalues(), spec.sigma * spec.sigma, spec.signal_factor());
}

inline double fisher_exact(const ModelSpec& spec, const ExactOptions& options = {}) {
  spec.validate();
  const double value = fisher_exact(spec, whiten_model(spec, options.route));
  if (options.verify_trace && spec.n <= 256) {
    const double trace = fisher_trace(spec);
    if (relative_difference(value, trace) > 1e-6)
      throw NumericalError("fisher_exact: eigenvalue sum " + std::to_string(value) +
                           " disagrees with trace form " + std::to_string(trace));
  }
  return value;
}

// ---------------------------------------------------------------------------
// Spectral integral
// ---------------------------------------------------------------------------

/// Noise spectrum used inside the integral. `lower` and `upper` replace
/// 4^K sin^{2K}(lambda/2) by 4^{-K} lambda^{2K} and lambda^{2K}, which bound
/// h_n from below and above and hence bracket the integral.
enum class NoiseBound { exact, lower, upper };

struct IntegralOptions {
  double rel_tol = 1e-6;
  NoiseBound noise = NoiseBound::exact;
  SpectralDensity::Method method = SpectralDensity::Method::automatic;
  std::size_t k_max = 100000;
};

struct IntegralDiagnostics {
  double value = 0.0;
  double error = 0.0;      ///< summed local quadrature error estimates
  double crossover = 0.0;  ///< lambda* (pi if the signal dominates everywhere)
  std::size_t panels = 0;
};

namespace detail {

inline double noise_spectrum(int K, double tau, double lambda, NoiseBound bound) {
  switch (bound) {
    case NoiseBound::lower:
      return tau * tau * std::pow(0.25, K) * std::pow(lambda, 2 * K);
    case NoiseBound::upper:
      return tau * tau * std::pow(lambda, 2 * K);
    case NoiseBound::exact:
      break;
  }
  return noise_spectral_density(K, tau, lambda);
}

}  // namespace detail

/// (n^{1 - 4 beta} / 2 pi) int_0^pi f^2 / h_n^2, written as
/// (n / 2 pi) int_0^pi (sigma^2 + n^{2 beta} N / f)^{-2} to stay finite where
/// f or N underflow. Panels double in width from lambda* 2^{-30} up to pi;
/// each is integrated adaptively to the relative tolerance.
inline IntegralDiagnostics fisher_integral_diagnostics(const ModelSpec& spec,
                                                       const IntegralOptions& options = {}) {
  spec.validate();
  detail::require(options.rel_tol > 0.0, "fisher_integral: tolerance must be positive");
  const SpectralDensity f(spec, options.method, options.k_max);
  const double sigma2 = spec.sigma * spec.sigma;
  const double s = spec.signal_factor();
  const double inflate = std::pow(static_cast<double>(spec.n), 2.0 * spec.beta);
  auto noise = [&](double lambda) { return detail::noise_spectrum(spec.K, spec.tau, lambda, options.noise); };
  auto integrand = [&](double lambda) {
    if (lambda <= 0.0) return 0.0;
    const double fl = f(lambda);
    const double nl = noise(lambda);
    if (fl <= 0.0) return nl > 0.0 ? 0.0 : 1.0 / (sigma2 * sigma2);
    const double d = sigma2 + inflate * nl / fl;
    return 1.0 / (d * d);
  };
  // Crossover: highest frequency below which the signal spectrum dominates.
  auto signal_dominates = [&](double lambda) { return sigma2 * s * f(lambda) >= noise(lambda); };
  IntegralDiagnostics out;
  double crossover = pi * std::ldexp(1.0, -60);
  if (signal_dominates(pi)) {
    crossover = pi;
  } else {
    for (int j = 1; j <= 200; ++j) {
      const double lo = pi * std::ldexp(1.0, -j);
      if (signal_dominates(lo)) {
        double a = lo;
        double b = 2.0 * lo;
        for (int it = 0; it < 60; ++it) {
          const double mid = std::sqrt(a * b);
          (signal_dominates(mid) ? a : b) = mid;
        }
        crossover = a;
        break;
      }
    }
  }
  out.crossover = crossover;
  std::vector<double> edges{0.0};
  for (double x = crossover * std::ldexp(1.0, -30); x < pi; x *= 2.0) edges.push_back(x);
  edges.push_back(pi);
  CompensatedSum value;
  CompensatedSum error;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const auto e = quadrature::adaptive_gauss_kronrod(integrand, edges[p], edges[p + 1], options.rel_tol);
    value += e.value;
    error += e.error;
  }
  out.panels = edges.size() - 1;
  const double scale = static_cast<double>(spec.n) / (2.0 * pi);
  out.value = scale * value.value();
  out.error = scale * error.value();
  if (!std::isfinite(out.value) || out.error > 10.0 * options.rel_tol * std::abs(out.value))
    throw NumericalError("fisher_integral: quadrature did not converge (value " +
                         std::to_string(out.value) + ", error estimate " + std::to_string(out.error) +
                         ", crossover " + std::to_string(crossover) + ", " +
                         std::to_string(out.panels) + " panels)");
  return out;
}

inline double fisher_integral(const ModelSpec& spec, const IntegralOptions& options = {}) {
  return fisher_integral_diagnostics(spec, options).value;
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// c_H = H sin^{1/(2H+1)}(pi H) Gamma(2H+1)^{1/(2H+1)} / ((2H+1)^2 sin(pi/(2H+1))).
inline double closed_form_constant_cH(double hurst) {
  detail::require(hurst > 0.0 && hurst < 1.0, "c_H: H must lie in (0,1)");
  const double e = 1.0 / (2.0 * hurst + 1.0);
  return hurst * std::pow(std::sin(pi * hurst), e) * std::pow(std::tgamma(2.0 * hurst + 1.0), e) /
         ((2.0 * hurst + 1.0) * (2.0 * hurst + 1.0) * std::sin(pi * e));
}

/// C_alpha = 2 sign(-alpha) Gamma(-2 alpha) cos(pi alpha), the constant of
/// f(lambda) ~ C_alpha l(1/lambda) lambda^{2 alpha} at the origin.
inline double spectral_constant(double alpha) {
  detail::require(alpha != 0.0 && alpha > -0.5 && alpha < 0.5,
                  "spectral constant: alpha must lie in (-1/2,1/2) without 0");
  return 2.0 * sign(-alpha) * std::tgamma(-2.0 * alpha) * std::cos(pi * alpha);
}

/// C(diamond, alpha) = (2 - d) d / (8 sin(d pi / 2)) C_alpha^{d/2}. The
/// prefactor is evaluated as d / (4 pi) * t / sin t with t = (2 - d) pi / 2,
/// which is continuous through d = 2 (value 1 / (2 pi)).
inline double closed_form_constant_C(double diamond, double alpha) {
  detail::require(diamond > 0.0 && diamond < 4.0, "C(diamond, alpha): diamond must lie in (0,4)");
  if (alpha == 0.0) throw DomainError("C(diamond, alpha): diverges at alpha = 0");
  const double t = 0.5 * (2.0 - diamond) * pi;
  const double t_over_sin = std::abs(t) < 1e-8 ? 1.0 + t * t / 6.0 : t / std::sin(t);
  return diamond / (4.0 * pi) * t_over_sin * std::pow(spectral_constant(alpha), 0.5 * diamond);
}

enum class Regime { subcritical, critical, supercritical };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::subcritical: return "subcritical";
    case Regime::critical: return "critical";
    case Regime::supercritical: return "supercritical";
  }
  return "?";
}

/// K - alpha within 1e-12 of 1/4 counts as the critical case diamond = 4.
inline Regime classify_regime(int K, double alpha) {
  const double gap = static_cast<double>(K) - alpha - 0.25;
  if (std::abs(gap) <= 1e-12) return Regime::critical;
  return gap > 0.0 ? Regime::subcritical : Regime::supercritical;
}

/// Exponent r in the leading n^r of the information (the critical case
/// carries an extra power of log n).
inline double rate_exponent(const ModelSpec& spec) {
  return classify_regime(spec.K, spec.alpha) == Regime::subcritical ? 1.0 - spec.diamond() * spec.beta
                                                                    : 1.0 - 4.0 * spec.beta;
}

/// n^{1 - d beta} l(n^{d beta})^{d/2} sigma^{d-4} tau^{-d} C(d, alpha), d < 4.
inline double closed_form_subcritical(const ModelSpec& spec) {
  const double d = spec.diamond();
  const double n = static_cast<double>(spec.n);
  const double l = spec.x_cov.scale * spec.ell(std::pow(n, d * spec.beta));
  return std::pow(n, 1.0 - d * spec.beta) * std::pow(l, 0.5 * d) * std::pow(spec.sigma, d - 4.0) *
         std::pow(spec.tau, -d) * closed_form_constant_C(d, spec.alpha);
}

/// True when the model is fBM under white noise in increments: fGn kernel,
/// K = 1 and alpha = 1/2 - H, so that diamond = 2 / (2H + 1).
inline bool is_fbm_wn_shape(const ModelSpec& spec) {
  return spec.x_cov.is_fgn() && spec.K == 1 && std::abs(spec.alpha - (0.5 - spec.x_cov.hurst())) <= 1e-12;
}

/// n^{1 - d beta} s^{d/2} sigma^{d-4} tau^{-d} c_H for the fBM+WN shape, with
/// s the scale of the fGn kernel. Finite at H = 1/2.
inline double closed_form_fbm_wn(const ModelSpec& spec) {
  detail::require(is_fbm_wn_shape(spec), "closed_form_fbm_wn: needs fgn kernel, K = 1, alpha = 1/2 - H");
  const double h = spec.x_cov.hurst();
  const double d = 2.0 / (2.0 * h + 1.0);
  const double n = static_cast<double>(spec.n);
  return std::pow(n, 1.0 - d * spec.beta) * std::pow(spec.x_cov.scale, 0.5 * d) *
         std::pow(spec.sigma, d - 4.0) * std::pow(spec.tau, -d) * closed_form_constant_cH(h);
}

/// n^{1 - 4 beta} / (2 tau^4) sum_k gamma_k^2, diamond > 4 (unnormalized).
inline double closed_form_supercritical(const ModelSpec& spec) {
  const SquaredSum sum = sum_squared_autocovariance(spec);
  if (!sum.converged) throw NumericalError("closed form: sum of squared autocovariances did not converge");
  const double n = static_cast<double>(spec.n);
  return std::pow(n, 1.0 - 4.0 * spec.beta) / (2.0 * std::pow(spec.tau, 4)) * sum.value;
}

/// Critical case with l = c |log|^rho:
/// c^2 (4 beta)^{2 rho + 1} / (2 rho + 1) n^{1 - 4 beta} (log n)^{2 rho + 1} tau^{-4}.
inline double closed_form_critical(const ModelSpec& spec) {
  const double n = static_cast<double>(spec.n);
  const double rho = spec.ell.log_exponent();
  const double c = spec.x_cov.scale * spec.ell.c;
  const double e = 2.0 * rho + 1.0;
  return c * c * std::pow(4.0 * spec.beta, e) / e * std::pow(n, 1.0 - 4.0 * spec.beta) *
         std::pow(std::log(n), e) * std::pow(spec.tau, -4);
}

/// Critical case for a general slowly varying l:
/// n^{1 - 4 beta} tau^{-4} int_{q_n}^1 l^2(1/x) dx / x, q_n = n^{-4 beta} l^2(n^{4 beta}),
/// integrated in t = log(1/x) over (0, log(1/q_n)).
inline double closed_form_critical_integral(const ModelSpec& spec) {
  const double n = static_cast<double>(spec.n);
  auto l = [&](double x) { return spec.x_cov.scale * spec.ell(x); };
  const double top = std::pow(n, 4.0 * spec.beta);
  const double lt = l(top);
  if (!(lt > 0.0)) throw DomainError("critical closed form: l vanishes at n^{4 beta}");
  const double upper = std::log(top) - 2.0 * std::log(lt);  // log(1/q_n)
  if (!(upper > 0.0)) throw NumericalError("critical closed form: q_n >= 1, n too small");
  auto g = [&](double t) {
    const double v = l(std::exp(t));
    return v * v;
  };
  const double integral = quadrature::tanh_sinh(g, 0.0, upper, 1e-12);
  return std::pow(n, 1.0 - 4.0 * spec.beta) * std::pow(spec.tau, -4) * integral;
}

/// Fisher information values with their regime metadata. Optional fields
/// are absent when not computed.
struct FisherReport {
  std::size_t n = 0;
  std::optional<double> exact;
  std::optional<double> integral;
  std::optional<double> closed_form;
  double diamond = 0.0;
  Regime regime = Regime::subcritical;
  double rate_exponent = 0.0;
  bool log_factor = false;  ///< critical case: extra (log n)^{2 rho + 1}
  double alpha = 0.0;
  int K = 0;
  double beta = 0.0;
  std::string closed_form_route;  ///< which closed form produced closed_form
  std::optional<double> critical_integral;  ///< general-l critical form
  std::vector<std::string> warnings;
};

inline FisherReport make_report_skeleton(const ModelSpec& spec) {
  FisherReport r;
  r.n = spec.n;
  r.diamond = spec.diamond();
  r.regime = classify_regime(spec.K, spec.alpha);
  r.rate_exponent = rate_exponent(spec);
  r.log_factor = r.regime == Regime::critical;
  r.alpha = spec.alpha;
  r.K = spec.K;
  r.beta = spec.beta;
  const double k_minus_alpha = static_cast<double>(spec.K) - spec.alpha;
  const double bound = std::max(spec.beta, (4.0 * spec.alpha + 1.0) * spec.beta);
  if (!(k_minus_alpha > bound))
    r.warnings.push_back("K - alpha = " + std::to_string(k_minus_alpha) +
                         " does not exceed max{beta, (4 alpha + 1) beta} = " + std::to_string(bound) +
                         "; the integral and closed forms need not be asymptotically exact");
  return r;
}

/// Closed-form asymptotic information, dispatched on the regime.
inline FisherReport fisher_closed_form(const ModelSpec& spec) {
  spec.validate();
  FisherReport r = make_report_skeleton(spec);
  switch (r.regime) {
    case Regime::subcritical:
      if (spec.alpha == 0.0 || is_fbm_wn_shape(spec)) {
        if (!is_fbm_wn_shape(spec))
          throw DomainError("closed form: alpha = 0 is only supported for the fBM+WN shape");
        r.closed_form = closed_form_fbm_wn(spec);
        r.closed_form_route = "fbm-wn";
      } else {
        r.closed_form = closed_form_subcritical(spec);
        r.closed_form_route = "subcritical";
      }
      break;
    case Regime::supercritical:
      r.closed_form = closed_form_supercritical(spec);
      r.closed_form_route = "supercritical";
      break;
    case Regime::critical:
      r.closed_form = closed_form_critical(spec);
      r.closed_form_route = "critical";
      try {
        r.critical_integral = closed_form_critical_integral(spec);
      } catch (const std::exception& e) {
        r.warnings.push_back(std::string("critical integral form unavailable: ") + e.what());
      }
      break;
  }
  const double gap = static_cast<double>(spec.K) - spec.alpha - 0.25;
  // The band is only reachable with K = 0, where the formula of the other
  // side is undefined (C needs diamond < 4, sum gamma_k^2 needs alpha > -1/4).
  if (std::abs(gap) < 0.01 && r.regime != Regime::critical)
    r.warnings.push_back("diamond = " + std::to_string(r.diamond) +
                         " is within the near-critical band |K - alpha - 1/4| < 0.01; the closed form "
                         "converges slowly in n here");
  return r;
}

struct ReportMethods {
  bool exact = false;
  bool integral = false;
  bool closed_form = false;
};

/// Report with the selected methods filled in.
inline FisherReport fisher_report(const ModelSpec& spec, const ReportMethods& methods,
                                  const ExactOptions& exact_options = {},
                                  const IntegralOptions& integral_options = {}) {
  spec.validate();
  FisherReport r = methods.closed_form ? fisher_closed_form(spec) : make_report_skeleton(spec);
  if (methods.exact) r.exact = fisher_exact(spec, exact_options);
  if (methods.integral) r.integral = fisher_integral(spec, integral_options);
  return r;
}

// ---------------------------------------------------------------------------
// Rate scans
// ---------------------------------------------------------------------------

struct RateScanRow {
  std::size_t n = 0;
  double integral = 0.0;
  std::optional<double> closed_form;
};

struct RateScan {
  std::vector<RateScanRow> rows;
  double fitted_slope = 0.0;              ///< least squares of log integral on log n
  std::optional<double> closed_form_slope;
  double expected_slope = 0.0;            ///< rate exponent of the regime
  Regime regime = Regime::subcritical;
};

/// Least-squares slope of log y on log x.
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "slope: need at least two points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Evaluates fisher_integral and the closed form over n_grid. Grid points
/// run on up to `threads` workers; each row is written to its own slot, so
/// the result does not depend on scheduling.
inline RateScan rate_scan(const ModelSpec& templ, const std::vector<std::size_t>& n_grid,
                          unsigned threads = 1, const IntegralOptions& options = {}) {
  detail::require(n_grid.size() >= 2, "rate_scan: grid needs at least two points");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    detail::require(n_grid[i] > n_grid[i - 1], "rate_scan: grid must be strictly increasing");
  templ.validate();
  RateScan out;
  out.rows.resize(n_grid.size());
  out.regime = classify_regime(templ.K, templ.alpha);
  out.expected_slope = rate_exponent(templ);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n_grid.size(); i = next++) {
      try {
        ModelSpec spec = templ;
        spec.n = n_grid[i];
        RateScanRow row;
        row.n = spec.n;
        row.integral = fisher_integral(spec, options);
        try {
          row.closed_form = fisher_closed_form(spec).closed_form;
        } catch (const DomainError&) {
        }
        out.rows[i] = row;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_grid.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<double> ns;
  std::vector<double> values;
  std::vector<double> closed;
  for (const auto& row : out.rows) {
    ns.push_back(static_cast<double>(row.n));
    values.push_back(row.integral);
    if (row.closed_form) closed.push_back(*row.closed_form);
  }
  out.fitted_slope = log_log_slope(ns, values);
  if (closed.size() == ns.size()) out.closed_form_slope = log_log_slope(ns, closed);
  return out;
}

}  // namespace scalefisher
