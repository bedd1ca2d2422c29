#pragma once

/** @file
 * Spectral densities f = sum_k gamma_k cos(k .) of the signal, the noise
 * spectrum 4^K tau^2 sin^{2K}(./2), and their sum h_n for the observations.
 *
 * Two independent evaluators exist for the fGn-type kernels: the cosine
 * series of the autocovariances (any kernel) and the aliased power-law sum
 * obtained from the spectral representation of fBM.
 */

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "scalefisher/error.hpp"
#include "scalefisher/model.hpp"
#include "scalefisher/numeric.hpp"

namespace scalefisher {

namespace detail {

inline void require_frequency(double lambda) {
  if (!(lambda > 0.0 && lambda <= pi)) throw DomainError("spectral density: frequency must lie in (0, pi]");
}

// sum_{j != 0} |2 pi j + lambda|^{-s}, s > 1, lambda in (0, pi]. Explicit
// terms up to |j| = 48, Euler-Maclaurin remainder past that.
inline double aliased_power_sum_rest(double lambda, double s) {
  constexpr int terms = 48;
  const double two_pi = 2.0 * pi;
  double sum = 0.0;
  for (int j = terms; j >= 1; --j)
    sum += std::pow(two_pi * j + lambda, -s) + std::pow(two_pi * j - lambda, -s);
  // Remainder sum_{j > J} g(j) with g(x) = (2 pi x + lambda)^{-s} + (2 pi x - lambda)^{-s}.
  auto remainder = [&](double c) {
    const double x = two_pi * terms + c;
    const double integral = std::pow(x, 1.0 - s) / (two_pi * (s - 1.0));
    const double g0 = std::pow(x, -s);
    const double g1 = -s * two_pi * std::pow(x, -s - 1.0);
    const double g3 = -s * (s + 1.0) * (s + 2.0) * std::pow(two_pi, 3) * std::pow(x, -s - 3.0);
    const double g5 = -s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * std::pow(two_pi, 5) *
                      std::pow(x, -s - 5.0);
    return integral - 0.5 * g0 - g1 / 12.0 + g3 / 720.0 - g5 / 30240.0;
  };
  return sum + remainder(lambda) + remainder(-lambda);
}

// (2 sin(lambda/2))^m sum_{j in Z} |2 pi j + lambda|^{-s}; the j = 0 term is
// formed as (2 sin(lambda/2) / lambda)^m lambda^{m-s} so tiny lambda stays finite.
inline double weighted_aliased_sum(double lambda, double s, int m) {
  const double chord = 2.0 * std::sin(0.5 * lambda);
  return std::pow(chord / lambda, m) * std::pow(lambda, m - s) + std::pow(chord, m) * aliased_power_sum_rest(lambda, s);
}

}  // namespace detail

/// Spectral density of unit fGn(H) from the aliased power law,
/// f(lambda) = 2 sin(pi H) Gamma(2H+1) (1 - cos lambda) sum_j |2 pi j + lambda|^{-2H-1}.
inline double spectral_density_fgn(double hurst, double lambda) {
  detail::require(hurst > 0.0 && hurst < 1.0, "spectral_density_fgn: H must lie in (0,1)");
  detail::require_frequency(lambda);
  return std::sin(pi * hurst) * std::tgamma(2.0 * hurst + 1.0) *
         detail::weighted_aliased_sum(lambda, 2.0 * hurst + 1.0, 2);
}

/// Spectral density of the stationary part of the integrated-fBM preset,
/// f(lambda) = sin(pi H) Gamma(2H+1) 16 sin^4(lambda/2) sum_j |2 pi j + lambda|^{-2H-3}.
/// The triangular weight of the second difference of int B has squared
/// Fourier modulus 16 sin^4(w/2) / w^4, which shifts the fGn exponent by two.
inline double spectral_density_integrated_fbm(double hurst, double lambda) {
  detail::require(hurst > 0.0 && hurst < 0.25,
                  "spectral_density_integrated_fbm: H must lie in (0,1/4)");
  detail::require_frequency(lambda);
  return std::sin(pi * hurst) * std::tgamma(2.0 * hurst + 1.0) *
         detail::weighted_aliased_sum(lambda, 2.0 * hurst + 3.0, 4);
}

/// 4^K tau^2 sin^{2K}(lambda / 2).
inline double noise_spectral_density(int K, double tau, double lambda) {
  return tau * tau * std::pow(2.0 * std::sin(0.5 * lambda), 2 * K);
}

/// Evaluator for the spectral density of the signal.
///
/// The series route sums gamma_0 + 2 sum_{k <= k_max} gamma_k cos(k lambda)
/// and adds the tail past k_max for the power-law continuation
/// a(k) = sign(-alpha) l(k) k^{-2 alpha - 1} through repeated summation by
/// parts,
///   sum_{k >= m} a_k E^k = sum_j (nabla^j a)_{m+j} E^{m+j} / (1 - E)^{j+1},
/// E = exp(i lambda), whose terms shrink like ((2 alpha + 1 + j) / (m |1 - E|))^j.
/// Below the frequency where that ratio stops being small, the density is
/// continued with its low-frequency power law lambda^{2 alpha} l(1/lambda).
class SpectralDensity {
 public:
  enum class Method { automatic, series, aliased };

  explicit SpectralDensity(const ModelSpec& spec, Method method = Method::automatic,
                           std::size_t k_max = 100000)
      : spec_(spec), k_max_(k_max) {
    detail::require(k_max >= 1, "spectral density: k_max must be positive");
    const bool has_aliased = spec.x_cov.is_fgn() || spec.x_cov.is_integrated_fbm();
    if (method == Method::automatic) method = has_aliased ? Method::aliased : Method::series;
    if (method == Method::aliased && !has_aliased)
      throw DomainError("spectral density: aliased evaluator needs an fgn or integrated-fbm kernel");
    method_ = method;
    if (method_ == Method::series) prepare_series();
  }

  Method method() const { return method_; }

  double operator()(double lambda) const {
    detail::require_frequency(lambda);
    if (method_ == Method::aliased) {
      const double h = spec_.x_cov.hurst();
      const double f = spec_.x_cov.is_fgn() ? spectral_density_fgn(h, lambda)
                                            : spectral_density_integrated_fbm(h, lambda);
      return spec_.x_cov.scale * f;
    }
    if (lambda < lowest_resolved_) {
      const double anchor = series(lowest_resolved_);
      const double l_anchor = spec_.ell(1.0 / lowest_resolved_);
      double ratio = std::pow(lambda / lowest_resolved_, 2.0 * spec_.alpha);
      if (l_anchor != 0.0) ratio *= spec_.ell(1.0 / lambda) / l_anchor;
      return anchor * ratio;
    }
    return series(lambda);
  }

 private:
  static constexpr int max_tail_terms = 14;

  void prepare_series() {
    gamma_ = autocovariances(spec_, k_max_ + 1);
    // Tail exponent with the slowly varying factor frozen at the cut:
    // a(x) ~ amplitude * x^{-p}, p = 2 alpha + 1 - x l'(x) / l(x).
    const double m = static_cast<double>(k_max_ + 1);
    decay_ = 2.0 * spec_.alpha + 1.0;
    if (spec_.ell.kind == SlowlyVaryingSpec::Kind::log_power) decay_ -= spec_.ell.rho / std::log(m);
    amplitude_ = spec_.x_cov.scale * spec_.tail()(m) * std::pow(m, decay_);
    // Require the summation-by-parts ratio (p + j) / (m |1 - E|) <= 1/2 at
    // the last kept term; |1 - E| = 2 sin(lambda / 2) ~ lambda.
    const double needed = 2.0 * (std::abs(decay_) + max_tail_terms) / m;
    lowest_resolved_ = needed < 2.0 ? 2.0 * std::asin(0.5 * needed) : pi;
    if (amplitude_ == 0.0) lowest_resolved_ = 0.0;
  }

  double series(double lambda) const {
    // cos(k lambda) by rotation, reseeded from the library cosine every 256 lags.
    const double c1 = std::cos(lambda);
    const double s1 = std::sin(lambda);
    CompensatedSum sum;
    sum += gamma_[0];
    double c = 1.0;
    double s = 0.0;
    for (std::size_t k = 1; k <= k_max_; ++k) {
      if (k % 256 == 0) {
        c = std::cos(static_cast<double>(k) * lambda);
        s = std::sin(static_cast<double>(k) * lambda);
      } else {
        const double cn = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = cn;
      }
      sum += 2.0 * gamma_[k] * c;
    }
    return sum.value() + 2.0 * tail(lambda);
  }

  // Re sum_{k > k_max} a(k) exp(i k lambda).
  double tail(double lambda) const {
    if (amplitude_ == 0.0) return 0.0;
    using complex = std::complex<double>;
    const double m = static_cast<double>(k_max_ + 1);
    const complex e = std::polar(1.0, lambda);
    const complex q = 1.0 / (1.0 - e);
    complex total = 0.0;
    complex factor = q * std::polar(1.0, std::fmod(m * lambda, 2.0 * pi));
    double rising = 1.0;  // (p)_j
    for (int j = 0; j < max_tail_terms; ++j) {
      // nabla^j a at m + j, from the j-th derivative at the B-spline centre m + j/2.
      const double x = m + 0.5 * j;
      const double diff = amplitude_ * ((j % 2) ? -1.0 : 1.0) * rising * std::pow(x, -decay_ - j);
      const complex term = diff * factor;
      total += term;
      if (std::abs(term) < 1e-17 * std::abs(total)) break;
      factor *= e * q;
      rising *= decay_ + j;
    }
    return total.real();
  }

  ModelSpec spec_;
  std::size_t k_max_;
  Method method_ = Method::automatic;
  std::vector<double> gamma_;
  double decay_ = 1.0;
  double amplitude_ = 0.0;
  double lowest_resolved_ = 0.0;
};

/// Spectral density of X by the truncated cosine series with power-law tail.
inline double spectral_density_x(const ModelSpec& spec, double lambda, std::size_t k_max = 100000) {
  detail::require_frequency(lambda);
  return SpectralDensity(spec, SpectralDensity::Method::series, k_max)(lambda);
}

/// h_n(lambda) = sigma^2 n^{-2 beta} f(lambda) + 4^K tau^2 sin^{2K}(lambda / 2).
inline double spectral_density_z(const ModelSpec& spec, const SpectralDensity& f, double lambda) {
  detail::require_frequency(lambda);
  return spec.sigma * spec.sigma * spec.signal_factor() * f(lambda) +
         noise_spectral_density(spec.K, spec.tau, lambda);
}

inline double spectral_density_z(const ModelSpec& spec, double lambda) {
  return spectral_density_z(spec, SpectralDensity(spec), lambda);
}

}  // namespace scalefisher
