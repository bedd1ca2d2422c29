#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <algorithm>
#include <cmath>

namespace scalefisher::quadrature {

/// Fixed-order Gauss-Legendre rule on [a, b]. For integrands analytic on a
/// neighbourhood of the interval.
template <unsigned Points = 20, typename F>
double gauss_legendre(F f, double a, double b) {
  return boost::math::quadrature::gauss<double, Points>::integrate(f, a, b);
}

/// Double-exponential rule; tolerates algebraic endpoint singularities.
template <typename F>
double tanh_sinh(F f, double a, double b, double tolerance = 1e-14) {
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, a, b, tolerance);
}

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive bisection with a 31-point Kronrod rule and its embedded 15-point
/// Gauss rule; the difference of the two is the local error estimate. A
/// panel is accepted when its error is below max(rel_tol |I|, abs_tol).
/// The returned error is the sum of accepted local errors.
template <typename F>
Estimate adaptive_gauss_kronrod(F f, double a, double b, double rel_tol, double abs_tol = 0.0,
                       unsigned max_depth = 20) {
  using boost::math::quadrature::gauss;
  using boost::math::quadrature::gauss_kronrod;
  const double kronrod = gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0);
  const double gauss15 = gauss<double, 15>::integrate(f, a, b);
  const double error = std::abs(kronrod - gauss15);
  if (max_depth == 0 || error <= std::max(rel_tol * std::abs(kronrod), abs_tol) ||
      !(error == error))
    return {kronrod, error};
  const double mid = 0.5 * (a + b);
  const Estimate left = adaptive_gauss_kronrod(f, a, mid, rel_tol, 0.5 * abs_tol, max_depth - 1);
  const Estimate right = adaptive_gauss_kronrod(f, mid, b, rel_tol, 0.5 * abs_tol, max_depth - 1);
  return {left.value + right.value, left.error + right.error};
}

}  // namespace scalefisher::quadrature
