#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <string>
#include <utility>

#include "errors.hpp"

namespace aahbath {

// hard gate on the estimated absolute quadrature error
inline constexpr double quad_abs_tol = 1e-9;

// Adaptive 15/31 Gauss-Kronrod on a finite interval, with a double-exponential
// fallback for integrands Gauss-Kronrod resolves poorly (endpoint branch
// points like w^s with fractional s).  tanh_sinh pushes abscissae
// double-exponentially close to the endpoints, where mapped semi-infinite
// integrands can overflow to inf*0; such samples carry negligible weight, so
// non-finite values are dropped rather than propagated.  A genuinely
// divergent integrand still fails the error gate.
template <class F>
double integrate(F&& f, double a, double b) {
  double err = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-12,
                                                                           &err);
  if (err <= quad_abs_tol) return v;

  auto safe = [&](double x) {
    const double y = f(x);
    return std::isfinite(y) ? y : 0.0;
  };
  boost::math::quadrature::tanh_sinh<double> ts(15);
  double l1 = 0.0;
  v = ts.integrate(safe, a, b, 1e-12, &err, &l1);
  if (!(err <= quad_abs_tol * std::max(1.0, std::abs(v))))
    throw numerical_error("quadrature failed to converge on [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]: estimated error " + std::to_string(err));
  return v;
}

// Integral over [a, inf) through the rational map w = a + scale*u/(1-u).
// `scale` should match the decay length of the integrand.
template <class F>
double integrate_semi_infinite(F&& f, double a, double scale) {
  auto g = [&](double u) {
    const double rest = 1.0 - u;
    const double w = a + scale * u / rest;
    const double jac = scale / (rest * rest);
    return f(w) * jac;
  };
  return integrate(g, 0.0, 1.0);
}

}  // namespace aahbath
