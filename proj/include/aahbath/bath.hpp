#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/expint.hpp>

#include <cmath>
#include <complex>
#include <limits>

#include "errors.hpp"
#include "quadrature.hpp"

namespace aahbath {

// J(omega) = eta * omega * (omega/omega_c)^(s-1) * exp(-omega/omega_c)
struct BathSpec {
  double eta = 0.1;
  double s = 1.0;
  double omega_c = 10.0;

  void validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw domain_error("eta must be finite and >= 0");
    if (!(s > 0.0) || !std::isfinite(s)) throw domain_error("s must be finite and > 0");
    if (!(omega_c > 0.0) || !std::isfinite(omega_c))
      throw domain_error("omega_c must be finite and > 0");
  }
};

inline double spectral_density(double omega, const BathSpec& b) {
  if (omega < 0.0) throw domain_error("spectral_density requires omega >= 0");
  if (omega == 0.0) return 0.0;
  return b.eta * omega * std::pow(omega / b.omega_c, b.s - 1.0) * std::exp(-omega / b.omega_c);
}

namespace detail {

// dJ/domega and higher derivatives, needed for the principal-value and
// finite-part integrands at the singular point (omega > 0 only)
inline double spectral_density_d1(double w, const BathSpec& b) {
  const double s = b.s, wc = b.omega_c;
  return b.eta * std::pow(wc, 1.0 - s) * std::exp(-w / wc) * std::pow(w, s - 1.0) * (s - w / wc);
}

inline double spectral_density_d2(double w, const BathSpec& b) {
  const double s = b.s, wc = b.omega_c, r = w / wc;
  return b.eta * std::pow(wc, 1.0 - s) * std::exp(-w / wc) * std::pow(w, s - 2.0) *
         (s * (s - 1.0) - 2.0 * s * r + r * r);
}

inline double spectral_density_d3(double w, const BathSpec& b) {
  const double s = b.s, wc = b.omega_c, r = w / wc;
  return b.eta * std::pow(wc, 1.0 - s) * std::exp(-w / wc) * std::pow(w, s - 3.0) *
         (s * (s - 1.0) * (s - 2.0) - 3.0 * s * (s - 1.0) * r + 3.0 * s * r * r - r * r * r);
}

// e^x * E1(x) for x > 0, stable for arbitrarily large x
inline double expx_e1(double x) {
  if (x > 600.0) {
    const double ix = 1.0 / x;
    return ix * (1.0 - ix * (1.0 - ix * (2.0 - 6.0 * ix * (1.0 - 4.0 * ix))));
  }
  return std::exp(x) * boost::math::expint(1, x);
}

// e^{-y} * Ei(y) for y > 0, stable for arbitrarily large y
inline double expmy_ei(double y) {
  if (y > 600.0) {
    const double iy = 1.0 / y;
    return iy * (1.0 + iy * (1.0 + iy * (2.0 + 6.0 * iy * (1.0 + 4.0 * iy))));
  }
  return std::exp(-y) * boost::math::expint(y);
}

inline double sigma_neg_quad(double E, const BathSpec& b) {
  return integrate_semi_infinite([&](double w) { return spectral_density(w, b) / (E - w); }, 0.0,
                                 b.omega_c);
}

inline double slope_neg_quad(double E, const BathSpec& b) {
  return integrate_semi_infinite(
      [&](double w) {
        const double d = E - w;
        return spectral_density(w, b) / (d * d);
      },
      0.0, b.omega_c);
}

// PV integral of J/(E-w) for E > 0: symmetric window around the pole plus
// regular remainders.  Over the symmetric window the subtracted constant
// J(E)/(E-w) integrates to zero.
inline double sigma_pv_quad(double E, const BathSpec& b) {
  const double delta = std::min(E, b.omega_c);
  const double jE = spectral_density(E, b);
  const double j1 = spectral_density_d1(E, b);
  const double j2 = spectral_density_d2(E, b);
  const double snap = 1e-8 * std::max(1.0, E);
  auto window = [&](double w) {
    const double h = w - E;
    if (std::abs(h) <= snap) return -(j1 + 0.5 * h * j2);
    return (spectral_density(w, b) - jE) / (E - w);
  };
  double v = integrate(window, E - delta, E + delta);
  if (delta < E)
    v += integrate([&](double w) { return spectral_density(w, b) / (E - w); }, 0.0, E - delta);
  v += integrate_semi_infinite([&](double w) { return spectral_density(w, b) / (E - w); },
                               E + delta, b.omega_c);
  return v;
}

// Hadamard finite part of int J/(E-w)^2 for E > 0; equals -d/dE of the PV
// self-energy.  Second-order subtraction over the symmetric window: the
// J'(E)(w-E) term is odd and drops, the J(E) term contributes -2 J(E)/delta.
inline double fp_second_quad(double E, const BathSpec& b) {
  const double delta = std::min(E, b.omega_c);
  const double jE = spectral_density(E, b);
  const double j1 = spectral_density_d1(E, b);
  const double j2 = spectral_density_d2(E, b);
  const double j3 = spectral_density_d3(E, b);
  const double snap = 1e-7 * std::max(1.0, E);
  auto window = [&](double w) {
    const double h = w - E;
    if (std::abs(h) <= snap) return 0.5 * j2 + h * j3 / 6.0;
    return (spectral_density(w, b) - jE - j1 * h) / (h * h);
  };
  double v = integrate(window, E - delta, E + delta) - 2.0 * jE / delta;
  auto second = [&](double w) {
    const double d = E - w;
    return spectral_density(w, b) / (d * d);
  };
  if (delta < E) v += integrate(second, 0.0, E - delta);
  v += integrate_semi_infinite(second, E + delta, b.omega_c);
  return v;
}

}  // namespace detail

// Sigma(E) = int_0^inf J(w)/(E-w) dw; the principal value is taken for E > 0.
// E = 0 sits on the continuum edge and is excluded from the domain.
inline double self_energy(double E, const BathSpec& b) {
  b.validate();
  if (!(std::abs(E) >= 1e-6) || !std::isfinite(E))
    throw domain_error("self_energy requires finite |E| >= 1e-6");
  if (b.eta == 0.0) return 0.0;
  if (b.s == 1.0) {
    if (E < 0.0) {
      const double x = -E / b.omega_c;
      return b.eta * b.omega_c * (x * detail::expx_e1(x) - 1.0);
    }
    const double y = E / b.omega_c;
    return b.eta * b.omega_c * (y * detail::expmy_ei(y) - 1.0);
  }
  return E < 0.0 ? detail::sigma_neg_quad(E, b) : detail::sigma_pv_quad(E, b);
}

// dSigma/dE on either branch (the finite part for E > 0)
inline double self_energy_derivative(double E, const BathSpec& b) {
  b.validate();
  if (!(std::abs(E) >= 1e-6) || !std::isfinite(E))
    throw domain_error("self_energy_derivative requires finite |E| >= 1e-6");
  if (b.eta == 0.0) return 0.0;
  if (b.s == 1.0) {
    if (E < 0.0) {
      const double x = -E / b.omega_c;
      return -b.eta * ((1.0 + x) * detail::expx_e1(x) - 1.0);
    }
    const double y = E / b.omega_c;
    return b.eta * ((1.0 - y) * detail::expmy_ei(y) + 1.0);
  }
  return E < 0.0 ? -detail::slope_neg_quad(E, b) : -detail::fp_second_quad(E, b);
}

// int J/(E-w)^2 dw = -dSigma/dE; positive for E < 0, where it gives the
// bath weight of a bound state; finite part for E > 0 (can go negative)
inline double self_energy_slope(double E, const BathSpec& b) {
  return -self_energy_derivative(E, b);
}

// f(t) = int_0^inf J(w) e^{-i w t} dw, in closed form
inline std::complex<double> memory_kernel(double t, const BathSpec& b) {
  b.validate();
  if (t < 0.0 || !std::isfinite(t)) throw domain_error("memory_kernel requires finite t >= 0");
  if (b.eta == 0.0) return {0.0, 0.0};
  const double pref = b.eta * std::pow(b.omega_c, 1.0 - b.s) * std::tgamma(b.s + 1.0);
  const std::complex<double> den = std::pow(std::complex<double>(1.0 / b.omega_c, t), b.s + 1.0);
  return pref / den;
}

// brute-force oscillatory quadrature of the kernel, for cross-checks.  The
// leading half-period (which carries the w^s branch point) goes through the
// adaptive integrator; the oscillatory tail is summed with fixed-order Gauss
// on half-period cells, which costs a few evaluations per oscillation, and is
// validated by doubling the cell count.
inline std::complex<double> memory_kernel_quadrature(double t, const BathSpec& b) {
  b.validate();
  if (t < 0.0 || !std::isfinite(t)) throw domain_error("memory_kernel requires finite t >= 0");
  if (b.eta == 0.0) return {0.0, 0.0};
  const double w_hi = 60.0 * b.omega_c;
  auto re = [&](double w) { return spectral_density(w, b) * std::cos(w * t); };
  auto im = [&](double w) { return -spectral_density(w, b) * std::sin(w * t); };
  const double pi = std::acos(-1.0);
  const double head = t > 0.0 ? std::min(pi / t, w_hi) : w_hi;
  const std::complex<double> lead(integrate(re, 0.0, head), integrate(im, 0.0, head));
  if (head >= w_hi) return lead;

  auto sweep = [&](long cells) {
    const double h = (w_hi - head) / static_cast<double>(cells);
    std::complex<double> acc{};
    for (long k = 0; k < cells; ++k) {
      const double a0 = head + k * h, b0 = head + (k + 1) * h;
      acc += std::complex<double>(boost::math::quadrature::gauss<double, 30>::integrate(re, a0, b0),
                                  boost::math::quadrature::gauss<double, 30>::integrate(im, a0, b0));
    }
    return acc;
  };
  const long cells = static_cast<long>(std::ceil((w_hi - head) * t / pi));
  const std::complex<double> v1 = sweep(cells);
  const std::complex<double> v2 = sweep(2 * cells);
  if (!(std::abs(v1 - v2) <= 1e-9 * std::max(1.0, std::abs(v2))))
    throw numerical_error("oscillatory kernel quadrature failed to converge at t = " +
                          std::to_string(t));
  return lead + v2;
}

}  // namespace aahbath
