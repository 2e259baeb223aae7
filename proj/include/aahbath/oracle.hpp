#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "bath.hpp"
#include "lattice.hpp"

namespace aahbath {

// Uniform midpoint discretization of the continuum on [0, omega_max]:
// omega_k = (k - 1/2) d_omega, g_k = sqrt(J(omega_k) d_omega)
struct DiscreteBath {
  Eigen::VectorXd omegas;
  Eigen::VectorXd couplings;
};

inline DiscreteBath discretize_bath(const BathSpec& b, int n_modes, double omega_max) {
  b.validate();
  if (n_modes < 1) throw domain_error("n_modes must be >= 1");
  if (!(omega_max > 0.0)) throw domain_error("omega_max must be > 0");
  DiscreteBath db;
  db.omegas.resize(n_modes);
  db.couplings.resize(n_modes);
  const double dw = omega_max / n_modes;
  for (int k = 0; k < n_modes; ++k) {
    db.omegas(k) = (k + 0.5) * dw;
    db.couplings(k) = std::sqrt(spectral_density(db.omegas(k), b) * dw);
  }
  return db;
}

// arrow matrix [[H_sys, G], [G^T, diag(omega)]] with G(n,k) = g_k: every site
// couples to every discrete mode with the same strength
inline Eigen::MatrixXd embed_hamiltonian(const Eigen::MatrixXd& h_sys, const DiscreteBath& db) {
  const int n = static_cast<int>(h_sys.rows());
  const int m = static_cast<int>(db.omegas.size());
  if (h_sys.rows() != h_sys.cols()) throw domain_error("h_sys must be square");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n + m, n + m);
  h.topLeftCorner(n, n) = h_sys;
  for (int k = 0; k < m; ++k) {
    h(n + k, n + k) = db.omegas(k);
    for (int r = 0; r < n; ++r) {
      h(r, n + k) = db.couplings(k);
      h(n + k, r) = db.couplings(k);
    }
  }
  return h;
}

inline constexpr int exact_size_cap = 5000;

// eigenvalues of the embedded system (values only; cap keeps runs desk-scale)
inline Eigen::VectorXd exact_spectrum(const Eigen::MatrixXd& h_full) {
  if (h_full.rows() > exact_size_cap)
    throw domain_error("exact cross-check capped at dimension 5000");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h_full, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw numerical_error("dense eigensolver did not converge");
  return solver.eigenvalues();
}

inline double nearest_level(const Eigen::VectorXd& sorted_levels, double target) {
  const double* begin = sorted_levels.data();
  const double* end = begin + sorted_levels.size();
  const double* it = std::lower_bound(begin, end, target);
  double best = std::numeric_limits<double>::infinity();
  double val = 0.0;
  if (it != end && std::abs(*it - target) < best) {
    best = std::abs(*it - target);
    val = *it;
  }
  if (it != begin && std::abs(*(it - 1) - target) < best) val = *(it - 1);
  return val;
}

// exact single-excitation evolution of the embedded system, reporting the
// chain block of the amplitudes at the requested times
inline std::vector<Eigen::VectorXcd> exact_trajectory(const Eigen::MatrixXd& h_full, int n_sys,
                                                      const Eigen::VectorXcd& initial_sys,
                                                      const std::vector<double>& times) {
  using cd = std::complex<double>;
  const int dim = static_cast<int>(h_full.rows());
  if (dim > exact_size_cap) throw domain_error("exact cross-check capped at dimension 5000");
  if (n_sys < 1 || n_sys > dim) throw domain_error("bad system block size");
  if (initial_sys.size() != n_sys) throw domain_error("initial state has wrong dimension");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h_full);
  if (solver.info() != Eigen::Success) throw numerical_error("dense eigensolver did not converge");
  const Eigen::MatrixXd& v = solver.eigenvectors();
  const Eigen::VectorXd& lam = solver.eigenvalues();

  Eigen::VectorXcd full0 = Eigen::VectorXcd::Zero(dim);
  full0.head(n_sys) = initial_sys;
  const Eigen::VectorXcd c0 = v.transpose() * full0;
  const Eigen::MatrixXd v_sys = v.topRows(n_sys);

  std::vector<Eigen::VectorXcd> out;
  out.reserve(times.size());
  Eigen::VectorXcd phase(dim);
  for (double t : times) {
    for (int i = 0; i < dim; ++i) phase(i) = std::exp(cd(0.0, -lam(i) * t)) * c0(i);
    out.push_back(v_sys * phase);
  }
  return out;
}

// --- commensurate beta = 1/3 closed form ---------------------------------
//
// For the periodic chain with beta = 1/3 (N = 3L sites) the k = 0 momentum
// block closes on itself and the bound-state condition reduces to a cubic in
// mu = E - D(E) with D(E) = L Sigma(E), g = 1 + D(E):
//   mu^3 - 3 (g^2 + delta^2/4) mu - (2 g^3 + (delta^3/4) cos 3phi) = 0
// solved self-consistently.  Trigonometric branches:
//   E0: 2 sqrt(p) cos(theta + 2pi/3), E1: ... + 4pi/3, E2: ... + 0,
// p = g^2 + delta^2/4, 3 theta = arccos[(g^3 + (delta^3/8) cos 3phi)/p^{3/2}]

struct Q3Result {
  double energy = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

inline double q3_rhs(double E, int branch, int n_cells, double delta, double phi,
                     const BathSpec& bath) {
  const double d = n_cells * self_energy(E, bath);
  const double g = 1.0 + d;
  const double p = g * g + 0.25 * delta * delta;
  double arg = (g * g * g + 0.125 * delta * delta * delta * std::cos(3.0 * phi)) /
               std::pow(p, 1.5);
  arg = std::clamp(arg, -1.0, 1.0);
  static constexpr double shifts[3] = {2.0 * std::numbers::pi / 3.0,
                                       4.0 * std::numbers::pi / 3.0, 0.0};
  const double theta = std::acos(arg) / 3.0;
  const double mu = 2.0 * std::sqrt(p) * std::cos(theta + shifts[branch]);
  return mu + d;
}

// keep iterates out of the excluded |E| < 1e-6 strip around the band edge
inline double q3_clamp(double E) {
  if (std::abs(E) < 2e-6) return E < 0.0 ? -2e-6 : 2e-6;
  return E;
}

}  // namespace detail

// branch: 0 -> E0 (ground special), 1 -> E1, 2 -> E2
inline Q3Result q3_level(int branch, int n_cells, double delta, double phi, const BathSpec& bath) {
  bath.validate();
  if (branch < 0 || branch > 2) throw domain_error("q3 branch must be 0, 1 or 2");
  if (n_cells < 1) throw domain_error("n_cells must be >= 1");
  if (!(delta >= 0.0)) throw domain_error("delta must be >= 0");

  // start from the eta = 0 cubic (D = 0)
  const BathSpec off{0.0, bath.s, bath.omega_c};
  double e = detail::q3_clamp(detail::q3_rhs(1.0, branch, n_cells, delta, phi, off));

  Q3Result res;
  for (int it = 1; it <= 500; ++it) {
    const double next = detail::q3_rhs(e, branch, n_cells, delta, phi, bath);
    const double moved = detail::q3_clamp(e + 0.5 * (next - e));  // damping 0.5
    res.iterations = it;
    if (std::abs(moved - e) <= 1e-10) {
      res.energy = moved;
      res.converged = true;
      return res;
    }
    e = moved;
  }

  // fallback: bracket the fixed-point residual and bisect
  auto residual = [&](double x) { return x - detail::q3_rhs(x, branch, n_cells, delta, phi, bath); };
  const double width = 10.0 + std::abs(e);
  double prev_x = 0.0, prev_r = 0.0;
  bool have_prev = false;
  for (int k = 0; k <= 400; ++k) {
    double x = e - width + 2.0 * width * k / 400.0;
    if (std::abs(x) < 2e-6) continue;
    double r;
    try {
      r = residual(x);
    } catch (const domain_error&) {
      have_prev = false;
      continue;
    }
    if (have_prev && (prev_r < 0.0) != (r < 0.0)) {
      double lo = prev_x, hi = x, rlo = prev_r;
      for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = detail::q3_clamp(0.5 * (lo + hi));
        const double rm = residual(mid);
        if ((rm < 0.0) == (rlo < 0.0)) {
          lo = mid;
          rlo = rm;
        } else {
          hi = mid;
        }
      }
      res.energy = 0.5 * (lo + hi);
      res.converged = true;
      return res;
    }
    prev_x = x;
    prev_r = r;
    have_prev = true;
  }
  res.energy = e;
  res.converged = false;
  return res;
}

struct Q3Levels {
  Q3Result e0, e1, e2;
};

inline Q3Levels commensurate_levels_q3(int n_cells, double delta, double phi,
                                       const BathSpec& bath) {
  return {q3_level(0, n_cells, delta, phi, bath), q3_level(1, n_cells, delta, phi, bath),
          q3_level(2, n_cells, delta, phi, bath)};
}

}  // namespace aahbath
