#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "bath.hpp"
#include "lattice.hpp"

namespace aahbath {

struct TimeGrid {
  double t_max = 200.0;
  double dt = 0.01;
  int n_steps = 20000;

  static TimeGrid make(double t_max, double dt) {
    if (!(t_max > 0.0) || !(dt > 0.0) || !std::isfinite(t_max) || !std::isfinite(dt))
      throw domain_error("time grid requires finite t_max > 0 and dt > 0");
    TimeGrid g;
    g.t_max = t_max;
    g.dt = dt;
    g.n_steps = std::max(1, static_cast<int>(std::ceil(t_max / dt - 1e-12)));
    if (g.n_steps > 50'000'000) throw domain_error("time grid too fine: > 5e7 steps");
    return g;
  }
};

struct Trajectory {
  TimeGrid grid;
  int stride = 10;
  std::vector<double> times;                     // stored instants
  std::vector<Eigen::VectorXcd> amplitudes;      // site amplitudes at stored instants
  std::vector<std::complex<double>> collective;  // S(t) = sum_n alpha_n
  std::vector<double> norms;                     // ||alpha||_2 at stored instants
  double max_norm = 0.0;                         // max over every step taken
};

// Single-excitation amplitudes alpha(t) of the chain coupled to the common
// bath: i alpha' = H alpha - i 1 K(t), K(t) = int_0^t f(t-tau) S(tau) dtau,
// S = sum_n alpha_n.  Integrated in the chain eigenbasis with an exact
// one-step propagator for the coherent part (so eta = 0 is unitary to
// roundoff) and Heun (trapezoidal predictor-corrector) for the memory term.
inline Trajectory evolve(const LatticeSpec& sp, const BathSpec& bath,
                         const Eigen::VectorXcd& initial, const TimeGrid& grid, int stride = 10) {
  sp.validate();
  bath.validate();
  if (sp.boundary != Boundary::open)
    throw domain_error("evolve requires an open chain (the bath couples every site)");
  if (initial.size() != sp.n_sites) throw domain_error("initial state has wrong dimension");
  if (std::abs(initial.norm() - 1.0) > 1e-6) throw domain_error("initial state must be normalized");
  if (stride < 1) throw domain_error("stride must be >= 1");

  using cd = std::complex<double>;
  const int n = sp.n_sites;
  const int steps = grid.n_steps;
  const double dt = grid.dt;

  const EigenSystem es = diagonalize(build_lattice(sp));
  const Eigen::VectorXd& w = es.weights;
  const double w2 = w.squaredNorm();

  Eigen::VectorXcd a = es.modes.transpose() * initial;  // eigenbasis amplitudes
  Eigen::VectorXcd u(n);                                // one-step coherent propagator
  for (int i = 0; i < n; ++i) u(i) = std::exp(cd(0.0, -es.energies(i) * dt));

  const bool coupled = bath.eta > 0.0;
  std::vector<cd> f(coupled ? steps + 1 : 0);
  if (coupled)
    for (int j = 0; j <= steps; ++j) f[j] = memory_kernel(j * dt, bath);

  std::vector<cd> s_hist(steps + 1);
  s_hist[0] = (w.cast<cd>().array() * a.array()).sum();
  cd k_cur = 0.0;  // K at the current grid point (K(0) = 0)

  Trajectory tr;
  tr.grid = grid;
  tr.stride = stride;
  auto store = [&](int k) {
    tr.times.push_back(k * dt);
    Eigen::VectorXcd site = es.modes * a;
    tr.collective.push_back(site.sum());
    tr.norms.push_back(site.norm());
    tr.amplitudes.push_back(std::move(site));
  };
  store(0);
  tr.max_norm = tr.norms[0];

  Eigen::VectorXcd base(n);
  for (int k = 0; k < steps; ++k) {
    if (coupled) {
      // base = exact coherent rotation of (a - dt/2 w K_k)
      const cd half_k = 0.5 * dt * k_cur;
      for (int i = 0; i < n; ++i) base(i) = u(i) * (a(i) - half_k * w(i));
      cd s_base = 0.0;
      for (int i = 0; i < n; ++i) s_base += w(i) * base(i);

      // trapezoid over the stored S history for K at t_{k+1} (predictor)
      cd hist = 0.5 * f[k + 1] * s_hist[0];
      const cd* sh = s_hist.data();
      const cd* fk = f.data();
      for (int j = 1; j <= k; ++j) hist += fk[k + 1 - j] * sh[j];
      cd k_pred = dt * (hist + 0.5 * f[0] * s_base);

      // corrector: S at the predicted point differs from s_base only through
      // the rank-one kick, so it collapses to a scalar update
      const cd s_pred = s_base - 0.5 * dt * k_pred * w2;
      const cd k_next = k_pred + 0.5 * dt * f[0] * (s_pred - s_base);

      const cd half_next = 0.5 * dt * k_next;
      for (int i = 0; i < n; ++i) a(i) = base(i) - half_next * w(i);
      s_hist[k + 1] = s_base - half_next * w2;
      k_cur = k_next;
    } else {
      for (int i = 0; i < n; ++i) a(i) *= u(i);
      s_hist[k + 1] = (w.cast<cd>().array() * a.array()).sum();
    }

    const double nrm = a.norm();
    if (nrm > tr.max_norm) tr.max_norm = nrm;
    if (nrm > 1.0 + 1e-4)
      throw numerical_error("evolve unstable: norm " + std::to_string(nrm) + " at t=" +
                            std::to_string((k + 1) * dt) + "; reduce dt");
    if ((k + 1) % stride == 0 || k + 1 == steps) store(k + 1);
  }
  return tr;
}

inline std::vector<double> survival_probability(const Trajectory& tr, int site) {
  if (tr.amplitudes.empty()) throw domain_error("empty trajectory");
  const int n = static_cast<int>(tr.amplitudes.front().size());
  if (site < 1 || site > n) throw domain_error("site index out of range");
  std::vector<double> out(tr.amplitudes.size());
  for (size_t k = 0; k < out.size(); ++k) out[k] = std::norm(tr.amplitudes[k](site - 1));
  return out;
}

inline std::vector<double> trajectory_ipr(const Trajectory& tr) {
  std::vector<double> out(tr.amplitudes.size());
  for (size_t k = 0; k < out.size(); ++k) {
    const double p2 = tr.amplitudes[k].squaredNorm();
    out[k] = p2 < 1e-12 ? std::numeric_limits<double>::quiet_NaN()
                        : tr.amplitudes[k].cwiseAbs2().array().square().sum() / (p2 * p2);
  }
  return out;
}

// |<ref|alpha(t)>|^2 without renormalization: against the decaying norm this
// is the retained population in the reference mode
inline std::vector<double> fidelity_series(const Trajectory& tr, const Eigen::VectorXcd& ref) {
  if (!tr.amplitudes.empty() && ref.size() != tr.amplitudes.front().size())
    throw domain_error("reference state has wrong dimension");
  std::vector<double> out(tr.amplitudes.size());
  for (size_t k = 0; k < out.size(); ++k) out[k] = std::norm(ref.dot(tr.amplitudes[k]));
  return out;
}

// Mean peak spacing of an oscillatory signal on [t0, t1]: strict local maxima
// filtered by prominence (>= frac of the window range), peak instants refined
// by a parabolic fit.  Throws if fewer than 3 peaks survive.
inline double estimate_period(const std::vector<double>& t, const std::vector<double>& y,
                              double t0, double t1, double prominence_frac = 0.5) {
  if (t.size() != y.size() || t.size() < 5) throw domain_error("estimate_period: bad series");
  if (!(t1 > t0)) throw domain_error("estimate_period: need t1 > t0");
  size_t lo = 0, hi = t.size();
  while (lo < t.size() && t[lo] < t0) ++lo;
  while (hi > lo && t[hi - 1] > t1) --hi;
  if (hi - lo < 5) throw domain_error("estimate_period: window holds too few samples");

  double ymin = y[lo], ymax = y[lo];
  for (size_t i = lo; i < hi; ++i) {
    ymin = std::min(ymin, y[i]);
    ymax = std::max(ymax, y[i]);
  }
  const double prom_min = prominence_frac * (ymax - ymin);

  std::vector<double> peaks;
  for (size_t i = lo + 1; i + 1 < hi; ++i) {
    if (!(y[i] > y[i - 1] && y[i] > y[i + 1])) continue;
    // prominence: walk out until a higher sample appears, track the valley
    double left_min = y[i];
    for (size_t j = i; j-- > lo;) {
      if (y[j] > y[i]) break;
      left_min = std::min(left_min, y[j]);
    }
    double right_min = y[i];
    for (size_t j = i + 1; j < hi; ++j) {
      if (y[j] > y[i]) break;
      right_min = std::min(right_min, y[j]);
    }
    if (y[i] - std::max(left_min, right_min) < prom_min) continue;
    const double den = y[i - 1] - 2.0 * y[i] + y[i + 1];
    double tp = t[i];
    if (den < 0.0)
      tp += 0.5 * (t[i + 1] - t[i - 1]) * 0.5 * (y[i - 1] - y[i + 1]) / den;
    peaks.push_back(tp);
  }
  if (peaks.size() < 3)
    throw numerical_error("estimate_period: fewer than 3 prominent peaks; signal not oscillatory");
  return (peaks.back() - peaks.front()) / static_cast<double>(peaks.size() - 1);
}

}  // namespace aahbath
