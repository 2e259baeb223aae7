#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bath.hpp"
#include "lattice.hpp"

namespace aahbath {

inline constexpr double secular_pole_guard = 1e-12;

// F(E) = 1 + Sigma(E) * sum_i w_i^2 / (eps_i - E); zeros are bound-state
// energies of the chain + common bath (rank-one determinant reduction)
inline double secular_value(double E, const EigenSystem& es, const BathSpec& bath) {
  double t = 0.0;
  for (int i = 0; i < es.size(); ++i) {
    const double d = es.energies(i) - E;
    if (std::abs(d) < secular_pole_guard)
      throw domain_error("secular_value evaluated within 1e-12 of a lattice eigenvalue");
    t += es.weights(i) * es.weights(i) / d;
  }
  return 1.0 + self_energy(E, bath) * t;
}

inline double secular_derivative(double E, const EigenSystem& es, const BathSpec& bath) {
  double t = 0.0, t1 = 0.0;
  for (int i = 0; i < es.size(); ++i) {
    const double d = es.energies(i) - E;
    if (std::abs(d) < secular_pole_guard)
      throw domain_error("secular_derivative evaluated within 1e-12 of a lattice eigenvalue");
    const double w2 = es.weights(i) * es.weights(i);
    t += w2 / d;
    t1 += w2 / (d * d);
  }
  return self_energy_derivative(E, bath) * t + self_energy(E, bath) * t1;
}

enum class BoundKind { dbs_ground, dbs_gap, bic, dark };

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::dbs_ground: return "dbs_ground";
    case BoundKind::dbs_gap: return "dbs_gap";
    case BoundKind::bic: return "bic";
    case BoundKind::dark: return "dark";
  }
  return "?";
}

struct BoundState {
  BoundKind kind = BoundKind::dbs_gap;
  double energy = 0.0;
  Eigen::VectorXd amplitudes;        // chain-normalized site amplitudes
  double ipr = 0.0;
  double emission = 0.0;             // bath occupation probability d/(1+d), clamped to >= 0
  double emission_raw = 0.0;         // signed S^2 * slope before clamping
  bool emission_nonphysical = false; // raw value fell below zero (PV roundoff scale)
  double sum_amp = 0.0;              // S = sum_n alpha_n
  int loc_site = 0;                  // 1-based argmax |alpha_n|
  double gap_lo = 0.0, gap_hi = 0.0; // enclosing spectral gap
  double secular_slope = 0.0;        // F'(E)
};

inline std::vector<int> dark_levels(const EigenSystem& es, double tol = 1e-10) {
  std::vector<int> out;
  for (int i = 0; i < es.size(); ++i)
    if (std::abs(es.weights(i)) <= tol) out.push_back(i);
  return out;
}

// Site amplitudes of the bound state at energy E: alpha_n proportional to
// sum_i w_i gamma_in / (eps_i - E), chain-normalized.  If E coincides with a
// dark level the unperturbed eigenmode is returned (kind = dark).
inline BoundState reconstruct_mode(double E, const EigenSystem& es, const BathSpec& bath) {
  const int n = es.size();
  BoundState bs;
  bs.energy = E;

  int dark = -1;
  for (int i = 0; i < n; ++i)
    if (std::abs(es.energies(i) - E) <= 1e-10 && std::abs(es.weights(i)) <= 1e-10) dark = i;

  Eigen::VectorXd coeff(n);
  if (dark >= 0) {
    bs.kind = BoundKind::dark;
    bs.amplitudes = es.modes.col(dark);
  } else {
    for (int i = 0; i < n; ++i) {
      const double d = es.energies(i) - E;
      if (std::abs(d) < secular_pole_guard)
        throw domain_error("reconstruct_mode: E within 1e-12 of a non-dark lattice eigenvalue");
      coeff(i) = es.weights(i) / d;
    }
    coeff.normalize();
    bs.amplitudes = es.modes * coeff;
    int site = detail::largest_component_site(bs.amplitudes, 0);
    if (bs.amplitudes(site) < 0.0) bs.amplitudes = -bs.amplitudes;
  }

  bs.ipr = inverse_participation_ratio(bs.amplitudes);
  bs.sum_amp = bs.amplitudes.sum();
  int site = detail::largest_component_site(bs.amplitudes, 0);
  bs.loc_site = site + 1;

  if (dark >= 0) {
    bs.emission_raw = 0.0;
    bs.emission = 0.0;
    bs.secular_slope = 0.0;
  } else {
    bs.emission_raw = bs.sum_amp * bs.sum_amp * self_energy_slope(E, bath);
    if (bs.emission_raw < 0.0) {
      bs.emission_nonphysical = true;
      bs.emission = 0.0;
    } else {
      bs.emission = bs.emission_raw / (1.0 + bs.emission_raw);
    }
    bs.secular_slope = secular_derivative(E, es, bath);
  }

  if (E < es.energies(0))
    bs.kind = dark >= 0 ? BoundKind::dark : BoundKind::dbs_ground;
  else if (dark < 0)
    bs.kind = E > 0.0 ? BoundKind::bic : BoundKind::dbs_gap;

  // enclosing gap from the raw spectrum
  const double inf = std::numeric_limits<double>::infinity();
  double lo = -inf, hi = inf;
  for (int i = 0; i < n; ++i) {
    const double e = es.energies(i);
    if (e < E && e > lo) lo = e;
    if (e > E && e < hi) hi = e;
  }
  bs.gap_lo = lo;
  bs.gap_hi = hi;
  return bs;
}

struct SearchOptions {
  double min_gap_width = 0.05;
  int grid_points = 2000;
  bool include_positive = false;
};

struct SearchReport {
  std::vector<std::string> warnings;
};

namespace detail {

// |E| < 1e-6 is outside the self-energy domain (continuum edge)
inline constexpr double zero_exclusion = 1e-6;

inline std::optional<double> try_secular(double E, const EigenSystem& es, const BathSpec& bath) {
  if (std::abs(E) < zero_exclusion) return std::nullopt;
  try {
    return secular_value(E, es, bath);
  } catch (const domain_error&) {
    return std::nullopt;
  }
}

// bisection on a bracketed sign change; endpoints already valid
inline std::optional<double> bisect_root(double lo, double hi, double flo, const EigenSystem& es,
                                         const BathSpec& bath) {
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto fm = try_secular(mid, es, bath);
    if (!fm) return std::nullopt;  // stepped into an excluded zone: give up
    if (std::abs(*fm) <= 1e-10) return mid;
    if ((*fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = *fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// scan [lo, hi] on a uniform grid and refine every sign change
inline void scan_interval(double lo, double hi, int grid_points, const EigenSystem& es,
                          const BathSpec& bath, std::vector<double>& roots,
                          SearchReport* report) {
  if (!(hi > lo)) return;
  const int np = std::max(grid_points, 8);
  double prev_e = 0.0;
  std::optional<double> prev_f;
  for (int k = 0; k <= np; ++k) {
    const double e = lo + (hi - lo) * static_cast<double>(k) / np;
    const auto f = try_secular(e, es, bath);
    if (f && std::abs(*f) <= 1e-10) {
      roots.push_back(e);
    } else if (prev_f && f && (*prev_f < 0.0) != (*f < 0.0)) {
      const auto r = bisect_root(prev_e, e, *prev_f, es, bath);
      if (r)
        roots.push_back(*r);
      else if (report)
        report->warnings.push_back("unrefined sign change near E=" + std::to_string(0.5 * (prev_e + e)));
    }
    if (f) {
      prev_e = e;
      prev_f = f;
    }
  }
}

}  // namespace detail

// All real zeros of the secular function: the ground special state below the
// spectrum, gap states at E < 0, and (with include_positive) bound states in
// the continuum at E > 0.
inline std::vector<BoundState> find_bound_states(const EigenSystem& es, const BathSpec& bath,
                                                 const SearchOptions& opts = {},
                                                 SearchReport* report = nullptr) {
  bath.validate();
  if (opts.grid_points < 8) throw domain_error("grid_points must be >= 8");
  const auto gaps = find_gaps(es, opts.min_gap_width);
  const double e_min = es.energies(0);
  std::vector<double> roots;

  // ground region: bracket [e_min - span, e_min - 1e-6], expanding span
  // geometrically until the secular function changes sign across it
  if (bath.eta > 0.0) {
    const double scale = std::max(std::abs(e_min), 1e-3);
    double span = 50.0 * bath.eta * bath.omega_c * es.size() / scale;
    const double hi = e_min - 1e-6;
    bool bracketed = false;
    for (int it = 0; it < 60; ++it) {
      const auto flo = detail::try_secular(e_min - span, es, bath);
      const auto fhi = detail::try_secular(hi, es, bath);
      if (flo && fhi && (*flo < 0.0) != (*fhi < 0.0)) {
        const auto r = detail::bisect_root(e_min - span, hi, *flo, es, bath);
        if (r) roots.push_back(*r);
        bracketed = true;
        break;
      }
      span *= 2.0;
    }
    if (!bracketed && report)
      report->warnings.push_back("no sign change below the spectrum: ground state not bracketed");
  }

  const double off = 1e-9;  // keep the scan clear of the bounding poles
  for (const Gap& g : gaps) {
    if (g.below < 0) continue;   // ground region handled above
    if (std::isinf(g.hi)) continue;  // PV zeros above the whole band are broad
                                     // resonances (|d| >~ 1), not bound states
    double lo = g.lo + off;
    double hi = g.hi - off;
    // negative part is always searched; positive part only on request
    const double neg_hi = std::min(hi, -detail::zero_exclusion);
    if (lo <= neg_hi)
      detail::scan_interval(lo, neg_hi, opts.grid_points, es, bath, roots, report);
    if (opts.include_positive) {
      const double pos_lo = std::max(lo, detail::zero_exclusion);
      if (pos_lo <= hi)
        detail::scan_interval(pos_lo, hi, opts.grid_points, es, bath, roots, report);
    }
  }

  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-9; }),
              roots.end());

  std::vector<BoundState> out;
  out.reserve(roots.size());
  for (double r : roots) out.push_back(reconstruct_mode(r, es, bath));
  return out;
}

struct WeightPair {
  double residue;     // Sigma(E) P_a^2 / F'(E): residue of the resolvent at the pole
  double projection;  // |<mode|a>|^2 / (1 + d_raw): normalized-mode estimate
};

// Overlap weight of the bound state in the decay of initial state `a`
// (chain site basis, normalized).  The two estimators are algebraically
// identical; computing both guards the numerics.
inline WeightPair bound_state_weight_pair(const BoundState& bs, const Eigen::VectorXd& a,
                                          const EigenSystem& es, const BathSpec& bath) {
  if (bs.kind == BoundKind::dark)
    throw domain_error("bound_state_weight is undefined for dark modes");
  if (a.size() != es.modes.rows()) throw domain_error("initial state has wrong dimension");
  if (std::abs(a.norm() - 1.0) > 1e-6) throw domain_error("initial state must be normalized");
  const double E = bs.energy;
  const Eigen::VectorXd ahat = es.modes.transpose() * a;
  double p = 0.0, unorm2 = 0.0;
  Eigen::VectorXd u(es.size());
  for (int i = 0; i < es.size(); ++i) {
    const double d = E - es.energies(i);
    if (std::abs(d) < secular_pole_guard)
      throw domain_error("bound_state_weight: E within 1e-12 of a lattice eigenvalue");
    u(i) = es.weights(i) / d;
    p += u(i) * ahat(i);
    unorm2 += u(i) * u(i);
  }
  const double fp = secular_derivative(E, es, bath);
  if (std::abs(fp) < 1e-10)
    throw numerical_error("bound_state_weight: degenerate root, |F'(E)| < 1e-10");
  WeightPair wp;
  wp.residue = self_energy(E, bath) * p * p / fp;
  const double ov = p / std::sqrt(unorm2);
  wp.projection = ov * ov / (1.0 + bs.emission_raw);
  return wp;
}

inline double bound_state_weight(const BoundState& bs, const Eigen::VectorXd& a,
                                 const EigenSystem& es, const BathSpec& bath) {
  const WeightPair wp = bound_state_weight_pair(bs, a, es, bath);
  if (std::abs(wp.residue - wp.projection) > 1e-3 * std::max(1.0, std::abs(wp.residue)))
    throw numerical_error("bound_state_weight estimators disagree beyond 1e-3");
  return wp.residue;
}

}  // namespace aahbath
