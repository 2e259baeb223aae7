#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace aahbath {

enum class Boundary { open, periodic };

inline double golden_beta() { return 0.5 * (1.0 + std::sqrt(5.0)); }

struct LatticeSpec {
  int n_sites = 99;
  double delta = 2.0;
  double beta = 1.0 / 3.0;
  double phi = 0.0;
  Boundary boundary = Boundary::open;

  void validate() const {
    if (n_sites < 2) throw domain_error("n_sites must be at least 2");
    if (!(delta >= 0.0) || !std::isfinite(delta))
      throw domain_error("delta must be finite and >= 0");
    if (!std::isfinite(beta) || !std::isfinite(phi))
      throw domain_error("beta and phi must be finite");
  }
};

// H(n,n) = delta * cos(2 pi beta n + phi) with sites numbered n = 1..N;
// nearest-neighbour hopping +1 (energies measured in units of J)
inline Eigen::MatrixXd build_lattice(const LatticeSpec& sp) {
  sp.validate();
  const int n = sp.n_sites;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    h(i, i) = sp.delta * std::cos(2.0 * std::numbers::pi * sp.beta * (i + 1) + sp.phi);
    if (i + 1 < n) {
      h(i, i + 1) = 1.0;
      h(i + 1, i) = 1.0;
    }
  }
  if (sp.boundary == Boundary::periodic && n > 2) {
    h(0, n - 1) = 1.0;
    h(n - 1, 0) = 1.0;
  }
  return h;
}

struct EigenSystem {
  Eigen::VectorXd energies;  // ascending
  Eigen::MatrixXd modes;     // column i holds normalized eigenmode i
  Eigen::VectorXd weights;   // w_i = sum_n modes(n,i): collective bath coupling

  int size() const { return static_cast<int>(energies.size()); }
};

namespace detail {

inline int largest_component_site(const Eigen::MatrixXd& m, int col) {
  int best = 0;
  double amax = -1.0;
  for (int r = 0; r < m.rows(); ++r) {
    const double a = std::abs(m(r, col));
    if (a > amax) {
      amax = a;
      best = r;
    }
  }
  return best;
}

}  // namespace detail

// Dense symmetric diagonalization with a deterministic gauge: every mode has
// its largest-magnitude component positive, and degenerate clusters are
// ordered by ascending site of that component.
inline EigenSystem diagonalize(const Eigen::MatrixXd& h) {
  if (h.rows() != h.cols() || h.rows() < 1) throw domain_error("hamiltonian must be square");
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
    throw domain_error("hamiltonian must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw numerical_error("dense eigensolver did not converge");

  EigenSystem es;
  es.energies = solver.eigenvalues();
  es.modes = solver.eigenvectors();
  const int n = es.size();

  for (int i = 0; i < n; ++i) {
    const int site = detail::largest_component_site(es.modes, i);
    if (es.modes(site, i) < 0.0) es.modes.col(i) = -es.modes.col(i);
  }

  // stable order inside degenerate clusters (periodic chains pair +-k modes)
  const double tol = 1e-12 * std::max(1.0, es.energies.cwiseAbs().maxCoeff());
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && es.energies(j + 1) - es.energies(j) <= tol) ++j;
    if (j > i) {
      std::vector<int> order(j - i + 1);
      for (size_t k = 0; k < order.size(); ++k) order[k] = i + static_cast<int>(k);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return detail::largest_component_site(es.modes, a) <
               detail::largest_component_site(es.modes, b);
      });
      Eigen::MatrixXd block(n, j - i + 1);
      Eigen::VectorXd evs(j - i + 1);
      for (size_t k = 0; k < order.size(); ++k) {
        block.col(static_cast<int>(k)) = es.modes.col(order[k]);
        evs(static_cast<int>(k)) = es.energies(order[k]);
      }
      es.modes.middleCols(i, j - i + 1) = block;
      es.energies.segment(i, j - i + 1) = evs;
    }
    i = j + 1;
  }

  es.weights = es.modes.colwise().sum().transpose();
  return es;
}

// IPR = sum |a_n|^4 / (sum |a_n|^2)^2: 1/N for uniform, 1 for one site
inline double inverse_participation_ratio(const Eigen::VectorXd& a) {
  const double p2 = a.squaredNorm();
  if (p2 < 1e-24) return std::numeric_limits<double>::quiet_NaN();
  return a.array().square().square().sum() / (p2 * p2);
}

inline double inverse_participation_ratio(const Eigen::VectorXcd& a) {
  const double p2 = a.squaredNorm();
  if (p2 < 1e-24) return std::numeric_limits<double>::quiet_NaN();
  return a.cwiseAbs2().array().square().sum() / (p2 * p2);
}

// A spectral gap between consecutive levels, including the two semi-infinite
// regions flanking the spectrum.  `below`/`above` are the indices of the
// bounding eigenvalues (-1 / n for the open ends).
struct Gap {
  double lo, hi;
  int below, above;
};

inline std::vector<Gap> find_gaps(const EigenSystem& es, double min_width = 0.05) {
  if (!(min_width > 0.0)) throw domain_error("min_width must be > 0");
  if (es.size() < 1) throw domain_error("empty eigensystem");
  const double inf = std::numeric_limits<double>::infinity();
  const int n = es.size();
  std::vector<Gap> gaps;
  gaps.push_back({-inf, es.energies(0), -1, 0});
  for (int i = 0; i + 1 < n; ++i)
    if (es.energies(i + 1) - es.energies(i) >= min_width)
      gaps.push_back({es.energies(i), es.energies(i + 1), i, i + 1});
  gaps.push_back({es.energies(n - 1), inf, n - 1, n});
  return gaps;
}

struct EdgeMode {
  int mode_index;
  int side;          // -1: left boundary, +1: right boundary
  double ipr;
  double edge_mass;  // probability within edge_window sites of that boundary
};

// Edge modes: in-gap levels (both neighbouring spacings are gaps from the
// provided list -- an isolated level bounds the gaps on either side of it),
// localized (ipr >= threshold) with at least half their probability within
// edge_window sites of one boundary.
inline std::vector<EdgeMode> classify_edge_modes(const EigenSystem& es,
                                                 const std::vector<Gap>& gaps,
                                                 double ipr_threshold = 0.1,
                                                 int edge_window = 10) {
  const int n = es.size();
  if (edge_window < 1) throw domain_error("edge_window must be >= 1");
  const int win = std::min(edge_window, n);
  std::vector<char> gap_below(n, 0), gap_above(n, 0);
  for (const Gap& g : gaps) {
    if (g.above >= 0 && g.above < n) gap_below[g.above] = 1;  // gap ends at this level
    if (g.below >= 0 && g.below < n) gap_above[g.below] = 1;  // gap starts at this level
  }
  std::vector<EdgeMode> out;
  for (int i = 0; i < n; ++i) {
    if (!gap_below[i] || !gap_above[i]) continue;
    const double ipr = inverse_participation_ratio(Eigen::VectorXd(es.modes.col(i)));
    if (!(ipr >= ipr_threshold)) continue;
    double left = 0.0, right = 0.0;
    for (int r = 0; r < win; ++r) left += es.modes(r, i) * es.modes(r, i);
    for (int r = n - win; r < n; ++r) right += es.modes(r, i) * es.modes(r, i);
    if (left >= 0.5)
      out.push_back({i, -1, ipr, left});
    else if (right >= 0.5)
      out.push_back({i, +1, ipr, right});
  }
  return out;
}

}  // namespace aahbath
