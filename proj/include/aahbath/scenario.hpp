#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bath.hpp"
#include "dynamics.hpp"
#include "lattice.hpp"
#include "oracle.hpp"
#include "spectral.hpp"
#include "version.hpp"

namespace aahbath {

enum class Task { spectrum, bound, bic, evolve, sweep, oracle, kernelcheck };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::spectrum: return "spectrum";
    case Task::bound: return "bound";
    case Task::bic: return "bic";
    case Task::evolve: return "evolve";
    case Task::sweep: return "sweep";
    case Task::oracle: return "oracle";
    case Task::kernelcheck: return "kernelcheck";
  }
  return "?";
}

struct Scenario {
  LatticeSpec lattice;
  BathSpec bath;
  Task task = Task::bound;
  bool beta_golden = false;  // beta given as the `golden` token
  int n0 = 99;
  std::string init_mode = "site";  // site | eigenmode (n0 = 1-based mode index)
  double t_max = 200.0;
  double dt = 0.01;
  int stride = 10;
  std::string axis = "phi";
  double from = -std::numbers::pi;
  double to = std::numbers::pi;
  int points = 51;
  bool include_positive = false;
  double min_gap_width = 0.05;
  int m_modes = 2000;
  double omega_max = -1.0;  // resolved to 20 * omega_c when not set
  std::string out_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw domain_error("config key '" + key + "': cannot parse number '" + v + "'");
  }
}

// angles accept plain radians or a `pi` suffix: "0.4pi", "-pi", "pi"
inline double parse_angle(const std::string& key, const std::string& v) {
  if (v.size() >= 2 && v.substr(v.size() - 2) == "pi") {
    std::string head = trim(v.substr(0, v.size() - 2));
    double coeff = 1.0;
    if (head == "-")
      coeff = -1.0;
    else if (!head.empty())
      coeff = parse_double(key, head);
    return coeff * std::numbers::pi;
  }
  return parse_double(key, v);
}

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw domain_error("config key '" + key + "': cannot parse integer '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw domain_error("config key '" + key + "': cannot parse boolean '" + v + "'");
}

// shortest-round-trip decimal with 17 significant digits; locale-independent
inline std::string fmt(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string fmt(int x) { return std::to_string(x); }

}  // namespace detail

inline void apply_key(Scenario& sc, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key.rfind("meta_", 0) == 0) return;  // manifest annotations round-trip as no-ops
  if (key == "n_sites")
    sc.lattice.n_sites = parse_int(key, value);
  else if (key == "delta")
    sc.lattice.delta = parse_double(key, value);
  else if (key == "beta") {
    if (value == "golden") {
      sc.lattice.beta = golden_beta();
      sc.beta_golden = true;
    } else {
      sc.lattice.beta = parse_double(key, value);
      sc.beta_golden = false;
    }
  } else if (key == "phi")
    sc.lattice.phi = parse_angle(key, value);
  else if (key == "boundary") {
    if (value == "open")
      sc.lattice.boundary = Boundary::open;
    else if (value == "periodic")
      sc.lattice.boundary = Boundary::periodic;
    else
      throw domain_error("boundary must be open or periodic, got '" + value + "'");
  } else if (key == "eta")
    sc.bath.eta = parse_double(key, value);
  else if (key == "s")
    sc.bath.s = parse_double(key, value);
  else if (key == "omega_c")
    sc.bath.omega_c = parse_double(key, value);
  else if (key == "task") {
    if (value == "spectrum")
      sc.task = Task::spectrum;
    else if (value == "bound")
      sc.task = Task::bound;
    else if (value == "bic")
      sc.task = Task::bic;
    else if (value == "evolve")
      sc.task = Task::evolve;
    else if (value == "sweep")
      sc.task = Task::sweep;
    else if (value == "oracle")
      sc.task = Task::oracle;
    else if (value == "kernelcheck")
      sc.task = Task::kernelcheck;
    else
      throw domain_error("unknown task '" + value + "'");
  } else if (key == "n0")
    sc.n0 = parse_int(key, value);
  else if (key == "init_mode") {
    if (value != "site" && value != "eigenmode")
      throw domain_error("init_mode must be site or eigenmode");
    sc.init_mode = value;
  } else if (key == "t_max")
    sc.t_max = parse_double(key, value);
  else if (key == "dt")
    sc.dt = parse_double(key, value);
  else if (key == "stride")
    sc.stride = parse_int(key, value);
  else if (key == "axis") {
    if (value != "phi") throw domain_error("only axis=phi sweeps are supported");
    sc.axis = value;
  } else if (key == "from")
    sc.from = parse_angle(key, value);
  else if (key == "to")
    sc.to = parse_angle(key, value);
  else if (key == "points")
    sc.points = parse_int(key, value);
  else if (key == "include_positive")
    sc.include_positive = parse_bool(key, value);
  else if (key == "min_gap_width")
    sc.min_gap_width = parse_double(key, value);
  else if (key == "m_modes")
    sc.m_modes = parse_int(key, value);
  else if (key == "omega_max")
    sc.omega_max = parse_double(key, value);
  else if (key == "out_dir")
    sc.out_dir = value;
  else
    throw domain_error("unknown config key '" + key + "'");
}

inline Scenario parse_scenario(std::istream& in) {
  Scenario sc;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw domain_error("config line " + std::to_string(lineno) + ": expected key=value");
    apply_key(sc, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  return sc;
}

inline void validate_scenario(Scenario& sc) {
  sc.lattice.validate();
  sc.bath.validate();
  if (sc.omega_max <= 0.0) sc.omega_max = 20.0 * sc.bath.omega_c;
  if (sc.task == Task::evolve || sc.task == Task::kernelcheck) {
    if (!(sc.t_max > 0.0) || !(sc.dt > 0.0)) throw domain_error("t_max and dt must be > 0");
  }
  if (sc.task == Task::evolve && sc.dt > 0.02)
    throw domain_error("dt must be <= 0.02 for evolve runs (accuracy floor)");
  if (sc.task == Task::evolve) {
    const int limit = sc.init_mode == "site" ? sc.lattice.n_sites : sc.lattice.n_sites;
    if (sc.n0 < 1 || sc.n0 > limit) throw domain_error("n0 out of range");
    if (sc.stride < 1) throw domain_error("stride must be >= 1");
  }
  if (sc.task == Task::sweep) {
    if (sc.points < 2) throw domain_error("sweep needs points >= 2");
    if (!(sc.to > sc.from)) throw domain_error("sweep needs to > from");
  }
  if (sc.task == Task::oracle) {
    if (sc.m_modes < 1) throw domain_error("m_modes must be >= 1");
    if (sc.lattice.n_sites + sc.m_modes > exact_size_cap)
      throw domain_error("oracle task capped at n_sites + m_modes <= 5000");
  }
  if (!(sc.min_gap_width > 0.0)) throw domain_error("min_gap_width must be > 0");
  if (sc.out_dir.empty()) throw domain_error("out_dir must not be empty");
}

inline Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw domain_error("cannot open config file '" + path + "'");
  Scenario sc = parse_scenario(in);
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos) throw domain_error("override '" + ov + "': expected key=value");
    apply_key(sc, detail::trim(ov.substr(0, eq)), detail::trim(ov.substr(eq + 1)));
  }
  validate_scenario(sc);
  return sc;
}

inline int thread_budget() {
  if (const char* env = std::getenv("AAHBATH_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw domain_error("AAHBATH_THREADS must be a positive integer");
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace detail {

struct RunOutput {
  std::map<std::string, std::string> files;  // name -> content, written on success
  std::string summary;
};

inline std::string edge_tag_of(int mode_index, const std::vector<EdgeMode>& edges) {
  for (const EdgeMode& em : edges)
    if (em.mode_index == mode_index) return em.side < 0 ? "left" : "right";
  return "";
}

inline std::string spectrum_csv(const EigenSystem& es, const std::vector<EdgeMode>& edges) {
  std::string csv = "index,energy,ipr,w,edge_tag\n";
  for (int i = 0; i < es.size(); ++i) {
    const double ipr = inverse_participation_ratio(Eigen::VectorXd(es.modes.col(i)));
    csv += fmt(i + 1) + ',' + fmt(es.energies(i)) + ',' + fmt(ipr) + ',' + fmt(es.weights(i)) +
           ',' + edge_tag_of(i, edges) + '\n';
  }
  return csv;
}

inline std::string bound_states_csv(const std::vector<BoundState>& states) {
  std::string csv = "kind,energy,ipr,d,sum_alpha,loc_site,gap_lo,gap_hi,d_raw,flags\n";
  for (const BoundState& b : states) {
    csv += std::string(to_string(b.kind)) + ',' + fmt(b.energy) + ',' + fmt(b.ipr) + ',' +
           fmt(b.emission) + ',' + fmt(b.sum_amp) + ',' + fmt(b.loc_site) + ',' + fmt(b.gap_lo) +
           ',' + fmt(b.gap_hi) + ',' + fmt(b.emission_raw) + ',' +
           (b.emission_nonphysical ? "nonphysical_d" : "") + '\n';
  }
  return csv;
}

inline Eigen::VectorXcd initial_state(const Scenario& sc, const EigenSystem& es) {
  Eigen::VectorXcd a0 = Eigen::VectorXcd::Zero(sc.lattice.n_sites);
  if (sc.init_mode == "site")
    a0(sc.n0 - 1) = 1.0;
  else
    a0 = es.modes.col(sc.n0 - 1).cast<std::complex<double>>();
  return a0;
}

inline void run_spectrum_like(const Scenario& sc, RunOutput& out) {
  const EigenSystem es = diagonalize(build_lattice(sc.lattice));
  const auto gaps = find_gaps(es, sc.min_gap_width);
  const auto edges = classify_edge_modes(es, gaps);
  out.files["spectrum.csv"] = spectrum_csv(es, edges);
  std::string summary = "spectrum: N=" + fmt(es.size()) + ", range [" + fmt(es.energies(0)) +
                        ", " + fmt(es.energies(es.size() - 1)) + "], " + fmt((int)edges.size()) +
                        " edge mode(s)\n";

  if (sc.task == Task::bound || sc.task == Task::bic) {
    SearchOptions opts;
    opts.min_gap_width = sc.min_gap_width;
    opts.include_positive = sc.include_positive || sc.task == Task::bic;
    SearchReport rep;
    const auto states = find_bound_states(es, sc.bath, opts, &rep);
    out.files["bound_states.csv"] = bound_states_csv(states);
    summary += "bound states: " + fmt((int)states.size()) + "\n";
    for (const BoundState& b : states)
      summary += std::string("  ") + to_string(b.kind) + " E=" + fmt(b.energy) +
                 " ipr=" + fmt(b.ipr) + " d=" + fmt(b.emission) + " loc=" + fmt(b.loc_site) + "\n";
    for (const std::string& w : rep.warnings) summary += "warning: " + w + "\n";
  }
  out.summary = summary;
}

inline void run_evolve(const Scenario& sc, RunOutput& out) {
  const EigenSystem es = diagonalize(build_lattice(sc.lattice));
  const Eigen::VectorXcd a0 = initial_state(sc, es);
  const TimeGrid grid = TimeGrid::make(sc.t_max, sc.dt);
  const Trajectory tr = evolve(sc.lattice, sc.bath, a0, grid, sc.stride);

  int watch_site = sc.n0;
  if (sc.init_mode == "eigenmode") {
    watch_site = detail::largest_component_site(es.modes, sc.n0 - 1) + 1;
  }
  const auto surv = survival_probability(tr, watch_site);
  const auto ipr = trajectory_ipr(tr);
  const auto fid = fidelity_series(tr, a0);

  std::string csv = "t,survival,ipr,norm,fidelity\n";
  for (size_t k = 0; k < tr.times.size(); ++k)
    csv += fmt(tr.times[k]) + ',' + fmt(surv[k]) + ',' + fmt(ipr[k]) + ',' + fmt(tr.norms[k]) +
           ',' + fmt(fid[k]) + '\n';
  out.files["trajectory.csv"] = csv;
  out.summary = "evolve: steps=" + fmt(grid.n_steps) + ", stored=" + fmt((int)tr.times.size()) +
                ", watch site " + fmt(watch_site) + ", final survival=" + fmt(surv.back()) +
                ", final norm=" + fmt(tr.norms.back()) + "\n";
}

struct SweepRow {
  int point;
  std::string source;
  double energy, ipr, d;
  int loc_site;
  std::string edge_tag, status;
};

inline void run_sweep(const Scenario& sc, RunOutput& out) {
  std::vector<double> phis(sc.points);
  for (int k = 0; k < sc.points; ++k)
    phis[k] = sc.from + (sc.to - sc.from) * static_cast<double>(k) / (sc.points - 1);

  std::vector<std::vector<SweepRow>> results(sc.points);
  std::atomic<int> next{0};
  const int workers = std::min(thread_budget(), sc.points);
  auto work = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= sc.points) return;
      std::vector<SweepRow>& rows = results[k];
      try {
        LatticeSpec lsp = sc.lattice;
        lsp.phi = phis[k];
        const EigenSystem es = diagonalize(build_lattice(lsp));
        const auto gaps = find_gaps(es, sc.min_gap_width);
        const auto edges = classify_edge_modes(es, gaps);
        for (int i = 0; i < es.size(); ++i) {
          const double ipr = inverse_participation_ratio(Eigen::VectorXd(es.modes.col(i)));
          int loc = detail::largest_component_site(es.modes, i) + 1;
          rows.push_back({k, "lattice", es.energies(i), ipr, 0.0, loc,
                          edge_tag_of(i, edges), "ok"});
        }
        SearchOptions opts;
        opts.min_gap_width = sc.min_gap_width;
        opts.include_positive = sc.include_positive;
        const auto states = find_bound_states(es, sc.bath, opts);
        for (const BoundState& b : states)
          rows.push_back({k, to_string(b.kind), b.energy, b.ipr, b.emission, b.loc_site,
                          "", b.emission_nonphysical ? "nonphysical_d" : "ok"});
      } catch (const std::exception& e) {
        rows.push_back({k, "error", 0.0, 0.0, 0.0, 0, "", std::string("error:") + e.what()});
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < workers; ++i) pool.emplace_back(work);
  for (auto& th : pool) th.join();

  std::string csv = "phi,source,energy,ipr,d,loc_site,edge_tag,status\n";
  for (int k = 0; k < sc.points; ++k) {
    std::vector<SweepRow>& rows = results[k];
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
      if (a.source != b.source) return a.source < b.source;
      return a.energy < b.energy;
    });
    for (const SweepRow& r : rows)
      csv += fmt(phis[k]) + ',' + r.source + ',' + fmt(r.energy) + ',' + fmt(r.ipr) + ',' +
             fmt(r.d) + ',' + fmt(r.loc_site) + ',' + r.edge_tag + ',' + r.status + '\n';
  }
  out.files["sweep_levels.csv"] = csv;
  out.summary = "sweep: " + fmt(sc.points) + " phi points in [" + fmt(sc.from) + ", " +
                fmt(sc.to) + "], " + fmt(workers) + " worker(s)\n";
}

inline void run_oracle(const Scenario& sc, RunOutput& out) {
  const EigenSystem es = diagonalize(build_lattice(sc.lattice));
  SearchOptions opts;
  opts.min_gap_width = sc.min_gap_width;
  opts.include_positive = sc.include_positive;
  const auto states = find_bound_states(es, sc.bath, opts);

  const DiscreteBath db = discretize_bath(sc.bath, sc.m_modes, sc.omega_max);
  const Eigen::VectorXd levels = exact_spectrum(embed_hamiltonian(build_lattice(sc.lattice), db));

  std::string csv = "kind,energy,energy_ed,abs_diff\n";
  std::string summary = "oracle: M=" + fmt(sc.m_modes) + ", omega_max=" + fmt(sc.omega_max) + "\n";
  for (const BoundState& b : states) {
    if (b.energy > 0.0) continue;  // discrete levels inside the continuum are not isolated
    const double near = nearest_level(levels, b.energy);
    csv += std::string(to_string(b.kind)) + ',' + fmt(b.energy) + ',' + fmt(near) + ',' +
           fmt(std::abs(near - b.energy)) + '\n';
    summary += std::string("  ") + to_string(b.kind) + " E=" + fmt(b.energy) +
               " ed=" + fmt(near) + " |diff|=" + fmt(std::abs(near - b.energy)) + "\n";
  }
  out.files["oracle_check.csv"] = csv;
  out.summary = summary;
}

inline void run_kernelcheck(const Scenario& sc, RunOutput& out) {
  const int np = std::max(2, sc.points);
  std::string csv = "t,f_re,f_im,quad_re,quad_im,abs_err\n";
  double worst = 0.0;
  for (int k = 0; k <= np; ++k) {
    const double t = sc.t_max * static_cast<double>(k) / np;
    const auto closed = memory_kernel(t, sc.bath);
    const auto quad = memory_kernel_quadrature(t, sc.bath);
    const double err = std::abs(closed - quad);
    worst = std::max(worst, err);
    csv += fmt(t) + ',' + fmt(closed.real()) + ',' + fmt(closed.imag()) + ',' +
           fmt(quad.real()) + ',' + fmt(quad.imag()) + ',' + fmt(err) + '\n';
  }
  out.files["kernel_check.csv"] = csv;
  out.summary = "kernelcheck: " + fmt(np + 1) + " samples on [0, " + fmt(sc.t_max) +
                "], worst |closed - quadrature| = " + fmt(worst) + "\n";
}

inline std::string manifest_text(const Scenario& sc, double seconds) {
  std::string m;
  m += "task=" + std::string(to_string(sc.task)) + "\n";
  m += "n_sites=" + fmt(sc.lattice.n_sites) + "\n";
  m += "delta=" + fmt(sc.lattice.delta) + "\n";
  m += "beta=" + (sc.beta_golden ? std::string("golden") : fmt(sc.lattice.beta)) + "\n";
  m += "phi=" + fmt(sc.lattice.phi) + "\n";
  m += std::string("boundary=") + (sc.lattice.boundary == Boundary::open ? "open" : "periodic") +
       "\n";
  m += "eta=" + fmt(sc.bath.eta) + "\n";
  m += "s=" + fmt(sc.bath.s) + "\n";
  m += "omega_c=" + fmt(sc.bath.omega_c) + "\n";
  m += "n0=" + fmt(sc.n0) + "\n";
  m += "init_mode=" + sc.init_mode + "\n";
  m += "t_max=" + fmt(sc.t_max) + "\n";
  m += "dt=" + fmt(sc.dt) + "\n";
  m += "stride=" + fmt(sc.stride) + "\n";
  m += "axis=" + sc.axis + "\n";
  m += "from=" + fmt(sc.from) + "\n";
  m += "to=" + fmt(sc.to) + "\n";
  m += "points=" + fmt(sc.points) + "\n";
  m += std::string("include_positive=") + (sc.include_positive ? "true" : "false") + "\n";
  m += "min_gap_width=" + fmt(sc.min_gap_width) + "\n";
  m += "m_modes=" + fmt(sc.m_modes) + "\n";
  m += "omega_max=" + fmt(sc.omega_max) + "\n";
  m += "out_dir=" + sc.out_dir + "\n";
  m += std::string("meta_tool_version=") + version + "\n";
  m += "meta_schema_spectrum=1\n";
  m += "meta_schema_bound_states=2\n";
  m += "meta_schema_trajectory=1\n";
  m += "meta_schema_sweep_levels=2\n";
  m += "meta_schema_oracle_check=1\n";
  m += "meta_schema_kernel_check=1\n";
  m += "meta_timing_seconds=" + fmt(seconds) + "\n";
  return m;
}

}  // namespace detail

// Runs the scenario and writes manifest + CSVs + summary into out_dir.
// Everything is buffered in memory first: a failed run leaves no artifacts.
inline void run_scenario(const Scenario& sc) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::RunOutput out;
  switch (sc.task) {
    case Task::spectrum:
    case Task::bound:
    case Task::bic: detail::run_spectrum_like(sc, out); break;
    case Task::evolve: detail::run_evolve(sc, out); break;
    case Task::sweep: detail::run_sweep(sc, out); break;
    case Task::oracle: detail::run_oracle(sc, out); break;
    case Task::kernelcheck: detail::run_kernelcheck(sc, out); break;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(sc.out_dir, ec);
  if (ec) throw domain_error("cannot create out_dir '" + sc.out_dir + "': " + ec.message());

  out.files["manifest"] = detail::manifest_text(sc, seconds);
  out.files["summary.txt"] = out.summary;

  std::vector<fs::path> written;
  for (const auto& [name, content] : out.files) {
    const fs::path p = fs::path(sc.out_dir) / name;
    std::ofstream f(p, std::ios::binary);
    if (f) f << content;
    if (!f) {
      for (const fs::path& q : written) fs::remove(q, ec);
      throw domain_error("cannot write output file '" + p.string() + "'");
    }
    written.push_back(p);
  }
}

}  // namespace aahbath
