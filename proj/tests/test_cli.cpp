#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "aahbath/scenario.hpp"

namespace fs = std::filesystem;
using namespace aahbath;
using Catch::Approx;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const fs::path p =
      fs::temp_directory_path() / ("aahbath_cli_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + AAHBATH_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

int run_cli_capture(const std::string& args, const fs::path& outfile) {
  const std::string cmd = std::string("\"") + AAHBATH_CLI_PATH + "\" " + args + " > \"" +
                          outfile.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  REQUIRE(f.good());
  f << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& row) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : row) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("config parsing", "[cli]") {
  std::istringstream in(
      "# comment line\n"
      "\n"
      "task = bic\n"
      "n_sites=12\n"
      "delta = 4\n"
      "beta = golden\n"
      "phi = 0.4pi\n"
      "boundary = open\n"
      "eta=0.2\n"
      "meta_tool_version=9.9.9\n"
      "include_positive = yes\n");
  Scenario sc = parse_scenario(in);
  CHECK(sc.task == Task::bic);
  CHECK(sc.lattice.n_sites == 12);
  CHECK(sc.lattice.delta == 4.0);
  CHECK(sc.beta_golden);
  CHECK(sc.lattice.beta == Approx(golden_beta()).epsilon(1e-15));
  CHECK(sc.lattice.phi == Approx(0.4 * std::numbers::pi).epsilon(1e-15));
  CHECK(sc.bath.eta == 0.2);
  CHECK(sc.include_positive);

  std::istringstream angles("phi = -pi\nfrom = pi\nto = 2pi\n");
  Scenario sa = parse_scenario(angles);
  CHECK(sa.lattice.phi == Approx(-std::numbers::pi).epsilon(1e-15));
  CHECK(sa.from == Approx(std::numbers::pi).epsilon(1e-15));
  CHECK(sa.to == Approx(2.0 * std::numbers::pi).epsilon(1e-15));

  std::istringstream bad1("nonsense_key = 1\n");
  CHECK_THROWS_AS(parse_scenario(bad1), domain_error);
  std::istringstream bad2("task: bound\n");
  CHECK_THROWS_AS(parse_scenario(bad2), domain_error);
  std::istringstream bad3("eta = abc\n");
  CHECK_THROWS_AS(parse_scenario(bad3), domain_error);
  std::istringstream bad4("boundary = closed\n");
  CHECK_THROWS_AS(parse_scenario(bad4), domain_error);
  std::istringstream bad5("task = frobnicate\n");
  CHECK_THROWS_AS(parse_scenario(bad5), domain_error);

  Scenario ev;
  ev.task = Task::evolve;
  ev.dt = 0.05;
  CHECK_THROWS_AS(validate_scenario(ev), domain_error);
  Scenario sw;
  sw.task = Task::sweep;
  sw.points = 1;
  CHECK_THROWS_AS(validate_scenario(sw), domain_error);
  Scenario om;
  om.task = Task::bound;
  validate_scenario(om);
  CHECK(om.omega_max == Approx(200.0));  // resolves to 20 * omega_c

  // the manifest float format round-trips exactly
  for (double x : {-23.177675018357533, 0.1, 1.0 / 3.0, 2.3075274544187847e-15})
    CHECK(std::stod(detail::fmt(x)) == x);
}

TEST_CASE("thread budget control", "[cli]") {
  ::setenv("AAHBATH_THREADS", "3", 1);
  CHECK(thread_budget() == 3);
  ::setenv("AAHBATH_THREADS", "abc", 1);
  CHECK_THROWS_AS(thread_budget(), domain_error);
  ::setenv("AAHBATH_THREADS", "0", 1);
  CHECK_THROWS_AS(thread_budget(), domain_error);
  ::unsetenv("AAHBATH_THREADS");
  CHECK(thread_budget() >= 1);
}

TEST_CASE("bound task produces stable artifacts", "[cli]") {
  const fs::path dir = fresh_dir("bound");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, "task = bound\nphi = -pi\nout_dir = " + (dir / "out1").string() + "\n");
  REQUIRE(run_cli("run \"" + cfg.string() + "\"") == 0);
  for (const char* name : {"manifest", "summary.txt", "spectrum.csv", "bound_states.csv"})
    CHECK(fs::exists(dir / "out1" / name));

  const std::string bs = read_file(dir / "out1" / "bound_states.csv");
  const auto rows = lines_of(bs);
  REQUIRE(rows.size() == 4);  // header + ground + two gap states
  CHECK(rows[0] == "kind,energy,ipr,d,sum_alpha,loc_site,gap_lo,gap_hi,d_raw,flags");
  const auto ground = split_csv(rows[1]);
  REQUIRE(ground.size() == 10);
  CHECK(ground[0] == "dbs_ground");
  CHECK(std::stod(ground[1]) == Approx(-23.177675018357533).margin(1e-9));
  CHECK(std::stod(ground[3]) == Approx(0.40506970260798014).margin(1e-9));
  CHECK(ground[5] == "99");
  CHECK(split_csv(rows[2])[0] == "dbs_gap");

  const auto spec_rows = lines_of(read_file(dir / "out1" / "spectrum.csv"));
  REQUIRE(spec_rows.size() == 100);

  // rerun into a second directory: analysis outputs are byte-identical
  REQUIRE(run_cli("run \"" + cfg.string() + "\" --override out_dir=" +
                  (dir / "out2").string()) == 0);
  CHECK(read_file(dir / "out2" / "bound_states.csv") == bs);
  CHECK(read_file(dir / "out2" / "spectrum.csv") == read_file(dir / "out1" / "spectrum.csv"));
  CHECK(read_file(dir / "out2" / "summary.txt") == read_file(dir / "out1" / "summary.txt"));
}

TEST_CASE("spectrum task tags edge modes", "[cli]") {
  const fs::path dir = fresh_dir("spectrum");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, "task = spectrum\nphi = -pi\nout_dir = " + (dir / "out").string() + "\n");
  REQUIRE(run_cli("run \"" + cfg.string() + "\"") == 0);
  const auto rows = lines_of(read_file(dir / "out" / "spectrum.csv"));
  REQUIRE(rows.size() == 100);
  CHECK(rows[0] == "index,energy,ipr,w,edge_tag");
  int tagged = 0;
  std::string tagged_index;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto f = split_csv(rows[i]);
    REQUIRE(f.size() == 5);
    if (!f[4].empty()) {
      ++tagged;
      tagged_index = f[0];
      CHECK(f[4] == "right");
    }
  }
  CHECK(tagged == 1);
  CHECK(tagged_index == "33");  // 1-based
}

TEST_CASE("manifest replays the run", "[cli]") {
  const fs::path dir = fresh_dir("manifest");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg,
             "task = bic\n"
             "delta = 4\n"
             "beta = golden\n"
             "phi = 0.4pi\n"
             "out_dir = " + (dir / "a").string() + "\n");
  REQUIRE(run_cli("run \"" + cfg.string() + "\"") == 0);
  const std::string manifest = read_file(dir / "a" / "manifest");
  CHECK(manifest.find("beta=golden\n") != std::string::npos);
  CHECK(manifest.find("task=bic\n") != std::string::npos);
  CHECK(manifest.find("meta_tool_version=") != std::string::npos);
  CHECK(manifest.find("meta_schema_bound_states=2") != std::string::npos);
  CHECK(manifest.find("meta_timing_seconds=") != std::string::npos);

  // the manifest itself is a valid config; replay reproduces the analysis
  REQUIRE(run_cli("run \"" + (dir / "a" / "manifest").string() + "\" --override out_dir=" +
                  (dir / "b").string()) == 0);
  CHECK(read_file(dir / "b" / "bound_states.csv") == read_file(dir / "a" / "bound_states.csv"));
  CHECK(read_file(dir / "b" / "spectrum.csv") == read_file(dir / "a" / "spectrum.csv"));
  const std::string m2 = read_file(dir / "b" / "manifest");
  CHECK(m2.substr(0, m2.find("out_dir=")) == manifest.substr(0, manifest.find("out_dir=")));
}

TEST_CASE("failed runs leave no artifacts", "[cli]") {
  const fs::path dir = fresh_dir("fail");
  const fs::path cfg = dir / "bad.cfg";
  const std::string out = (dir / "out").string();

  write_file(cfg, "task = bound\neta = -0.5\nout_dir = " + out + "\n");
  CHECK(run_cli("run \"" + cfg.string() + "\"") == 2);
  CHECK(!fs::exists(dir / "out"));

  write_file(cfg, "task = bound\nbogus = 1\nout_dir = " + out + "\n");
  CHECK(run_cli("run \"" + cfg.string() + "\"") == 2);

  write_file(cfg, "task = evolve\ndt = 0.05\nout_dir = " + out + "\n");
  CHECK(run_cli("run \"" + cfg.string() + "\"") == 2);

  write_file(cfg, "task = evolve\nn0 = 200\nout_dir = " + out + "\n");
  CHECK(run_cli("run \"" + cfg.string() + "\"") == 2);

  CHECK(run_cli("run \"" + (dir / "missing.cfg").string() + "\"") == 2);

  // numerical failure while running: exit 3, no partial artifacts
  write_file(cfg, "task = evolve\nn_sites = 12\neta = 10\ndt = 0.02\nt_max = 50\nn0 = 1\n"
                  "out_dir = " + out + "\n");
  CHECK(run_cli("run \"" + cfg.string() + "\"") == 3);
  CHECK(!fs::exists(dir / "out"));
}

TEST_CASE("evolve task writes a trajectory", "[cli]") {
  const fs::path dir = fresh_dir("evolve");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg,
             "task = evolve\nn_sites = 12\nn0 = 1\nt_max = 2\ndt = 0.01\nstride = 20\n"
             "out_dir = " + (dir / "out").string() + "\n");
  REQUIRE(run_cli("run \"" + cfg.string() + "\"") == 0);
  const auto rows = lines_of(read_file(dir / "out" / "trajectory.csv"));
  REQUIRE(rows.size() == 12);  // header + steps 0,20,...,200
  CHECK(rows[0] == "t,survival,ipr,norm,fidelity");
  const auto first = split_csv(rows[1]);
  REQUIRE(first.size() == 5);
  CHECK(first[0] == "0");
  CHECK(std::stod(first[1]) == Approx(1.0).margin(1e-12));  // eigenbasis round trip
  CHECK(std::stod(first[3]) == Approx(1.0).margin(1e-12));
  const auto last = split_csv(rows.back());
  CHECK(std::stod(last[0]) == Approx(2.0).margin(1e-12));
  CHECK(std::stod(last[3]) <= 1.0 + 1e-9);  // norm decays under coupling
}

TEST_CASE("sweep rows match standalone bound runs", "[cli]") {
  const fs::path dir = fresh_dir("sweep");
  const fs::path cfg = dir / "sweep.cfg";
  write_file(cfg,
             "task = sweep\nn_sites = 12\nfrom = 0\nto = 0.5pi\npoints = 2\n"
             "out_dir = " + (dir / "sw").string() + "\n");
  REQUIRE(run_cli("run \"" + cfg.string() + "\"") == 0);
  const std::string sweep_csv = read_file(dir / "sw" / "sweep_levels.csv");
  const auto sweep_rows = lines_of(sweep_csv);
  CHECK(sweep_rows[0] == "phi,source,energy,ipr,d,loc_site,edge_tag,status");
  // 2 points x (12 lattice rows + bound rows), no error rows
  CHECK(sweep_rows.size() >= 1 + 2 * 13);
  for (size_t i = 1; i < sweep_rows.size(); ++i)
    CHECK(split_csv(sweep_rows[i]).back().rfind("error", 0) != 0);

  int point = 0;
  for (const std::string& phi : {std::string("0"), std::string("0.5pi")}) {
    const fs::path c2 = dir / ("bound_" + std::to_string(point) + ".cfg");
    const fs::path o2 = dir / ("bound_out_" + std::to_string(point));
    write_file(c2, "task = bound\nn_sites = 12\nphi = " + phi +
                       "\nout_dir = " + o2.string() + "\n");
    REQUIRE(run_cli("run \"" + c2.string() + "\"") == 0);
    const auto rows = lines_of(read_file(o2 / "bound_states.csv"));
    REQUIRE(rows.size() >= 2);
    for (size_t i = 1; i < rows.size(); ++i) {
      const auto f = split_csv(rows[i]);
      // identical value string appears in the sweep output for this source
      const std::string needle = "," + f[0] + "," + f[1] + ",";
      CHECK(sweep_csv.find(needle) != std::string::npos);
    }
    ++point;
  }
}

TEST_CASE("kernelcheck and oracle tasks", "[cli]") {
  const fs::path dir = fresh_dir("aux");
  fs::path cfg = dir / "kc.cfg";
  write_file(cfg, "task = kernelcheck\nt_max = 2\npoints = 8\nout_dir = " +
                      (dir / "kc").string() + "\n");
  REQUIRE(run_cli("run \"" + cfg.string() + "\"") == 0);
  const auto kc_rows = lines_of(read_file(dir / "kc" / "kernel_check.csv"));
  REQUIRE(kc_rows.size() == 10);
  CHECK(kc_rows[0] == "t,f_re,f_im,quad_re,quad_im,abs_err");
  for (size_t i = 1; i < kc_rows.size(); ++i)
    CHECK(std::stod(split_csv(kc_rows[i]).back()) <= 1e-6);

  cfg = dir / "or.cfg";
  write_file(cfg, "task = oracle\nn_sites = 12\nm_modes = 400\nout_dir = " +
                      (dir / "or").string() + "\n");
  REQUIRE(run_cli("run \"" + cfg.string() + "\"") == 0);
  const auto or_rows = lines_of(read_file(dir / "or" / "oracle_check.csv"));
  CHECK(or_rows[0] == "kind,energy,energy_ed,abs_diff");
  REQUIRE(or_rows.size() >= 2);
  for (size_t i = 1; i < or_rows.size(); ++i)
    CHECK(std::stod(split_csv(or_rows[i]).back()) <= 0.05);
}

TEST_CASE("version and argument errors", "[cli]") {
  const fs::path dir = fresh_dir("misc");
  const fs::path out = dir / "version.txt";
  REQUIRE(run_cli_capture("--version", out) == 0);
  CHECK(read_file(out).find("1.0.0") != std::string::npos);
  CHECK(run_cli("") != 0);
  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("run") != 0);
}
