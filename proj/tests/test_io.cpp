#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nhqlif/io.hpp"

using namespace nhqlif;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("nhqlif_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string header_of(const std::string& csv) { return csv.substr(0, csv.find('\n')); }

std::string error_of(const std::vector<Setting>& settings) {
  try {
    apply_settings(RunConfig{}, settings);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("empty config gives the standard defaults") {
  const RunConfig c = apply_settings(RunConfig{}, parse_config_text("", "empty.cfg"));
  CHECK(c.params.t1 == 1.0);
  CHECK(c.params.t2 == 0.5);
  CHECK(c.params.gamma == 0.0);
  CHECK(c.params.sites() == 42);
  CHECK(c.j0 == 20);
  CHECK(c.d == 6);
  CHECK(c.dt == 0.05);
  CHECK(c.t_max == 20.0);
  CHECK(c.epsilon == 1e-6);
  CHECK(c == RunConfig{});
}

TEST_CASE("config parsing: comments, whitespace and errors name their origin") {
  const auto s = parse_config_text("# comment\n\n  gamma = 0.3   # inline\nexperiment=lightcone\n",
                                   "run.cfg");
  REQUIRE(s.size() == 2);
  CHECK(s[0].key == "gamma");
  CHECK(s[0].value == "0.3");
  CHECK(s[0].origin == "run.cfg:3");
  const RunConfig c = apply_settings(RunConfig{}, s);
  CHECK(c.params.gamma == 0.3);
  CHECK(c.experiment == Experiment::lightcone);

  CHECK_THROWS_AS(parse_config_text("gamma 0.3\n", "a.cfg"), ConfigError);
  CHECK(error_of(parse_config_text("t1 = 1\nbogus = 2\n", "b.cfg")).find("b.cfg:2") !=
        std::string::npos);
  CHECK(error_of({{"dt", "0.0x", "--dt"}}).find("--dt") != std::string::npos);
  CHECK(error_of({{"cells", "2.5", "c.cfg:1"}}).find("c.cfg:1") != std::string::npos);
  CHECK(error_of({{"experiment", "plot", "--x"}}).find("unknown experiment") != std::string::npos);
}

TEST_CASE("gamma = 1.5 is rejected") {
  const std::string msg = error_of(parse_config_text("gamma = 1.5\n", "g.cfg"));
  CHECK(msg.find("g.cfg:1") != std::string::npos);
  CHECK(msg.find("gamma") != std::string::npos);
  CHECK(error_of({{"d", "5", "--d"}}).find("--d") != std::string::npos);
  CHECK(error_of({{"j0", "40", "--j0"}}).find("--j0") != std::string::npos);
  CHECK(error_of({{"experiment", "lightcone", "--e"}, {"j0", "30", "--j0"}}).find("--j0") !=
        std::string::npos);
}

TEST_CASE("flags override the file") {
  TempDir dir("precedence");
  write(dir.path / "run.cfg", "dt = 0.1\ngamma = 0.2\n");
  const RunConfig c = parse_config(dir.path / "run.cfg", {{"dt", "0.02", "--dt"}});
  CHECK(c.dt == 0.02);
  CHECK(c.params.gamma == 0.2);
  CHECK_THROWS_AS(parse_config(dir.path / "missing.cfg"), ConfigError);
}

TEST_CASE("rendered config parses back to an equal RunConfig") {
  RunConfig c;
  c.experiment = Experiment::xi_scan;
  c.params.gamma = 0.1 + 0.2;  // not representable in few digits
  c.params.t2 = 0.7;
  c.dt = 0.025;
  c.epsilon = 3e-7;
  c.out_dir = "results/run 1";
  CHECK(apply_settings(RunConfig{}, parse_config_text(render_config(c), "r")) == c);
}

TEST_CASE("number formatting and CSV tables") {
  CHECK(format_number(0.1 + 0.2) == "0.3");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(-2.5e-20) == "-2.5e-20");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CsvTable t({"a", "b"});
  t.add_row({"1", "2"});
  CHECK(t.str() == "a,b\n1,2\n");
  CHECK_THROWS(t.add_row({"1"}));
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("experiment CSV layouts") {
  RunConfig c;
  c.experiment = Experiment::scissors;
  const RunResult sc = run_experiment(c, 1);
  REQUIRE(sc.files.size() == 3);
  for (const auto& [name, csv] : sc.files) CHECK(header_of(csv) == "time,T_RL,T_LR,delta");
  // gamma = 0: the delta column vanishes before boundary effects (t <= 8).
  std::istringstream rows(sc.files.at("scissors_gamma+0.00.csv"));
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (std::stod(cells[0]) > 8.0) break;
    CHECK(std::abs(std::stod(cells[3])) < 1e-12);
  }
  // residuals for gamma = 0.3, L = 42 are all well below the tolerance
  for (const auto& r : sc.residuals) CHECK(r.residual < 1e-8);

  c.experiment = Experiment::tables;
  const RunResult tb = run_experiment(c, 1);
  CHECK(header_of(tb.files.at("table1.csv")) == "gamma,r,xi,direction,ipr_theory,ipr_numeric");
  CHECK(tb.files.at("table1.csv").find("\n-0.2,1.22474487139,4.93260692475,right,") !=
        std::string::npos);
  CHECK(header_of(tb.files.at("table2.csv")) == "t2,phase,v_max_numeric,v_max_formula");

  c.experiment = Experiment::spectrum;
  c.params.gamma = 0.3;
  const RunResult sp = run_experiment(c, 1);
  CHECK(header_of(sp.files.at("spectrum.csv")) == "index,re_E,im_E,ipr");
  REQUIRE(sp.residuals.size() == 1);
  CHECK(sp.residuals[0].residual < 1e-8);
}

TEST_CASE("lightcone CSV leaves absent onsets empty") {
  OnsetCurve curve;
  curve.gamma = 0.3;
  curve.distances = {2, 4};
  curve.onset_times = {0.5, std::nullopt};
  curve.v_eff = 2.0;
  CHECK(lightcone_csv({curve}) == "gamma,d,t_star,v_eff_fit\n0.3,2,0.5,2\n0.3,4,,2\n");
}

TEST_CASE("outputs are deterministic across reruns and worker counts") {
  RunConfig c;
  c.experiment = Experiment::sublattice;
  const RunResult a = run_experiment(c, 1);
  const RunResult b = run_experiment(c, 4);
  const RunResult again = run_experiment(c, 4);
  CHECK(a.files == b.files);
  CHECK(b.files == again.files);
}

TEST_CASE("emit_csv and manifest") {
  TempDir dir("emit");
  RunConfig c;
  c.experiment = Experiment::scissors;
  c.params.gamma = 0.3;
  c.out_dir = (dir.path / "out").string();
  const RunResult result = run_experiment(c, 2);
  const auto files = emit_csv(c, result);
  const fs::path manifest = emit_json_manifest(c, result, files, 0.25);

  nlohmann::json m;
  std::ifstream(manifest) >> m;
  CHECK(m["version"] == kVersion);
  CHECK(m["experiment"] == "scissors");
  CHECK(m["wall_seconds"] == 0.25);
  REQUIRE(m["files"].size() == result.files.size());
  for (const auto& f : m["files"]) {
    const std::string name = f["name"];
    REQUIRE(result.files.count(name) == 1);
    const std::string content = slurp(fs::path(c.out_dir) / name);
    CHECK(content == result.files.at(name));
    CHECK(f["sha256"] == sha256_hex(content));
    CHECK(f["bytes"] == content.size());
  }
  CHECK(m["biorth_residuals"].size() == 3);
  for (const auto& r : m["biorth_residuals"]) {
    CHECK(r["residual"].get<double>() < 1e-8);
    CHECK(r["oracle_fallback"] == false);
  }
  CHECK(config_from_manifest(manifest) == c);

  // Checksums track content: a one-byte change changes the digest.
  std::string tweaked = result.files.begin()->second;
  tweaked.back() = ' ';
  CHECK(sha256_hex(tweaked) != files.front().sha256);
  CHECK(sha256_hex(result.files.begin()->second) == files.front().sha256);
}

TEST_CASE("unwritable output path raises IoError") {
  TempDir dir("unwritable");
  write(dir.path / "blocker", "x");
  RunConfig c;
  c.out_dir = (dir.path / "blocker" / "sub").string();
  RunResult r;
  r.files["a.csv"] = "a\n";
  CHECK_THROWS_AS(emit_csv(c, r), IoError);
}

TEST_CASE("command-line exit codes") {
  const char* cli = std::getenv("NHQLIF_CLI");
  if (cli == nullptr) {
    MESSAGE("NHQLIF_CLI not set; skipping CLI checks");
    return;
  }
  TempDir dir("cli");
  const auto run = [&](const std::string& args) {
    const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const std::string out = (dir.path / "out").string();
  CHECK(run("tables --out " + out) == 0);
  CHECK(fs::exists(fs::path(out) / "table1.csv"));
  CHECK(fs::exists(fs::path(out) / "manifest.json"));
  CHECK(run("tables --gamma 1.5 --out " + out) == 1);
  CHECK(run("nonsense --out " + out) == 1);
  CHECK(run("tables --bogus 3") == 1);
  write(dir.path / "blocker", "x");
  CHECK(run("tables --out " + (dir.path / "blocker" / "sub").string()) == 3);
  write(dir.path / "run.cfg", "experiment = spectrum\ngamma = 0.2\n");
  CHECK(run("--config " + (dir.path / "run.cfg").string() + " --out " + out) == 0);
  CHECK(fs::exists(fs::path(out) / "spectrum.csv"));
}
