#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dbwave/config.hpp"
#include "dbwave/report.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace dbwave;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Run the orchestrator binary, returning its exit status; stdout+stderr go
/// to <dir>/log.txt so diagnostics can be inspected.
int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = std::string("\"") + DBWAVE_CLI_PATH + "\" " + args + " > \"" +
                          (dir / "log.txt").string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  REQUIRE(raw != -1);
  REQUIRE(WIFEXITED(raw));
  return WEXITSTATUS(raw);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("cli_scratch") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kSimulateConfig = R"({
  "run_name": "sim",
  "seed": 7,
  "mesh": {"n_r": 2, "n_theta": 8},
  "operator": {"alpha": 1.0, "omega": 1.0},
  "nonlinearity": {"f": {"family": "sine_gordon"}, "g": {"family": "sine_gordon"}},
  "stepper": {"dt": 0.05, "T": 0.5},
  "initial": {"family": "random_smooth", "radius": 1.0, "seed": 3}
})";

}  // namespace

// --------------------------------------------------------------------------
// configuration layer
// --------------------------------------------------------------------------

TEST_CASE("configuration documents parse with defaults and strict keys") {
  const RunConfig dflt = parse_config("{}", "inline");
  CHECK(dflt.run_name == "run");
  CHECK(dflt.mesh.n_r == 4);
  CHECK(dflt.mesh.n_theta == 16);
  CHECK(dflt.op.alpha == 1.0);
  CHECK(dflt.stepper.dt == 0.01);
  CHECK(dflt.initial.family == InitialFamily::random_smooth);

  const RunConfig cfg = parse_config(kSimulateConfig, "inline");
  CHECK(cfg.run_name == "sim");
  CHECK(cfg.seed == 7);
  CHECK(cfg.mesh.n_theta == 8);
  CHECK(cfg.nonlinearity.f.family == Family::sine_gordon);
  CHECK(cfg.stepper.T == 0.5);
  CHECK(cfg.initial.seed == 3);

  CHECK_THROWS_AS(parse_config(R"({"mesh": {"n_rr": 2}})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"stepper": {"dt": "fast"}})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"initial": {"family": "wavelet"}})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"stepper": {"scheme": "euler"}})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"operator": {"alpha": 1.5}})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"operator": {"omega": 0}})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"stepper": {"dt": 0}})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"run_name": "a/b"})", "x"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": -4})", "x"), ConfigError);

  // The offending path appears in the diagnostic.
  try {
    parse_config(R"({"nonlinearity": {"f": {"famly": "zero"}}})", "doc");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/nonlinearity/f") != std::string::npos);
    CHECK(std::string(e.what()).find("famly") != std::string::npos);
  }
}

TEST_CASE("malformed text is reported with line and column") {
  try {
    parse_config("{\n  \"seed\": oops}", "doc.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("doc.json:2:") != std::string::npos);
    CHECK(std::string(e.what()).find("malformed") != std::string::npos);
  }
}

TEST_CASE("overrides edit the raw document and re-validate") {
  json doc = parse_document(kSimulateConfig, "inline");
  apply_override(doc, "operator.alpha=0.25");
  apply_override(doc, "stepper.T=0");
  apply_override(doc, "run_name=patched");
  apply_override(doc, "experiment.radii=[1,2]");
  const RunConfig cfg = config_from_json(doc, "inline");
  CHECK(cfg.op.alpha == 0.25);
  CHECK(cfg.stepper.T == 0.0);
  CHECK(cfg.run_name == "patched");  // bare word became a string
  CHECK(cfg.experiment.at("radii").size() == 2);

  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigError);
  apply_override(doc, "operator.alpha=7");
  CHECK_THROWS_AS(config_from_json(doc, "inline"), ConfigError);
}

TEST_CASE("resolved configs round-trip and hash stably") {
  const RunConfig cfg = parse_config(kSimulateConfig, "inline");
  const json r1 = cfg.resolved();
  const RunConfig back = config_from_json(r1, "resolved");
  CHECK(back.resolved() == r1);
  CHECK(back.content_hash() == cfg.content_hash());
  CHECK(cfg.content_hash().size() == 16);

  RunConfig tweaked = cfg;
  tweaked.stepper.dt = 0.025;
  CHECK(tweaked.content_hash() != cfg.content_hash());
}

// --------------------------------------------------------------------------
// report layer
// --------------------------------------------------------------------------

TEST_CASE("csv cells survive a parse round-trip at 17 digits") {
  for (double x : {1.0 / 3.0, 0.1, -2.5e-300, 6.0221407599999999e23, 0.0, -0.0, 1e-17}) {
    const std::string s = format_g17(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
    CHECK(s.find(',') == std::string::npos);
  }
}

TEST_CASE("csv tables are rectangular with newline endings") {
  const std::string csv = csv_from_columns({"a", "b"}, {{1.0, 2.0}, {3.0, 4.0}});
  CHECK(csv == "a,b\n1,3\n2,4\n");
  CHECK_THROWS_AS(csv_from_columns({"a", "b"}, {{1.0}, {2.0, 3.0}}), std::invalid_argument);
  CHECK_THROWS_AS(csv_from_columns({"a"}, {{1.0}, {2.0}}), std::invalid_argument);

  std::map<std::string, std::vector<double>> series;
  series["z_last"] = {5.0};
  series["t"] = {0.0};
  series["alpha"] = {1.0};
  CHECK(series_csv(series) == "t,alpha,z_last\n0,1,5\n");
}

TEST_CASE("summaries carry claims, flags, and fitted scalars") {
  ProbeReport rep;
  rep.claim = "sample claim";
  rep.pass = true;
  rep.scalars["x"] = 2.0;
  rep.notes.push_back("note");
  const json p = probe_summary(rep);
  CHECK(p.at("claim") == "sample claim");
  CHECK(p.at("pass") == true);
  CHECK(p.at("scalars").at("x") == 2.0);
  CHECK(p.at("notes").size() == 1);

  ScanReport scan;
  scan.claim = "scan claim";
  scan.method = "m";
  scan.grid = {1.0, 2.0};
  scan.values = {3.0, 4.0};
  scan.slope = -0.5;
  const json s = scan_summary(scan);
  CHECK(s.at("claim") == "scan claim");
  CHECK(s.at("slope") == -0.5);
  CHECK(s.at("grid").size() == 2);
}

TEST_CASE("content hashing matches the reference fnv1a vectors") {
  CHECK(hash_hex("") == "cbf29ce484222325");
  CHECK(hash_hex("a") == "af63dc4c8601ec8c");
  CHECK(hash_hex("hello") == hash_hex("hello"));
  CHECK(hash_hex("hello") != hash_hex("hellp"));
}

// --------------------------------------------------------------------------
// orchestrator end to end
// --------------------------------------------------------------------------

TEST_CASE("simulate writes a manifest and an identity row at T = 0") {
  const fs::path dir = fresh_dir("sim_t0");
  write_file((dir / "cfg.json").string(), kSimulateConfig);
  const int code = run_cli(dir, "simulate \"" + (dir / "cfg.json").string() + "\" --out \"" +
                                    (dir / "out").string() + "\" --set stepper.T=0");
  CHECK(code == 0);

  const std::string csv = slurp(dir / "out/sim/trajectory.csv");
  // Header plus exactly one sample: the initial state itself.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.rfind("t,E,h0_norm", 0) == 0);
  std::istringstream rows(csv);
  std::string header, row;
  std::getline(rows, header);
  std::getline(rows, row);
  CHECK(row.rfind("0,", 0) == 0);                       // t = 0
  CHECK(row.find(",1,0,0,0") != std::string::npos);     // h0 = radius 1, zero dissipation

  const json manifest = json::parse(slurp(dir / "out/sim/manifest.json"));
  CHECK(manifest.at("subcommand") == "simulate");
  CHECK(manifest.at("pass") == true);
  CHECK(manifest.at("config").at("stepper").at("T") == 0.0);
  CHECK(manifest.at("overrides").size() == 1);
  CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
  const auto outputs = manifest.at("outputs").get<std::vector<std::string>>();
  CHECK(outputs == std::vector<std::string>{"trajectory.csv", "summary.json"});
}

TEST_CASE("repeated runs emit byte-identical artifacts") {
  const fs::path dir = fresh_dir("determinism");
  write_file((dir / "cfg.json").string(), kSimulateConfig);
  const std::string cfg = "\"" + (dir / "cfg.json").string() + "\"";
  CHECK(run_cli(dir, "simulate " + cfg + " --out \"" + (dir / "o1").string() + "\"") == 0);
  CHECK(run_cli(dir, "simulate " + cfg + " --out \"" + (dir / "o2").string() + "\"") == 0);
  CHECK(slurp(dir / "o1/sim/trajectory.csv") == slurp(dir / "o2/sim/trajectory.csv"));
  CHECK(slurp(dir / "o1/sim/summary.json") == slurp(dir / "o2/sim/summary.json"));
  CHECK(slurp(dir / "o1/sim/manifest.json") == slurp(dir / "o2/sim/manifest.json"));
}

TEST_CASE("nonlinearity validation passes the reference config and fails a violator") {
  const fs::path dir = fresh_dir("validate");
  write_file((dir / "ok.json").string(), R"({
    "run_name": "ok",
    "nonlinearity": {"f": {"family": "sine_gordon"}, "g": {"family": "sine_gordon"}}
  })");
  CHECK(run_cli(dir, "validate-nonlinearity \"" + (dir / "ok.json").string() + "\" --out \"" +
                         (dir / "out").string() + "\"") == 0);
  const json ok = json::parse(slurp(dir / "out/ok/summary.json"));
  CHECK(ok.at("pass") == true);
  CHECK(ok.at("scalars").at("sign_ok_f") == 1.0);

  // f(s) = -5 s violates every declared sign margin.
  write_file((dir / "bad.json").string(), R"({
    "run_name": "bad",
    "nonlinearity": {"f": {"family": "polynomial", "coeffs": [0, -5]}}
  })");
  CHECK(run_cli(dir, "validate-nonlinearity \"" + (dir / "bad.json").string() + "\" --out \"" +
                         (dir / "out").string() + "\"") == 2);
  const json bad = json::parse(slurp(dir / "out/bad/summary.json"));
  CHECK(bad.at("pass") == false);
}

TEST_CASE("transitivity reproduces the reference composition") {
  const fs::path dir = fresh_dir("transitivity");
  write_file((dir / "cfg.json").string(), R"({
    "run_name": "t",
    "experiment": {"C": 2, "K": 1, "C1": 3, "a1": 1, "C2": 1, "a2": 1,
                   "expect_constant": 7, "expect_rate": 0.3333333333333333}
  })");
  CHECK(run_cli(dir, "transitivity \"" + (dir / "cfg.json").string() + "\" --out \"" +
                         (dir / "out").string() + "\"") == 0);
  const json s = json::parse(slurp(dir / "out/t/summary.json"));
  CHECK(s.at("scalars").at("constant") == 7.0);
  CHECK(s.at("scalars").at("rate") == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(s.at("scalars").at("rate_swapped") == s.at("scalars").at("rate"));
}

TEST_CASE("configuration problems exit with status one and a diagnostic") {
  const fs::path dir = fresh_dir("config_errors");
  write_file((dir / "unknown.json").string(), R"({"stepperr": {"dt": 0.1}})");
  CHECK(run_cli(dir, "simulate \"" + (dir / "unknown.json").string() + "\"") == 1);
  CHECK(slurp(dir / "log.txt").find("stepperr") != std::string::npos);

  write_file((dir / "broken.json").string(), "{\"seed\": }");
  CHECK(run_cli(dir, "simulate \"" + (dir / "broken.json").string() + "\"") == 1);
  CHECK(slurp(dir / "log.txt").find("malformed") != std::string::npos);

  CHECK(run_cli(dir, "simulate \"" + (dir / "missing.json").string() + "\"") == 1);
  CHECK(run_cli(dir, "simulate") == 1);  // required argument absent

  // Unknown experiment keys are validated by the subcommand that reads them.
  write_file((dir / "expkey.json").string(), R"({"experiment": {"radius_grid": [1]}})");
  CHECK(run_cli(dir, "absorb \"" + (dir / "expkey.json").string() + "\"") == 1);
  CHECK(slurp(dir / "log.txt").find("radius_grid") != std::string::npos);
}

TEST_CASE("numeric breakdown exits with status two and names the probe") {
  const fs::path dir = fresh_dir("breakdown");
  write_file((dir / "cfg.json").string(), R"({
    "run_name": "explode",
    "mesh": {"n_r": 2, "n_theta": 8},
    "nonlinearity": {"f": {"family": "polynomial", "coeffs": [0, 0, 0, 1000000.0]}},
    "stepper": {"dt": 1.0, "T": 2.0, "newton_max": 2, "max_dt_halvings": 0},
    "initial": {"family": "random_smooth", "radius": 5.0, "seed": 1}
  })");
  CHECK(run_cli(dir, "simulate \"" + (dir / "cfg.json").string() + "\" --out \"" +
                         (dir / "out").string() + "\"") == 2);
  const std::string log = slurp(dir / "log.txt");
  CHECK(log.find("simulate") != std::string::npos);
  CHECK(log.find("failed") != std::string::npos);
}

TEST_CASE("the environment variable supplies the default output root") {
  const fs::path dir = fresh_dir("env_root");
  write_file((dir / "cfg.json").string(), kSimulateConfig);
  const std::string cmd = "DBWAVE_OUT_ROOT=\"" + (dir / "envout").string() + "\" \"" +
                          DBWAVE_CLI_PATH + "\" simulate \"" + (dir / "cfg.json").string() +
                          "\" --set stepper.T=0.05 > \"" + (dir / "log.txt").string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  REQUIRE(raw != -1);
  CHECK(WEXITSTATUS(raw) == 0);
  CHECK(fs::exists(dir / "envout/sim/manifest.json"));
}
