#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifndef AUTODML_CLI_PATH
#error "AUTODML_CLI_PATH must point at the built binary"
#endif
#ifndef AUTODML_FIXTURE_DIR
#error "AUTODML_FIXTURE_DIR must point at tests/data"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code;
  std::string stdout_text;
  std::string stderr_text;
};

RunResult run_cli(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path();
  const fs::path out = tmp / "cli_stdout.txt";
  const fs::path err = tmp / "cli_stderr.txt";
  const std::string cmd = std::string(AUTODML_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  RunResult res;
  res.exit_code = WEXITSTATUS(raw);
  res.stdout_text = slurp(out);
  res.stderr_text = slurp(err);
  return res;
}

std::string fixture(const std::string& name) {
  return (fs::path(AUTODML_FIXTURE_DIR) / name).string();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("fit on the bundled fixture produces a full report") {
  const RunResult res =
      run_cli("fit --data " + fixture("synth200.csv") + " --target late --seed 3");
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(res.stdout_text);
  CHECK(report["method"] == "auto");
  CHECK(report["theta"].size() == 1);
  CHECK(report["se"].size() == 1);
  CHECK(report["diagnostics"]["per_fold"].size() == 5);
  CHECK(report["config"]["target"] == "late");
  CHECK(report["seed"] == 3);
  CHECK(report.contains("version"));
}

TEST_CASE("missing data file exits with the data code") {
  const RunResult res = run_cli("fit --data /nonexistent/nope.csv --target late");
  CHECK(res.exit_code == 3);
  const auto err = nlohmann::json::parse(res.stderr_text);
  CHECK(err["error"]["code"] == 3);
  CHECK(err["error"]["kind"] == "data");
}

TEST_CASE("descending cdf grid exits with the config code") {
  const RunResult res = run_cli("fit --data " + fixture("synth200.csv") +
                                " --target cdf --grid 2,1,0");
  CHECK(res.exit_code == 2);
  const auto err = nlohmann::json::parse(res.stderr_text);
  CHECK(err["error"]["kind"] == "config");
}

TEST_CASE("cdf fit includes a band") {
  const RunResult res = run_cli("fit --data " + fixture("synth200.csv") +
                                " --target cdf --grid -1,0,1,2 --seed 5 --bootstrap-draws 2000");
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(res.stdout_text);
  CHECK(report["theta"].size() == 8);
  CHECK(report["band"]["lower"].size() == 8);
  CHECK(report["band"]["c"].get<double>() > 1.9);
}

TEST_CASE("simulate emits the expected csv shape") {
  const RunResult res = run_cli("simulate --design appendix-f --reps 10 --seed 1 --n 300");
  REQUIRE(res.exit_code == 0);
  CHECK(count_lines(res.stdout_text) == 17);  // header + 8 beta + 8 delta
  CHECK(res.stdout_text.rfind("method,parameter,y,median,q10,q90,failures", 0) == 0);
}

TEST_CASE("simulate rejects an unknown design") {
  const RunResult res = run_cli("simulate --design nope --reps 10");
  CHECK(res.exit_code == 2);
}

TEST_CASE("truth prints the oracle table") {
  const RunResult res = run_cli("truth");
  REQUIRE(res.exit_code == 0);
  CHECK(count_lines(res.stdout_text) == 17);
  // spot value at y=0 for delta
  std::istringstream in(res.stdout_text);
  std::string line;
  bool found = false;
  while (std::getline(in, line)) {
    if (line.rfind("delta,0,", 0) == 0) {
      const double v = std::stod(line.substr(8));
      CHECK(v == Catch::Approx(0.19509).margin(5e-4));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("test-instruments with an identical second instrument gives W=0") {
  const fs::path cfg = fs::temp_directory_path() / "ti.cfg";
  {
    std::ofstream out(cfg);
    out << "z2_column = z\n";  // same column as z
  }
  const RunResult res = run_cli("test-instruments --data " + fixture("synth200.csv") +
                                " --config " + cfg.string() + " --seed 4");
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(res.stdout_text);
  CHECK(report["wald"]["W"] == 0.0);
  CHECK(report["wald"]["p"] == 1.0);
}

TEST_CASE("reports are byte-identical across reruns and thread counts") {
  const std::string base = "fit --data " + fixture("synth200.csv") +
                           " --target cdf --grid -1,0,1 --seed 9 --bootstrap-draws 2000";
  const RunResult a = run_cli(base + " --threads 1");
  const RunResult b = run_cli(base + " --threads 1");
  const RunResult c = run_cli(base + " --threads 4");
  REQUIRE(a.exit_code == 0);
  CHECK(a.stdout_text == b.stdout_text);
  CHECK(a.stdout_text == c.stdout_text);

  const RunResult s1 = run_cli("simulate --reps 6 --seed 2 --n 300 --threads 1");
  const RunResult s2 = run_cli("simulate --reps 6 --seed 2 --n 300 --threads 3");
  REQUIRE(s1.exit_code == 0);
  CHECK(s1.stdout_text == s2.stdout_text);
}

TEST_CASE("config file values are overridden by flags and unknown keys rejected") {
  const fs::path cfg = fs::temp_directory_path() / "fit.cfg";
  {
    std::ofstream out(cfg);
    out << "# comment\n";
    out << "target = late\n";
    out << "seed = 1\n";
  }
  const RunResult res = run_cli("fit --data " + fixture("synth200.csv") + " --config " +
                                cfg.string() + " --seed 12");
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(res.stdout_text);
  CHECK(report["seed"] == 12);  // flag wins

  {
    std::ofstream out(cfg);
    out << "no_such_key = 5\n";
  }
  const RunResult bad = run_cli("fit --data " + fixture("synth200.csv") + " --config " +
                                cfg.string());
  CHECK(bad.exit_code == 2);
}

TEST_CASE("kappa method produces a point report") {
  const RunResult res =
      run_cli("fit --data " + fixture("synth200.csv") + " --target late --method kappa");
  REQUIRE(res.exit_code == 0);
  const auto report = nlohmann::json::parse(res.stdout_text);
  CHECK(report["method"] == "kappa");
  CHECK(report["theta"].size() == 1);
  CHECK_FALSE(report.contains("se"));
}
