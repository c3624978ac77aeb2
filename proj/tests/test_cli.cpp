#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "otp/data.hpp"

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code;
  std::string out;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(OTP_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf;
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) {
    out += buf.data();
  }
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// timing lines vary run to run and are excluded from golden comparisons
std::string strip_timings(const std::string& out) {
  std::istringstream in(out);
  std::ostringstream kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("timings:", 0) != 0) {
      kept << line << "\n";
    }
  }
  return kept.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("otp_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) {
    n += c == '\n';
  }
  return n;
}

}  // namespace

TEST_CASE("gen: writes two files with one row per sample") {
  TempDir dir;
  const auto r = run_cli("gen --family gaussian-toy --n 300 --d 2 --seed 7 --out-x " +
                         dir.file("x.csv") + " --out-y " + dir.file("y.csv"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("n = 300") != std::string::npos);
  CHECK(count_lines(read_file(dir.file("x.csv"))) == 301);  // header + 300 samples
  CHECK(count_lines(read_file(dir.file("y.csv"))) == 301);
}

TEST_CASE("gen: rejects n = 0") {
  TempDir dir;
  const auto r = run_cli("gen --family gaussian-toy --n 0 --d 2 --seed 1 --out-x " +
                         dir.file("x.csv") + " --out-y " + dir.file("y.csv"));
  CHECK(r.exit_code != 0);
}

TEST_CASE("gen: identical flags give identical files") {
  TempDir dir;
  const std::string flags = "gen --family uniform-random --n 25 --d 3 --seed 11 ";
  run_cli(flags + "--out-x " + dir.file("x1.csv") + " --out-y " + dir.file("y1.csv"));
  run_cli(flags + "--out-x " + dir.file("x2.csv") + " --out-y " + dir.file("y2.csv"));
  CHECK(read_file(dir.file("x1.csv")) == read_file(dir.file("x2.csv")));
  CHECK(read_file(dir.file("y1.csv")) == read_file(dir.file("y2.csv")));
}

TEST_CASE("solve: zero-noise rotated copy agrees with the oracle") {
  TempDir dir;
  run_cli("gen --family rotated-copy --n 30 --d 3 --seed 5 --out-x " + dir.file("x.csv") +
          " --out-y " + dir.file("y.csv"));
  const auto r = run_cli("solve --source " + dir.file("x.csv") + " --target " +
                         dir.file("y.csv") +
                         " --steps 4 --solver exact --compare-oracle --out-report " +
                         dir.file("report.json") + " --out-trace " + dir.file("trace.csv"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("oracle agreement = yes") != std::string::npos);

  // trace has header plus h + 1 rows
  CHECK(count_lines(read_file(dir.file("trace.csv"))) == 6);

  // every printed numeric is also in the report
  const auto j = nlohmann::json::parse(read_file(dir.file("report.json")));
  CHECK(j.contains("kappa"));
  CHECK(j.contains("lower_bound"));
  CHECK(j.contains("oracle_kappa"));
  CHECK(j.contains("oracle_agreement"));
  CHECK(j.contains("timings_ms"));
}

TEST_CASE("solve: deterministic stdout apart from timings") {
  TempDir dir;
  run_cli("gen --family gaussian-toy --n 20 --d 2 --seed 9 --out-x " + dir.file("x.csv") +
          " --out-y " + dir.file("y.csv"));
  const std::string cmd = "solve --source " + dir.file("x.csv") + " --target " +
                          dir.file("y.csv") + " --steps 4 --solver exact";
  const auto a = run_cli(cmd);
  const auto b = run_cli(cmd);
  CHECK(a.exit_code == 0);
  CHECK(strip_timings(a.out) == strip_timings(b.out));
  CHECK(strip_timings(a.out).find("lower bound = ") != std::string::npos);
  CHECK(strip_timings(a.out).find("final kappa = ") != std::string::npos);
}

TEST_CASE("solve: randomized svd mode") {
  TempDir dir;
  run_cli("gen --family gaussian-toy --n 16 --d 2 --seed 2 --out-x " + dir.file("x.csv") +
          " --out-y " + dir.file("y.csv"));
  const std::string base = "solve --source " + dir.file("x.csv") + " --target " +
                           dir.file("y.csv") + " --steps 4 --solver exact";
  const auto full = run_cli(base + " --svd full");
  const auto rnd = run_cli(base + " --svd randomized:16:7");
  CHECK(rnd.exit_code == 0);
  // exact F makes the final plan independent of the sketch
  auto kappa_line = [](const std::string& out) {
    const auto pos = out.find("final kappa = ");
    return out.substr(pos, out.find('\n', pos) - pos);
  };
  CHECK(kappa_line(full.out) == kappa_line(rnd.out));

  const auto bad = run_cli(base + " --svd randomized:4");
  CHECK(bad.exit_code == 1);
}

TEST_CASE("solve: non-power-of-two steps warns") {
  TempDir dir;
  run_cli("gen --family gaussian-toy --n 10 --d 2 --seed 1 --out-x " + dir.file("x.csv") +
          " --out-y " + dir.file("y.csv"));
  const auto r = run_cli("solve --source " + dir.file("x.csv") + " --target " +
                         dir.file("y.csv") + " --steps 3 --solver exact");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("not a power of 2") != std::string::npos);
}

TEST_CASE("solve: distinct exit codes for file and shape errors") {
  TempDir dir;
  const auto missing = run_cli("solve --source " + dir.file("nope.csv") + " --target " +
                               dir.file("nope2.csv"));
  CHECK(missing.exit_code == 2);

  run_cli("gen --family gaussian-toy --n 10 --d 2 --seed 1 --out-x " + dir.file("x.csv") +
          " --out-y " + dir.file("ignored.csv"));
  run_cli("gen --family gaussian-toy --n 12 --d 2 --seed 1 --out-x " + dir.file("x2.csv") +
          " --out-y " + dir.file("ignored2.csv"));
  const auto mismatch =
      run_cli("solve --source " + dir.file("x.csv") + " --target " + dir.file("x2.csv"));
  CHECK(mismatch.exit_code == 3);

  std::ofstream(dir.file("bad.csv")) << "x0\nabc\n";
  const auto parse =
      run_cli("solve --source " + dir.file("bad.csv") + " --target " + dir.file("bad.csv"));
  CHECK(parse.exit_code == 2);
}

TEST_CASE("study: single h matches the solve trace") {
  TempDir dir;
  run_cli("gen --family gaussian-toy --n 25 --d 2 --seed 4 --out-x " + dir.file("x.csv") +
          " --out-y " + dir.file("y.csv"));
  run_cli("solve --source " + dir.file("x.csv") + " --target " + dir.file("y.csv") +
          " --steps 4 --solver exact --out-trace " + dir.file("trace.csv"));
  const auto r = run_cli("study --source " + dir.file("x.csv") + " --target " +
                         dir.file("y.csv") + " --steps-list 4 --solver exact --out " +
                         dir.file("study.csv"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("h = 4: max jump = ") != std::string::npos);

  // the kappa_after values from the solve trace all appear in the study file
  const std::string study = read_file(dir.file("study.csv"));
  std::istringstream trace(read_file(dir.file("trace.csv")));
  std::string line;
  std::getline(trace, line);  // header
  while (std::getline(trace, line)) {
    const auto last_comma = line.rfind(',');
    CHECK(study.find(line.substr(last_comma + 1)) != std::string::npos);
  }
}

TEST_CASE("study: empty steps list is a usage error") {
  TempDir dir;
  run_cli("gen --family gaussian-toy --n 10 --d 2 --seed 4 --out-x " + dir.file("x.csv") +
          " --out-y " + dir.file("y.csv"));
  const auto r = run_cli("study --source " + dir.file("x.csv") + " --target " +
                         dir.file("y.csv") + " --steps-list , --solver exact --out " +
                         dir.file("study.csv"));
  CHECK(r.exit_code == 1);
}

TEST_CASE("bench: emits the schema with match column") {
  TempDir dir;
  const auto r = run_cli(
      "bench --n-list 20,40 --d 3 --family rotated-copy --solver exact --repeats 1 --out " +
      dir.file("bench.csv"));
  CHECK(r.exit_code == 0);
  const std::string csv = read_file(dir.file("bench.csv"));
  CHECK(csv.find("n,solver,t_homotopy_ms,t_exact_ms,kappa_homotopy,kappa_exact,match") !=
        std::string::npos);
  CHECK(csv.find("20,exact") != std::string::npos);
  CHECK(csv.find("40,exact") != std::string::npos);
  CHECK(csv.find("false") == std::string::npos);  // exact solver always matches
  CHECK(r.out.find("empirical scaling exponent") != std::string::npos);
}
