#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "hybridsim_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(HYBRIDSIM_PATH) + " " + args + " >" + (kTmp / "stdout.txt").string() +
                          " 2>" + (kTmp / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Scratch {
  Scratch() {
    fs::remove_all(kTmp);
    fs::create_directories(kTmp);
  }
  ~Scratch() { fs::remove_all(kTmp); }
};

}  // namespace

TEST_CASE("bracket-check output is byte-identical across runs") {
  Scratch s;
  const std::string opts = " --set bracket_check.states=3 --set bracket_check.n=48 --seed 9";
  REQUIRE(run("bracket-check --out " + (kTmp / "a").string() + opts) == 0);
  REQUIRE(run("bracket-check --out " + (kTmp / "b").string() + opts) == 0);
  const std::string a = slurp(kTmp / "a" / "bracket_check.txt");
  CHECK(!a.empty());
  CHECK(a == slurp(kTmp / "b" / "bracket_check.txt"));
  CHECK(a.find("result: pass") != std::string::npos);
  CHECK(fs::exists(kTmp / "a" / "resolved_config.json"));
}

TEST_CASE("simulate writes both solver records and they are deterministic") {
  Scratch s;
  const std::string opts = " --solver both --set grid.n_q=48 --set grid.n_x=48 --set run.t_end=0.1 "
                           "--set run.sample_dt=0.05";
  REQUIRE(run("simulate --out " + (kTmp / "a").string() + opts) == 0);
  REQUIRE(run("simulate --out " + (kTmp / "b").string() + opts) == 0);
  CHECK(slurp(kTmp / "a" / "grid.csv") == slurp(kTmp / "b" / "grid.csv"));
  CHECK(fs::exists(kTmp / "a" / "moments.csv"));
  // The echoed configuration reproduces the run.
  REQUIRE(run("simulate --config " + (kTmp / "a" / "resolved_config.json").string() + " --out " +
              (kTmp / "c").string()) == 0);
  CHECK(slurp(kTmp / "a" / "grid.csv") == slurp(kTmp / "c" / "grid.csv"));
}

TEST_CASE("signaling writes a report") {
  Scratch s;
  REQUIRE(run("signaling --solver moments --out " + (kTmp / "r").string()) == 0);
  const std::string summary = slurp(kTmp / "r" / "summary.txt");
  CHECK(summary.find("detected: true") != std::string::npos);
  CHECK(fs::exists(kTmp / "r" / "series_B.csv"));
}

TEST_CASE("configuration problems exit with status 2") {
  Scratch s;
  const fs::path bad = kTmp / "bad.json";
  std::ofstream(bad) << "{ \"grid\": { \"n_q\": }";
  CHECK(run("simulate --config " + bad.string() + " --out " + kTmp.string()) == 2);
  CHECK(run("simulate --set hamiltonian.mq=2 --out " + kTmp.string()) == 2);
  CHECK(slurp(kTmp / "stderr.txt").find("did you mean") != std::string::npos);
  CHECK(run("simulate --set hamiltonian.m_q=-1 --out " + kTmp.string()) == 2);
  CHECK(run("simulate --solver warp --out " + kTmp.string()) == 2);
  CHECK(run("simulate --config " + (kTmp / "missing.json").string()) == 2);
  CHECK(run("teleport") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("numerical failures exit with status 3") {
  Scratch s;
  // A converging classical ensemble focuses at t = 0.2.
  CHECK(run("simulate --solver grid --set grid.n_q=48 --set grid.n_x=48 --set initial.k_xx=-5 "
            "--set run.t_end=0.5 --out " + kTmp.string()) == 3);
  CHECK(slurp(kTmp / "stderr.txt").find("Caustic") != std::string::npos);
}

TEST_CASE("a step above the stability bound is a configuration error") {
  Scratch s;
  CHECK(run("simulate --set integrator.dt=1 --out " + kTmp.string()) == 2);
}
