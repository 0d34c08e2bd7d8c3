#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = std::string(CLI_BINARY) + " " + args + " >" + out_file.string() +
                          " 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  return res;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "robust_sysid_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

const char* kLipschitzConfig = R"(
[run]
seed = 21

[system]
n = 3
basis = multiquadric
ground_truth = spectral_uniform
rho = 1.0
T = 500

[attack]
model = lipschitz_subgaussian
p = 0.7
)";

const char* kWitnessConfig = R"(
[run]
seed = 1

[system]
n = 1
basis = linear
ground_truth = explicit
a_bar = 5
T = 3

[attack]
model = unit_sphere
p = 0.5
)";

const char* kWitnessTrajectory =
    "t,x_1,attacked,dbar_1\n"
    "0,0,1,1\n"
    "1,1,0,0\n"
    "2,5,1,1\n"
    "3,26,0,0\n";

}  // namespace

TEST_CASE("simulate writes one row per state") {
  const fs::path dir = fresh_dir("simulate");
  spit(dir / "cfg.ini", kLipschitzConfig);
  const RunResult res =
      run_cli("simulate --config " + (dir / "cfg.ini").string() + " --out " + dir.string(), dir);
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("attacks:") != std::string::npos);
  const std::string traj = slurp(dir / "trajectory.csv");
  CHECK(count_lines(traj) == 502);  // header + 501 states
}

TEST_CASE("simulate with certain attacks flags every step") {
  const fs::path dir = fresh_dir("simulate_p1");
  spit(dir / "cfg.ini", kWitnessConfig);
  const RunResult res = run_cli("simulate --config " + (dir / "cfg.ini").string() + " --out " +
                                    dir.string() + " --set attack.p=1",
                                dir);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(dir / "trajectory.csv");
  std::string line;
  std::getline(in, line);  // header
  for (int t = 0; t <= 3; ++t) {
    REQUIRE(std::getline(in, line));
    std::stringstream fields(line);
    std::string field;
    std::getline(fields, field, ',');  // t
    std::getline(fields, field, ',');  // x_1
    std::getline(fields, field, ',');  // attacked
    CHECK(field == (t < 3 ? "1" : "0"));
  }
}

TEST_CASE("missing keys are reported by name with exit code 2") {
  const fs::path dir = fresh_dir("missing_key");
  spit(dir / "cfg.ini", "[system]\nn = 1\nbasis = linear\nground_truth = explicit\na_bar = 5\nT = 3\n[attack]\nmodel = unit_sphere\n");
  const RunResult res =
      run_cli("simulate --config " + (dir / "cfg.ini").string() + " --out " + dir.string(), dir);
  CHECK(res.exit_code == 2);
  CHECK(res.err.find("attack.p") != std::string::npos);
}

TEST_CASE("estimate reproduces the witness optimum from a file") {
  const fs::path dir = fresh_dir("estimate");
  spit(dir / "cfg.ini", kWitnessConfig);
  spit(dir / "traj.csv", kWitnessTrajectory);
  const RunResult res = run_cli("estimate --config " + (dir / "cfg.ini").string() + " --traj " +
                                    (dir / "traj.csv").string() + " --out " + dir.string(),
                                dir);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(dir / "estimate.csv");
  std::string header, row;
  REQUIRE(std::getline(in, header));
  CHECK(header == "Tprime,objective,converged,iterations,a_11");
  REQUIRE(std::getline(in, row));
  std::stringstream fields(row);
  std::string t_prime, obj, conv, iters, a11;
  std::getline(fields, t_prime, ',');
  std::getline(fields, obj, ',');
  std::getline(fields, conv, ',');
  std::getline(fields, iters, ',');
  std::getline(fields, a11, ',');
  CHECK(t_prime == "3");
  CHECK(std::abs(std::stod(obj) - 1.2) <= 1e-9);
  CHECK(std::abs(std::stod(a11) - 5.2) <= 1e-6);
}

TEST_CASE("certify reports the witness violation") {
  const fs::path dir = fresh_dir("certify");
  spit(dir / "cfg.ini", kWitnessConfig);
  spit(dir / "traj.csv", kWitnessTrajectory);
  const RunResult res = run_cli("certify --config " + (dir / "cfg.ini").string() + " --traj " +
                                    (dir / "traj.csv").string() + " --out " + dir.string(),
                                dir);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(dir / "certificate.csv");
  std::string header, row;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, row));
  // Tprime,loss_gap,solution_gap,cert_value,uniq_margin,nec_slack,rank,is_optimal,is_unique
  CHECK(row.find("3,") == 0);
  CHECK(row.find(",-4,") != std::string::npos);
  CHECK(row.substr(row.size() - 4) == ",0,0");
}

TEST_CASE("certify accepts an attack-free trace and reports optimality") {
  const fs::path dir = fresh_dir("certify_clean");
  spit(dir / "cfg.ini", kWitnessConfig);
  spit(dir / "traj.csv", "t,x_1,attacked,dbar_1\n0,0,0,0\n1,0,0,0\n2,0,0,0\n3,0,0,0\n");
  const RunResult res = run_cli("certify --config " + (dir / "cfg.ini").string() + " --traj " +
                                    (dir / "traj.csv").string() + " --out " + dir.string(),
                                dir);
  REQUIRE(res.exit_code == 0);
  std::ifstream in(dir / "certificate.csv");
  std::string header, row;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, row));
  CHECK(row.find("3,") == 0);
  CHECK(row.find(",1,") != std::string::npos);  // is_optimal
}

TEST_CASE("trajectory files without an attack trace are usage errors") {
  const fs::path dir = fresh_dir("certify_no_trace");
  spit(dir / "cfg.ini", kWitnessConfig);
  spit(dir / "traj.csv", "t,x_1\n0,0\n1,1\n2,5\n3,26\n");
  const RunResult res = run_cli("certify --config " + (dir / "cfg.ini").string() + " --traj " +
                                    (dir / "traj.csv").string() + " --out " + dir.string(),
                                dir);
  CHECK(res.exit_code == 2);
  CHECK(res.err.find("attack trace") != std::string::npos);
}

TEST_CASE("empty trajectory files are usage errors") {
  const fs::path dir = fresh_dir("estimate_empty");
  spit(dir / "cfg.ini", kWitnessConfig);
  spit(dir / "traj.csv", "");
  const RunResult res = run_cli("estimate --config " + (dir / "cfg.ini").string() + " --traj " +
                                    (dir / "traj.csv").string() + " --out " + dir.string(),
                                dir);
  CHECK(res.exit_code == 2);
}

TEST_CASE("experiment then report, deterministically") {
  const fs::path dir = fresh_dir("experiment");
  std::string config = R"(
[run]
seed = 5

[experiment]
scenario = lipschitz_spectral
grid = 0.5
seeds = 2
prefix_stride = 50

[certificate]
restarts = 2
iters = 200
)";
  spit(dir / "cfg.ini", config);
  const fs::path out1 = dir / "out1";
  const fs::path out2 = dir / "out2";
  const RunResult res1 = run_cli("experiment --config " + (dir / "cfg.ini").string() + " --out " +
                                     out1.string(),
                                 dir);
  REQUIRE(res1.exit_code == 0);
  const fs::path series = out1 / "lipschitz_spectral" / "rho=0.5" / "series.csv";
  REQUIRE(fs::exists(series));
  REQUIRE(fs::exists(out1 / "lipschitz_spectral" / "summary.csv"));

  const RunResult res2 = run_cli("experiment --config " + (dir / "cfg.ini").string() + " --out " +
                                     out2.string(),
                                 dir);
  REQUIRE(res2.exit_code == 0);
  CHECK(slurp(series) == slurp(out2 / "lipschitz_spectral" / "rho=0.5" / "series.csv"));
  CHECK(slurp(out1 / "lipschitz_spectral" / "summary.csv") ==
        slurp(out2 / "lipschitz_spectral" / "summary.csv"));

  const RunResult rep1 = run_cli("report --out " + out1.string(), dir);
  REQUIRE(rep1.exit_code == 0);
  const fs::path figure = out1 / "lipschitz_spectral" / "figure.svg";
  REQUIRE(fs::exists(figure));
  const std::string svg_first = slurp(figure);
  const RunResult rep2 = run_cli("report --out " + out1.string(), dir);
  REQUIRE(rep2.exit_code == 0);
  CHECK(slurp(figure) == svg_first);
  CHECK(svg_first.find("<svg") == 0);

  const fs::path empty = fresh_dir("empty_out");
  const RunResult rep_empty = run_cli("report --out " + empty.string(), dir);
  CHECK(rep_empty.exit_code == 1);
}

TEST_CASE("unknown flags exit with the usage code") {
  const fs::path dir = fresh_dir("usage");
  const RunResult res = run_cli("simulate --bogus", dir);
  CHECK(res.exit_code == 2);
}
