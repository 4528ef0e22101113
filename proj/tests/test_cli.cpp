#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gmmnls/bench/reporting.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return GMMNLS_CLI_PATH; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gmmnls_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

/// CSV line with the wall_time_s column (the last one) removed; timing is
/// real measurement and is the one field exempt from byte-level determinism.
std::string strip_timing(const std::string& line) {
  const auto pos = line.rfind(',');
  return line.substr(0, pos);
}

}  // namespace

TEST_CASE("toy runs twice with identical outputs modulo timing", "[cli]") {
  const fs::path dir_a = fresh_dir("toy_a");
  const fs::path dir_b = fresh_dir("toy_b");
  const std::string base =
      "toy --dim 1 --scale desk --seed 7 --formats csv,json,md --out ";
  REQUIRE(run_cli(base + dir_a.string()) == 0);
  REQUIRE(run_cli(base + dir_b.string()) == 0);

  const auto lines_a = read_lines(dir_a / "toy1d_trials.csv");
  const auto lines_b = read_lines(dir_b / "toy1d_trials.csv");
  REQUIRE(lines_a.size() == lines_b.size());
  REQUIRE(lines_a.size() == 1 + 100 * 100 * 4);
  for (std::size_t i = 0; i < lines_a.size(); ++i) {
    REQUIRE(strip_timing(lines_a[i]) == strip_timing(lines_b[i]));
  }
  REQUIRE(fs::exists(dir_a / "toy1d_aggregate.json"));
  REQUIRE(fs::exists(dir_a / "toy1d_table.md"));
}

TEST_CASE("aggregate JSON recomputes from the trial CSV", "[cli]") {
  const fs::path dir = fresh_dir("psr_agg");
  REQUIRE(run_cli("psr --space se2 --scale desk --seed 3 --out " + dir.string()) == 0);
  const auto records = gmmnls::bench::read_trials_csv(dir / "psr2d_trials.csv");
  const std::vector<gmmnls::MixtureMethod> methods = {
      gmmnls::MixtureMethod::MaxMixture, gmmnls::MixtureMethod::SumMixture,
      gmmnls::MixtureMethod::MaxSumMixture, gmmnls::MixtureMethod::HessianSumMixture};
  const auto recomputed = gmmnls::bench::aggregate_all(methods, records);

  std::ifstream in(dir / "psr2d_aggregate.json");
  nlohmann::json loaded;
  in >> loaded;
  for (const auto& agg : recomputed) {
    const auto& entry = loaded.at(to_string(agg.method));
    REQUIRE(entry.at("rmse").get<double>() == Catch::Approx(agg.rmse).margin(1e-12));
    REQUIRE(entry.at("avg_iterations").get<double>() ==
            Catch::Approx(agg.avg_iterations).margin(1e-12));
    REQUIRE(entry.at("success_rate").get<double>() ==
            Catch::Approx(agg.success_rate).margin(1e-12));
    if (!entry.at("anees").is_null()) {
      REQUIRE(entry.at("anees").get<double>() == Catch::Approx(agg.anees).margin(1e-12));
    }
  }
}

TEST_CASE("hessian-sweep emits the documented 1001-row CSV", "[cli]") {
  const fs::path dir = fresh_dir("sweep");
  REQUIRE(run_cli("hessian-sweep --out " + dir.string()) == 0);
  const auto lines = read_lines(dir / "hessian_sweep.csv");
  REQUIRE(lines.size() == 1 + 1001);
  REQUIRE(lines.front() == "x,h_exact,h_mm,h_sm,h_msm,h_hsm");
}

TEST_CASE("selftest exits zero", "[cli]") {
  REQUIRE(run_cli("selftest") == 0);
}

TEST_CASE("unknown methods and bad flags exit nonzero", "[cli][errors]") {
  const fs::path dir = fresh_dir("bad");
  REQUIRE(run_cli("toy --methods bogus --out " + dir.string()) != 0);
  REQUIRE(run_cli("toy --dim 5 --out " + dir.string()) != 0);
  REQUIRE(run_cli("definitely-not-a-command") != 0);
}

TEST_CASE("environment variable seeds the default only", "[cli]") {
  const fs::path dir_env = fresh_dir("env_seed");
  const fs::path dir_flag = fresh_dir("flag_seed");
  const fs::path dir_plain = fresh_dir("plain_seed");
  const std::string tail = " > /dev/null 2>&1";

  // GMMNLS_SEED changes the default...
  std::string cmd = std::string("GMMNLS_SEED=9 ") + cli_path() +
                    " psr --scale desk --seed 9 --out " + dir_flag.string() + tail;
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  cmd = std::string("GMMNLS_SEED=9 ") + cli_path() + " psr --scale desk --out " +
        dir_env.string() + tail;
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  // ...and an explicit --seed wins over the environment.
  cmd = std::string("GMMNLS_SEED=1234 ") + cli_path() + " psr --scale desk --seed 9 --out " +
        dir_plain.string() + tail;
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);

  const auto a = read_lines(dir_env / "psr2d_trials.csv");
  const auto b = read_lines(dir_flag / "psr2d_trials.csv");
  const auto c = read_lines(dir_plain / "psr2d_trials.csv");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(strip_timing(a[i]) == strip_timing(b[i]));
    REQUIRE(strip_timing(a[i]) == strip_timing(c[i]));
  }
}

TEST_CASE("config file supplies flags and flags win", "[cli]") {
  const fs::path dir = fresh_dir("config");
  const fs::path cfg = dir / "run.ini";
  {
    std::ofstream out(cfg);
    out << "seed=11\n";
    out << "scale=desk\n";
    out << "out=" << (dir / "from_config").string() << "\n";
  }
  REQUIRE(run_cli("psr --config " + cfg.string()) == 0);
  REQUIRE(fs::exists(dir / "from_config" / "psr2d_trials.csv"));

  // flag overrides the config file's out directory
  REQUIRE(run_cli("psr --config " + cfg.string() + " --out " + (dir / "flag_wins").string()) ==
          0);
  REQUIRE(fs::exists(dir / "flag_wins" / "psr2d_trials.csv"));

  const auto a = read_lines(dir / "from_config" / "psr2d_trials.csv");
  const auto b = read_lines(dir / "flag_wins" / "psr2d_trials.csv");
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(strip_timing(a[i]) == strip_timing(b[i]));
  }
}
