#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gmmnls/bench/reporting.hpp"
#include "gmmnls/bench/toy.hpp"

using namespace gmmnls;
using namespace gmmnls::bench;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "gmmnls_reporting_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<TrialRecord> sample_records() {
  std::vector<TrialRecord> records;
  Rng rng(71);
  int id = 0;
  for (int t = 0; t < 25; ++t) {
    for (MixtureMethod m : {MixtureMethod::MaxMixture, MixtureMethod::HessianSumMixture}) {
      TrialRecord r;
      r.trial_id = id;
      r.method = m;
      r.converged = rng.uniform() < 0.9;
      r.success = r.converged && rng.uniform() < 0.8;
      r.iterations = 1 + static_cast<int>(rng.uniform() * 40.0);
      r.err_norm = rng.uniform(0.0, 0.3);
      r.err_rot_deg = rng.uniform(0.0, 2.0);
      r.err_trans_m = rng.uniform(0.0, 0.05);
      r.anees_term = (t % 7 == 0) ? undefined() : rng.uniform(0.2, 2.0);
      r.wall_time_s = rng.uniform(1e-4, 1e-2);
      records.push_back(r);
    }
    ++id;
  }
  return records;
}

}  // namespace

TEST_CASE("format_double round-trips exactly", "[reporting]") {
  Rng rng(73);
  for (int i = 0; i < 2000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-12.0, 12.0));
    const std::string s = format_double(v);
    double back = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), back);
    REQUIRE(res.ec == std::errc());
    REQUIRE(back == v);
  }
  REQUIRE(format_double(undefined()) == "nan");
}

TEST_CASE("trial CSV writes and reads back identically", "[reporting]") {
  const auto records = sample_records();
  const auto path = temp_dir() / "trials.csv";
  write_trials_csv(path, records);
  const auto back = read_trials_csv(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    REQUIRE(back[i].trial_id == records[i].trial_id);
    REQUIRE(back[i].method == records[i].method);
    REQUIRE(back[i].converged == records[i].converged);
    REQUIRE(back[i].success == records[i].success);
    REQUIRE(back[i].iterations == records[i].iterations);
    REQUIRE(back[i].err_norm == records[i].err_norm);  // exact: shortest round-trip
    if (std::isnan(records[i].anees_term)) {
      REQUIRE(std::isnan(back[i].anees_term));
    } else {
      REQUIRE(back[i].anees_term == records[i].anees_term);
    }
    REQUIRE(back[i].wall_time_s == records[i].wall_time_s);
  }
}

TEST_CASE("aggregate JSON equals recomputation from the CSV", "[reporting]") {
  const auto records = sample_records();
  const std::vector<MixtureMethod> methods = {MixtureMethod::MaxMixture,
                                              MixtureMethod::HessianSumMixture};
  const auto aggregates = aggregate_all(methods, records);
  const auto dir = temp_dir();
  write_trials_csv(dir / "agg_trials.csv", records);
  write_aggregates_json(dir / "agg.json", aggregates);

  // recompute everything from the CSV alone
  const auto csv_records = read_trials_csv(dir / "agg_trials.csv");
  const auto recomputed = aggregate_all(methods, csv_records);

  std::ifstream in(dir / "agg.json");
  nlohmann::json loaded;
  in >> loaded;
  for (const auto& agg : recomputed) {
    const auto& entry = loaded.at(to_string(agg.method));
    REQUIRE(entry.at("rmse").get<double>() == Catch::Approx(agg.rmse).margin(1e-12));
    REQUIRE(entry.at("success_rate").get<double>() ==
            Catch::Approx(agg.success_rate).margin(1e-12));
    REQUIRE(entry.at("avg_iterations").get<double>() ==
            Catch::Approx(agg.avg_iterations).margin(1e-12));
    REQUIRE(entry.at("wall_time_s").get<double>() ==
            Catch::Approx(agg.wall_time_s).margin(1e-12));
    REQUIRE(entry.at("n_trials").get<int>() == agg.n_trials);
    REQUIRE(entry.at("n_anees_excluded").get<int>() == agg.n_anees_excluded);
    if (std::isnan(agg.anees)) {
      REQUIRE(entry.at("anees").is_null());
    } else {
      REQUIRE(entry.at("anees").get<double>() == Catch::Approx(agg.anees).margin(1e-12));
    }
  }
}

TEST_CASE("markdown tables carry the expected layout", "[reporting]") {
  const auto records = sample_records();
  const std::vector<MixtureMethod> methods = {MixtureMethod::MaxMixture,
                                              MixtureMethod::HessianSumMixture};
  const auto aggregates = aggregate_all(methods, records);

  const std::string toy = markdown_table(StudyKind::Toy, aggregates);
  REQUIRE(toy.find("| Method | RMSE (m) | Avg Iter. | Time (s) | Succ. Rate [%] |") !=
          std::string::npos);
  REQUIRE(toy.find("| MM |") != std::string::npos);
  REQUIRE(toy.find("| HSM |") != std::string::npos);

  const std::string psr = markdown_table(StudyKind::PointSetRegistration, aggregates);
  REQUIRE(psr.find("| Method | RMSE (deg) | RMSE (m) | ANEES | Avg Iter. | Time (s) |") !=
          std::string::npos);
}

TEST_CASE("undefined metrics serialize as null and dash", "[reporting]") {
  TrialAggregate agg;
  agg.method = MixtureMethod::SumMixture;
  agg.rmse = 0.1;
  agg.n_trials = 5;
  const auto json = aggregates_to_json({agg});
  REQUIRE(json.at("sm").at("anees").is_null());
  REQUIRE(json.at("sm").at("rmse_rot_deg").is_null());
  const std::string md = markdown_table(StudyKind::PointSetRegistration, {agg});
  REQUIRE(md.find(" - |") != std::string::npos);
}

TEST_CASE("sweep CSV has the documented header", "[reporting]") {
  std::vector<HessianSweepRow> rows(3);
  rows[0].x = -1.0;
  rows[1].x = 0.0;
  rows[2].x = 1.0;
  const auto path = temp_dir() / "sweep.csv";
  write_sweep_csv(path, rows);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  REQUIRE(header == "x,h_exact,h_mm,h_sm,h_msm,h_hsm");
  int count = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++count;
  }
  REQUIRE(count == 3);
}

TEST_CASE("unwritable paths raise", "[reporting][errors]") {
  REQUIRE_THROWS_AS(write_trials_csv("/proc/definitely/not/writable/x.csv", {}),
                    std::runtime_error);
}
