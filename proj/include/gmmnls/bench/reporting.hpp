#ifndef GMMNLS_BENCH_REPORTING_HPP
#define GMMNLS_BENCH_REPORTING_HPP

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmmnls/bench/metrics.hpp"
#include "gmmnls/bench/sweep.hpp"

namespace gmmnls::bench {

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace reporting_detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string scientific(double v, int digits) {
  if (std::isnan(v)) return "-";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*e", digits, v);
  return buf;
}

inline std::string upper_name(MixtureMethod m) {
  std::string s = to_string(m);
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace reporting_detail

inline const char* kTrialCsvHeader =
    "trial_id,method,converged,success,iterations,rmse,rmse_rot_deg,rmse_trans_m,"
    "anees_term,wall_time_s";

inline void write_trials_csv(const std::filesystem::path& path,
                             const std::vector<TrialRecord>& records) {
  std::ofstream out = reporting_detail::open_for_write(path);
  out << kTrialCsvHeader << "\n";
  for (const auto& r : records) {
    out << r.trial_id << ',' << to_string(r.method) << ',' << (r.converged ? 1 : 0) << ','
        << (r.success ? 1 : 0) << ',' << r.iterations << ',' << format_double(r.err_norm)
        << ',' << format_double(r.err_rot_deg) << ',' << format_double(r.err_trans_m) << ','
        << format_double(r.anees_term) << ',' << format_double(r.wall_time_s) << "\n";
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trial CSV");
  if (line != kTrialCsvHeader) throw std::runtime_error("unexpected trial CSV header");
  std::vector<TrialRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 10) throw std::runtime_error("malformed trial CSV row");
    TrialRecord r;
    r.trial_id = std::stoi(fields[0]);
    r.method = parse_method(fields[1]);
    r.converged = fields[2] == "1";
    r.success = fields[3] == "1";
    r.iterations = std::stoi(fields[4]);
    r.err_norm = std::stod(fields[5]);
    r.err_rot_deg = std::stod(fields[6]);
    r.err_trans_m = std::stod(fields[7]);
    r.anees_term = std::stod(fields[8]);
    r.wall_time_s = std::stod(fields[9]);
    records.push_back(r);
  }
  return records;
}

inline nlohmann::json aggregates_to_json(const std::vector<TrialAggregate>& aggregates) {
  const auto value_or_null = [](double v) {
    return std::isnan(v) ? nlohmann::json() : nlohmann::json(v);
  };
  nlohmann::json out = nlohmann::json::object();
  for (const auto& a : aggregates) {
    nlohmann::json entry;
    entry["rmse"] = value_or_null(a.rmse);
    entry["rmse_rot_deg"] = value_or_null(a.rmse_rot_deg);
    entry["rmse_trans_m"] = value_or_null(a.rmse_trans_m);
    entry["anees"] = value_or_null(a.anees);
    entry["success_rate"] = a.success_rate;
    entry["avg_iterations"] = a.avg_iterations;
    entry["wall_time_s"] = a.wall_time_s;
    entry["n_trials"] = a.n_trials;
    entry["n_anees_excluded"] = a.n_anees_excluded;
    out[to_string(a.method)] = entry;
  }
  return out;
}

inline void write_aggregates_json(const std::filesystem::path& path,
                                  const std::vector<TrialAggregate>& aggregates) {
  std::ofstream out = reporting_detail::open_for_write(path);
  out << aggregates_to_json(aggregates).dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

enum class StudyKind { Toy, PointSetRegistration };

/// Markdown table rounded the way the corresponding study tables round.
inline std::string markdown_table(StudyKind kind, const std::vector<TrialAggregate>& aggregates) {
  using reporting_detail::fixed;
  using reporting_detail::scientific;
  std::ostringstream out;
  if (kind == StudyKind::Toy) {
    out << "| Method | RMSE (m) | Avg Iter. | Time (s) | Succ. Rate [%] |\n";
    out << "|--------|----------|-----------|----------|----------------|\n";
    for (const auto& a : aggregates) {
      out << "| " << reporting_detail::upper_name(a.method) << " | " << scientific(a.rmse, 2)
          << " | " << fixed(a.avg_iterations, 1) << " | " << scientific(a.wall_time_s, 2)
          << " | " << fixed(100.0 * a.success_rate, 1) << " |\n";
    }
  } else {
    out << "| Method | RMSE (deg) | RMSE (m) | ANEES | Avg Iter. | Time (s) |\n";
    out << "|--------|------------|----------|-------|-----------|----------|\n";
    for (const auto& a : aggregates) {
      out << "| " << reporting_detail::upper_name(a.method) << " | " << fixed(a.rmse_rot_deg, 2)
          << " | " << fixed(a.rmse_trans_m, 2) << " | " << fixed(a.anees, 2) << " | "
          << fixed(a.avg_iterations, 2) << " | " << fixed(a.wall_time_s, 2) << " |\n";
    }
  }
  return out.str();
}

inline void write_markdown_table(const std::filesystem::path& path, StudyKind kind,
                                 const std::vector<TrialAggregate>& aggregates) {
  std::ofstream out = reporting_detail::open_for_write(path);
  out << markdown_table(kind, aggregates);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline void write_sweep_csv(const std::filesystem::path& path,
                            const std::vector<HessianSweepRow>& rows) {
  std::ofstream out = reporting_detail::open_for_write(path);
  out << "x,h_exact,h_mm,h_sm,h_msm,h_hsm\n";
  for (const auto& r : rows) {
    out << format_double(r.x) << ',' << format_double(r.h_exact) << ',' << format_double(r.h_mm)
        << ',' << format_double(r.h_sm) << ',' << format_double(r.h_msm) << ','
        << format_double(r.h_hsm) << "\n";
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace gmmnls::bench

#endif  // GMMNLS_BENCH_REPORTING_HPP
