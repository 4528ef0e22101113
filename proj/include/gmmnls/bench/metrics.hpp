#ifndef GMMNLS_BENCH_METRICS_HPP
#define GMMNLS_BENCH_METRICS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gmmnls/mixture_factors.hpp"

namespace gmmnls::bench {

inline constexpr std::uint64_t kDefaultSeed = 42;

inline double undefined() { return std::numeric_limits<double>::quiet_NaN(); }

/// One solve of one method on one problem instance.
struct TrialRecord {
  int trial_id = 0;
  MixtureMethod method = MixtureMethod::HessianSumMixture;
  bool converged = false;
  bool success = false;
  int iterations = 0;
  double err_norm = 0.0;            // ||estimate ominus truth||
  double err_rot_deg = undefined();  // rotation block, degrees (pose studies)
  double err_trans_m = undefined();  // translation block, meters (pose studies)
  double anees_term = undefined();   // e^T P^-1 e / dim, NaN when P is singular
  double wall_time_s = 0.0;
};

/// Monte-Carlo aggregate for one method. NaN marks metrics that are
/// undefined for the study (e.g. ANEES on the toy problem).
struct TrialAggregate {
  MixtureMethod method = MixtureMethod::HessianSumMixture;
  double rmse = undefined();
  double rmse_rot_deg = undefined();
  double rmse_trans_m = undefined();
  double anees = undefined();
  double success_rate = 0.0;
  double avg_iterations = 0.0;
  double wall_time_s = 0.0;  // mean seconds per solve
  int n_trials = 0;
  int n_anees_excluded = 0;
};

namespace metrics_detail {

inline double root_mean_square(std::span<const TrialRecord> records,
                               double TrialRecord::* field) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : records) {
    const double v = r.*field;
    if (std::isnan(v)) continue;
    sum += v * v;
    ++n;
  }
  return (n == 0) ? undefined() : std::sqrt(sum / n);
}

}  // namespace metrics_detail

/// Recomputes every aggregate value from the per-trial records; the writers
/// keep no hidden state beyond these rows.
inline TrialAggregate aggregate(MixtureMethod method, std::span<const TrialRecord> records) {
  TrialAggregate agg;
  agg.method = method;
  double anees_sum = 0.0;
  int anees_n = 0;
  for (const auto& r : records) {
    if (r.method != method) continue;
    ++agg.n_trials;
    agg.success_rate += r.success ? 1.0 : 0.0;
    agg.avg_iterations += r.iterations;
    agg.wall_time_s += r.wall_time_s;
    if (std::isnan(r.anees_term)) {
      ++agg.n_anees_excluded;
    } else {
      anees_sum += r.anees_term;
      ++anees_n;
    }
  }
  if (agg.n_trials == 0) return agg;
  std::vector<TrialRecord> mine;
  mine.reserve(static_cast<std::size_t>(agg.n_trials));
  for (const auto& r : records) {
    if (r.method == method) mine.push_back(r);
  }
  agg.rmse = metrics_detail::root_mean_square(mine, &TrialRecord::err_norm);
  agg.rmse_rot_deg = metrics_detail::root_mean_square(mine, &TrialRecord::err_rot_deg);
  agg.rmse_trans_m = metrics_detail::root_mean_square(mine, &TrialRecord::err_trans_m);
  agg.anees = (anees_n > 0) ? anees_sum / anees_n : undefined();
  agg.success_rate /= agg.n_trials;
  agg.avg_iterations /= agg.n_trials;
  agg.wall_time_s /= agg.n_trials;
  return agg;
}

struct StudyResult {
  std::vector<TrialRecord> records;
  std::vector<TrialAggregate> aggregates;
};

inline std::vector<TrialAggregate> aggregate_all(const std::vector<MixtureMethod>& methods,
                                                 std::span<const TrialRecord> records) {
  std::vector<TrialAggregate> out;
  out.reserve(methods.size());
  for (MixtureMethod m : methods) out.push_back(aggregate(m, records));
  return out;
}

}  // namespace gmmnls::bench

#endif  // GMMNLS_BENCH_METRICS_HPP
