#ifndef GMMNLS_NUMERIC_HPP
#define GMMNLS_NUMERIC_HPP

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <span>

namespace gmmnls {

/// log(sum_k exp(logs[k])) with max-exponent subtraction.
inline double log_sum_exp(std::span<const double> logs) {
  double max_log = -std::numeric_limits<double>::infinity();
  for (double v : logs) max_log = std::max(max_log, v);
  if (!std::isfinite(max_log)) return max_log;
  double sum = 0.0;
  for (double v : logs) sum += std::exp(v - max_log);
  return max_log + std::log(sum);
}

inline double log_sum_exp(const Eigen::VectorXd& logs) {
  return log_sum_exp(std::span<const double>(logs.data(), static_cast<std::size_t>(logs.size())));
}

/// Softmax weights w_k = exp(logs_k - log_sum_exp(logs)); entries in (0,1].
inline Eigen::VectorXd softmax_from_logs(const Eigen::VectorXd& logs) {
  const double lse = log_sum_exp(logs);
  Eigen::VectorXd w(logs.size());
  for (Eigen::Index k = 0; k < logs.size(); ++k) w(k) = std::exp(logs(k) - lse);
  return w;
}

}  // namespace gmmnls

#endif  // GMMNLS_NUMERIC_HPP
