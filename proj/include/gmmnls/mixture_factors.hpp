#ifndef GMMNLS_MIXTURE_FACTORS_HPP
#define GMMNLS_MIXTURE_FACTORS_HPP

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "gmmnls/mixture.hpp"
#include "gmmnls/numeric.hpp"

namespace gmmnls {

enum class MixtureMethod { MaxMixture, SumMixture, MaxSumMixture, HessianSumMixture };

inline std::string to_string(MixtureMethod m) {
  switch (m) {
    case MixtureMethod::MaxMixture: return "mm";
    case MixtureMethod::SumMixture: return "sm";
    case MixtureMethod::MaxSumMixture: return "msm";
    case MixtureMethod::HessianSumMixture: return "hsm";
  }
  return "?";
}

inline MixtureMethod parse_method(const std::string& name) {
  if (name == "mm") return MixtureMethod::MaxMixture;
  if (name == "sm") return MixtureMethod::SumMixture;
  if (name == "msm") return MixtureMethod::MaxSumMixture;
  if (name == "hsm") return MixtureMethod::HessianSumMixture;
  throw std::invalid_argument("unknown mixture method '" + name + "'");
}

/// What a factor hands the solver: the loss value, a solver-facing error and
/// Jacobian, and optionally an explicit Hessian to use in place of J^T J.
/// loss == 0.5 ||error||^2 always; loss_offset is the value of
/// loss - (model negative log-likelihood) at the evaluation point.
struct FactorLinearization {
  double loss = 0.0;
  Eigen::VectorXd error;
  Eigen::MatrixXd jacobian;
  std::optional<Eigen::MatrixXd> hessian;
  std::optional<int> dominant;
  double loss_offset = 0.0;
};

namespace factor_detail {

inline std::atomic<std::uint64_t>& clamp_counter() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

/// Square-root arguments that are negative by rounding only (>= -1e-12) are
/// clamped to zero and counted; anything more negative is a hard error.
inline double checked_sqrt_arg(double arg, const char* where) {
  if (arg >= 0.0) return arg;
  if (arg >= -1e-12) {
    clamp_counter().fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  throw std::domain_error(std::string(where) + ": square-root argument " +
                          std::to_string(arg) + " is negative");
}

inline void require_nonempty(std::span<const EvaluatedComponent> comps) {
  if (comps.empty()) throw std::invalid_argument("mixture evaluation needs components");
}

inline Eigen::VectorXd exponent_logs(std::span<const EvaluatedComponent> comps) {
  Eigen::VectorXd logs(static_cast<Eigen::Index>(comps.size()));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    logs(static_cast<Eigen::Index>(k)) = comps[k].log_alpha - comps[k].f;
  }
  return logs;
}

}  // namespace factor_detail

inline std::uint64_t sqrt_clamp_count() {
  return factor_detail::clamp_counter().load(std::memory_order_relaxed);
}

inline void reset_sqrt_clamp_count() {
  factor_detail::clamp_counter().store(0, std::memory_order_relaxed);
}

/// Exact mixture NLL -log sum_k alpha_k exp(-f_k) of evaluated components.
inline double mixture_nll(std::span<const EvaluatedComponent> comps) {
  factor_detail::require_nonempty(comps);
  return -log_sum_exp(factor_detail::exponent_logs(comps));
}

/// Index of the dominant component argmax_k alpha_k exp(-f_k), computed in
/// the log domain; ties break to the lowest index.
inline int dominant_index(std::span<const EvaluatedComponent> comps) {
  factor_detail::require_nonempty(comps);
  int best = 0;
  double best_log = comps[0].log_alpha - comps[0].f;
  for (std::size_t k = 1; k < comps.size(); ++k) {
    const double v = comps[k].log_alpha - comps[k].f;
    if (v > best_log) {
      best_log = v;
      best = static_cast<int>(k);
    }
  }
  return best;
}

/// Softmin weights alpha_k exp(-f_k) / sum_i alpha_i exp(-f_i); each in
/// (0, 1], summing to one. These are the partial derivatives of the negative
/// LogSumExp nonlinearity with respect to the component exponents.
inline Eigen::VectorXd hsm_weights(std::span<const EvaluatedComponent> comps) {
  factor_detail::require_nonempty(comps);
  return softmax_from_logs(factor_detail::exponent_logs(comps));
}

/// Softmin-weighted sum of component Gauss-Newton blocks,
/// H = sum_k w_k J_k^T J_k; symmetric positive semidefinite by construction.
inline Eigen::MatrixXd hsm_hessian(std::span<const EvaluatedComponent> comps) {
  factor_detail::require_nonempty(comps);
  const Eigen::VectorXd w = hsm_weights(comps);
  const Eigen::Index n = comps[0].jacobian.cols();
  Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    hessian.noalias() +=
        w(static_cast<Eigen::Index>(k)) * comps[k].jacobian.transpose() * comps[k].jacobian;
  }
  return hessian;
}

/// Gap between the mixture NLL and the half squared norm of the weighted
/// error stack: delta_j = nll - sum_k w_k f_k. Bounded below by
/// -hsm_normalization_constant of the same alphas.
inline double hsm_delta_j(std::span<const EvaluatedComponent> comps) {
  factor_detail::require_nonempty(comps);
  const Eigen::VectorXd w = hsm_weights(comps);
  double weighted_f = 0.0;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    weighted_f += w(static_cast<Eigen::Index>(k)) * comps[k].f;
  }
  return mixture_nll(comps) - weighted_f;
}

/// log sum_k alpha_k exp(sum_j alpha_j / alpha_k), evaluated through
/// log-sum-exp so that large weight ratios do not overflow.
inline double hsm_normalization_constant(const Eigen::VectorXd& alphas) {
  if (alphas.size() == 0) throw std::invalid_argument("hsm_normalization_constant: no weights");
  if ((alphas.array() <= 0.0).any()) {
    throw std::invalid_argument("hsm_normalization_constant: weights must be positive");
  }
  const double total = alphas.sum();
  Eigen::VectorXd logs(alphas.size());
  for (Eigen::Index k = 0; k < alphas.size(); ++k) {
    logs(k) = std::log(alphas(k)) + total / alphas(k);
  }
  return log_sum_exp(logs);
}

/// Max-Mixture: the dominant component's error prefixed with the constant
/// row sqrt(2 log(c / alpha_k*)), c = max_k alpha_k. The loss equals the
/// max-approximated NLL plus log c.
inline FactorLinearization evaluate_max_mixture(std::span<const EvaluatedComponent> comps) {
  factor_detail::require_nonempty(comps);
  const int k_star = dominant_index(comps);
  double log_c = comps[0].log_alpha;
  for (const auto& c : comps) log_c = std::max(log_c, c.log_alpha);

  const EvaluatedComponent& dom = comps[static_cast<std::size_t>(k_star)];
  const Eigen::Index ne = dom.error.size();
  const Eigen::Index n = dom.jacobian.cols();

  FactorLinearization out;
  out.error.resize(ne + 1);
  out.error(0) = std::sqrt(
      2.0 * factor_detail::checked_sqrt_arg(log_c - dom.log_alpha, "max-mixture"));
  out.error.tail(ne) = dom.error;
  out.jacobian = Eigen::MatrixXd::Zero(ne + 1, n);
  out.jacobian.bottomRows(ne) = dom.jacobian;
  out.loss = 0.5 * out.error.squaredNorm();
  out.dominant = k_star;
  out.loss_offset = log_c;  // offset relative to the max-approximated NLL
  return out;
}

/// Sum-Mixture: the whole mixture NLL embedded as one scalar error
/// e = sqrt(2 (log c - log sum_k alpha_k exp(-f_k))), c = sum_k alpha_k.
inline FactorLinearization evaluate_sum_mixture(std::span<const EvaluatedComponent> comps) {
  factor_detail::require_nonempty(comps);
  Eigen::VectorXd log_alphas(static_cast<Eigen::Index>(comps.size()));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    log_alphas(static_cast<Eigen::Index>(k)) = comps[k].log_alpha;
  }
  const double log_c = log_sum_exp(log_alphas);
  const double nll = mixture_nll(comps);
  const double arg = factor_detail::checked_sqrt_arg(log_c + nll, "sum-mixture");
  const double e_sm = std::sqrt(2.0 * arg);

  const Eigen::Index n = comps[0].jacobian.cols();
  Eigen::RowVectorXd weighted_grad = Eigen::RowVectorXd::Zero(n);
  const Eigen::VectorXd w = hsm_weights(comps);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    weighted_grad.noalias() +=
        w(static_cast<Eigen::Index>(k)) * (comps[k].error.transpose() * comps[k].jacobian);
  }

  FactorLinearization out;
  out.error.resize(1);
  out.error(0) = e_sm;
  out.jacobian.resize(1, n);
  out.jacobian.row(0) = (e_sm > 0.0) ? (weighted_grad / e_sm).eval()
                                     : Eigen::RowVectorXd::Zero(n).eval();
  out.loss = arg;
  out.loss_offset = log_c;
  return out;
}

/// Max-Sum-Mixture: the dominant component's error is factored out as a
/// Max-Mixture block, the remaining nonlinear term is treated Sum-Mixture
/// style with normalization c = K max_k(alpha_k / alpha_k*) + delta.
inline FactorLinearization evaluate_max_sum_mixture(std::span<const EvaluatedComponent> comps,
                                                    double delta) {
  factor_detail::require_nonempty(comps);
  if (!(delta > 0.0)) throw std::invalid_argument("max-sum-mixture: delta must be positive");
  const int k_star = dominant_index(comps);
  const EvaluatedComponent& dom = comps[static_cast<std::size_t>(k_star)];
  const auto num_comps = static_cast<double>(comps.size());

  double max_log_ratio = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd rel_logs(static_cast<Eigen::Index>(comps.size()));
  const double dom_log = dom.log_alpha - dom.f;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    max_log_ratio = std::max(max_log_ratio, comps[k].log_alpha - dom.log_alpha);
    rel_logs(static_cast<Eigen::Index>(k)) = (comps[k].log_alpha - comps[k].f) - dom_log;
  }
  // log(K exp(m) + delta) without forming exp(m)
  const double log_c =
      max_log_ratio + std::log(num_comps + delta * std::exp(-max_log_ratio));
  const double log_sum = log_sum_exp(rel_logs);  // >= 0, terms <= 1 each
  const double arg = factor_detail::checked_sqrt_arg(log_c - log_sum, "max-sum-mixture");
  const double e_nl = std::sqrt(2.0 * arg);

  const Eigen::Index ne = dom.error.size();
  const Eigen::Index n = dom.jacobian.cols();
  const Eigen::VectorXd w = hsm_weights(comps);
  Eigen::RowVectorXd weighted_grad = Eigen::RowVectorXd::Zero(n);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    weighted_grad.noalias() +=
        w(static_cast<Eigen::Index>(k)) * (comps[k].error.transpose() * comps[k].jacobian);
  }
  const Eigen::RowVectorXd dom_grad = dom.error.transpose() * dom.jacobian;

  FactorLinearization out;
  out.error.resize(ne + 1);
  out.error.head(ne) = dom.error;
  out.error(ne) = e_nl;
  out.jacobian.resize(ne + 1, n);
  out.jacobian.topRows(ne) = dom.jacobian;
  out.jacobian.row(ne) = (e_nl > 0.0) ? ((weighted_grad - dom_grad) / e_nl).eval()
                                      : Eigen::RowVectorXd::Zero(n).eval();
  out.loss = dom.f + arg;
  out.dominant = k_star;
  out.loss_offset = log_c + dom.log_alpha;
  return out;
}

/// Hessian-Sum-Mixture: the error stacks sqrt(w_k) e_k blocks plus the
/// scalar sqrt(2 (c + delta_j)); the Jacobian stacks sqrt(w_k) J_k blocks
/// plus a zero row, so that J^T J reproduces the softmin-weighted Hessian
/// and J^T e reproduces the exact NLL gradient. The weights are rescaled by
/// max_k alpha_k before computing the normalization constant; the rescaling
/// only shifts the loss by a constant and leaves the descent direction
/// unchanged.
inline FactorLinearization evaluate_hsm(std::span<const EvaluatedComponent> comps) {
  factor_detail::require_nonempty(comps);
  const std::size_t num_comps = comps.size();

  double log_alpha_max = comps[0].log_alpha;
  for (const auto& c : comps) log_alpha_max = std::max(log_alpha_max, c.log_alpha);

  const Eigen::VectorXd w = hsm_weights(comps);
  Eigen::VectorXd scaled_alphas(static_cast<Eigen::Index>(num_comps));
  Eigen::VectorXd scaled_logs(static_cast<Eigen::Index>(num_comps));
  for (std::size_t k = 0; k < num_comps; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    scaled_alphas(ki) = std::exp(comps[k].log_alpha - log_alpha_max);
    scaled_logs(ki) = (comps[k].log_alpha - log_alpha_max) - comps[k].f;
  }
  const double scaled_nll = -log_sum_exp(scaled_logs);
  double weighted_f = 0.0;
  for (std::size_t k = 0; k < num_comps; ++k) {
    weighted_f += w(static_cast<Eigen::Index>(k)) * comps[k].f;
  }
  const double delta_j = scaled_nll - weighted_f;
  const double c_hsm = hsm_normalization_constant(scaled_alphas);
  // delta_j >= -c_hsm is a proven bound; a violation beyond rounding means
  // the evaluation itself is inconsistent.
  double arg = c_hsm + delta_j;
  if (arg < -1e-12) {
    throw std::logic_error("hsm: c + delta_j = " + std::to_string(arg) +
                           " violates the lower bound");
  }
  arg = factor_detail::checked_sqrt_arg(arg, "hsm");

  Eigen::Index total_rows = 1;
  for (const auto& c : comps) total_rows += c.error.size();
  const Eigen::Index n = comps[0].jacobian.cols();

  FactorLinearization out;
  out.error.resize(total_rows);
  out.jacobian = Eigen::MatrixXd::Zero(total_rows, n);
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < num_comps; ++k) {
    const double sqrt_w = std::sqrt(w(static_cast<Eigen::Index>(k)));
    const Eigen::Index ne = comps[k].error.size();
    out.error.segment(row, ne) = sqrt_w * comps[k].error;
    out.jacobian.middleRows(row, ne) = sqrt_w * comps[k].jacobian;
    row += ne;
  }
  out.error(row) = std::sqrt(2.0 * arg);
  out.loss = weighted_f + arg;
  out.hessian = hsm_hessian(comps);
  out.dominant = dominant_index(comps);
  out.loss_offset = c_hsm + log_alpha_max;
  return out;
}

struct MixtureEvalOptions {
  double msm_delta = 1.0;
};

inline FactorLinearization evaluate_mixture(MixtureMethod method,
                                            std::span<const EvaluatedComponent> comps,
                                            const MixtureEvalOptions& opts = {}) {
  switch (method) {
    case MixtureMethod::MaxMixture: return evaluate_max_mixture(comps);
    case MixtureMethod::SumMixture: return evaluate_sum_mixture(comps);
    case MixtureMethod::MaxSumMixture: return evaluate_max_sum_mixture(comps, opts.msm_delta);
    case MixtureMethod::HessianSumMixture: return evaluate_hsm(comps);
  }
  throw std::logic_error("evaluate_mixture: unreachable");
}

}  // namespace gmmnls

#endif  // GMMNLS_MIXTURE_FACTORS_HPP
