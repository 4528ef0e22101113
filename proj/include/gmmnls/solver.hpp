#ifndef GMMNLS_SOLVER_HPP
#define GMMNLS_SOLVER_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gmmnls/factor.hpp"
#include "gmmnls/lie.hpp"

namespace gmmnls {

struct RankDeficiencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  enum class Mode { GaussNewton, LevenbergMarquardt };

  Mode mode = Mode::LevenbergMarquardt;
  /// Consume a factor's explicit Hessian when it provides one; otherwise
  /// every factor contributes J^T J.
  bool use_custom_hessian = true;
  double step_tol = 1e-8;
  int max_iters = 200;
  double lm_tau = 1e-3;
  double step_size = 1.0;
  /// Observer invoked after every candidate step (LM) or applied step (GN).
  std::function<void(int iteration, double lambda, double cost_before, double cost_after,
                     bool accepted, double step_norm)>
      iteration_callback;

  void validate() const {
    if (!(step_tol > 0.0)) throw std::invalid_argument("step_tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
    if (!(lm_tau > 0.0)) throw std::invalid_argument("lm_tau must be positive");
  }
};

struct OptimizationResult {
  State estimate;
  int iterations = 0;
  bool converged = false;
  double final_cost = 0.0;
  /// Assembled Hessian at the estimate (the Laplace information matrix).
  Eigen::MatrixXd information;
};

struct AssembledSystem {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  double cost = 0.0;
};

/// Variable slots plus factors; owns the tangent-space layout.
class Problem {
 public:
  int add_variable(const ManifoldElement& prototype) {
    kinds_.push_back(prototype.kind());
    dims_.push_back(prototype.tangent_dim());
    offsets_.push_back(total_dim_);
    total_dim_ += prototype.tangent_dim();
    return static_cast<int>(kinds_.size()) - 1;
  }

  void add_factor(std::shared_ptr<const Factor> factor) {
    for (int slot : factor->slots()) {
      if (slot < 0 || slot >= num_variables()) {
        throw std::invalid_argument("factor references an invalid variable slot");
      }
    }
    factors_.push_back(std::move(factor));
  }

  int num_variables() const { return static_cast<int>(kinds_.size()); }
  int num_factors() const { return static_cast<int>(factors_.size()); }
  int total_dim() const { return total_dim_; }
  int offset(int slot) const { return offsets_.at(static_cast<std::size_t>(slot)); }
  int tangent_dim(int slot) const { return dims_.at(static_cast<std::size_t>(slot)); }

  void check_state(const State& x) const {
    if (static_cast<int>(x.size()) != num_variables()) {
      throw std::invalid_argument("state has wrong number of variables");
    }
    for (int i = 0; i < num_variables(); ++i) {
      if (x[static_cast<std::size_t>(i)].kind() != kinds_[static_cast<std::size_t>(i)] ||
          x[static_cast<std::size_t>(i)].tangent_dim() != dims_[static_cast<std::size_t>(i)]) {
        throw std::invalid_argument("state variable " + std::to_string(i) +
                                    " does not match the problem layout");
      }
    }
  }

  /// Gradient sum J_i^T e_i, Hessian sum of per-factor blocks (explicit H_i
  /// when present and enabled, else J_i^T J_i), and cost sum 0.5 ||e_i||^2.
  AssembledSystem assemble(const State& x, bool use_custom_hessian) const {
    check_state(x);
    AssembledSystem sys;
    sys.gradient = Eigen::VectorXd::Zero(total_dim_);
    sys.hessian = Eigen::MatrixXd::Zero(total_dim_, total_dim_);
    for (std::size_t fi = 0; fi < factors_.size(); ++fi) {
      const Factor& factor = *factors_[fi];
      State local;
      local.reserve(factor.slots().size());
      for (int slot : factor.slots()) local.push_back(x[static_cast<std::size_t>(slot)]);
      const FactorLinearization lin = factor.linearize(local);
      if (!std::isfinite(lin.loss) || !lin.error.allFinite() || !lin.jacobian.allFinite()) {
        throw EvaluationError("factor " + std::to_string(fi) +
                              ": non-finite linearization values");
      }
      const Eigen::VectorXd local_grad = lin.jacobian.transpose() * lin.error;
      const bool explicit_h = use_custom_hessian && lin.hessian.has_value();
      const Eigen::MatrixXd local_h =
          explicit_h ? *lin.hessian : Eigen::MatrixXd(lin.jacobian.transpose() * lin.jacobian);
      if (explicit_h && !local_h.allFinite()) {
        throw EvaluationError("factor " + std::to_string(fi) + ": non-finite Hessian");
      }
      // scatter into the global system
      int row_a = 0;
      for (int slot_a : factor.slots()) {
        const int dim_a = tangent_dim(slot_a);
        sys.gradient.segment(offset(slot_a), dim_a) += local_grad.segment(row_a, dim_a);
        int row_b = 0;
        for (int slot_b : factor.slots()) {
          const int dim_b = tangent_dim(slot_b);
          sys.hessian.block(offset(slot_a), offset(slot_b), dim_a, dim_b) +=
              local_h.block(row_a, row_b, dim_a, dim_b);
          row_b += dim_b;
        }
        row_a += dim_a;
      }
      sys.cost += lin.loss;
    }
    return sys;
  }

  /// Per-slot left perturbation x <- x oplus (scale * dx).
  State retract(const State& x, const Eigen::VectorXd& dx, double scale = 1.0) const {
    check_state(x);
    if (dx.size() != total_dim_) throw std::invalid_argument("retract: step dimension mismatch");
    State out = x;
    for (int i = 0; i < num_variables(); ++i) {
      const auto idx = static_cast<std::size_t>(i);
      out[idx] = oplus(x[idx], scale * dx.segment(offset(i), tangent_dim(i)));
    }
    return out;
  }

 private:
  std::vector<ManifoldKind> kinds_;
  std::vector<int> dims_;
  std::vector<int> offsets_;
  std::vector<std::shared_ptr<const Factor>> factors_;
  int total_dim_ = 0;
};

/// Solves H dx = -g through a symmetric indefinite factorization; a singular
/// or indefinite H raises RankDeficiencyError.
inline Eigen::VectorXd newton_step(const Eigen::VectorXd& gradient,
                                   const Eigen::MatrixXd& hessian) {
  if (hessian.rows() != hessian.cols() || hessian.rows() != gradient.size()) {
    throw std::invalid_argument("newton_step: dimension mismatch");
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
  if (ldlt.info() != Eigen::Success) {
    throw RankDeficiencyError("newton_step: factorization failed");
  }
  const Eigen::VectorXd d = ldlt.vectorD();
  const double d_max = d.cwiseAbs().maxCoeff();
  if (!(d_max > 0.0) || d.minCoeff() <= d_max * 1e-14) {
    throw RankDeficiencyError("newton_step: Hessian is singular or indefinite");
  }
  return ldlt.solve(-gradient);
}

namespace solver_detail {

inline OptimizationResult gauss_newton_solve(const Problem& problem, const State& initial,
                                             const SolverConfig& cfg) {
  OptimizationResult result;
  State x = initial;
  AssembledSystem sys;
  while (result.iterations < cfg.max_iters) {
    ++result.iterations;
    sys = problem.assemble(x, cfg.use_custom_hessian);
    if (!std::isfinite(sys.cost)) throw EvaluationError("gauss-newton: non-finite cost");
    const Eigen::VectorXd dx = newton_step(sys.gradient, sys.hessian);
    if (dx.norm() < cfg.step_tol) {
      result.converged = true;
      break;
    }
    const double cost_before = sys.cost;
    x = problem.retract(x, dx, cfg.step_size);
    if (cfg.iteration_callback) {
      cfg.iteration_callback(result.iterations, 0.0, cost_before,
                             std::numeric_limits<double>::quiet_NaN(), true, dx.norm());
    }
  }
  const AssembledSystem final_sys = problem.assemble(x, cfg.use_custom_hessian);
  result.estimate = std::move(x);
  result.final_cost = final_sys.cost;
  result.information = final_sys.hessian;
  return result;
}

inline OptimizationResult levenberg_marquardt_solve(const Problem& problem, const State& initial,
                                                    const SolverConfig& cfg) {
  OptimizationResult result;
  State x = initial;
  AssembledSystem sys = problem.assemble(x, cfg.use_custom_hessian);
  if (!std::isfinite(sys.cost)) throw EvaluationError("lm: non-finite initial cost");

  const int n = problem.total_dim();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  const double max_diag = sys.hessian.diagonal().maxCoeff();
  double lambda = cfg.lm_tau * ((max_diag > 0.0) ? max_diag : 1.0);
  double nu = 2.0;

  // An iteration is one candidate-step evaluation (accepted or rejected);
  // the initial linearization and the terminating solve are not counted.
  while (result.iterations < cfg.max_iters) {
    Eigen::VectorXd dx;
    try {
      dx = newton_step(sys.gradient, sys.hessian + lambda * identity);
    } catch (const RankDeficiencyError&) {
      ++result.iterations;
      lambda = std::max(lambda, 1e-12) * nu;
      nu *= 2.0;
      continue;
    }
    if (dx.norm() < cfg.step_tol) {
      result.converged = true;
      break;
    }
    ++result.iterations;
    const State x_try = problem.retract(x, dx, cfg.step_size);
    const AssembledSystem sys_try = problem.assemble(x_try, cfg.use_custom_hessian);
    if (!std::isfinite(sys_try.cost)) {
      throw EvaluationError("lm: non-finite cost at iteration " +
                            std::to_string(result.iterations));
    }
    const double predicted = 0.5 * dx.dot(lambda * dx - sys.gradient);
    const double rho = (sys.cost - sys_try.cost) / predicted;
    const bool accept = rho > 0.0;
    if (cfg.iteration_callback) {
      cfg.iteration_callback(result.iterations, lambda, sys.cost, sys_try.cost, accept,
                             dx.norm());
    }
    if (accept) {
      x = x_try;
      sys = sys_try;
      const double shrink = 1.0 - std::pow(2.0 * rho - 1.0, 3.0);
      lambda *= std::max(1.0 / 3.0, shrink);
      nu = 2.0;
    } else {
      lambda *= nu;
      nu *= 2.0;
    }
  }
  result.estimate = std::move(x);
  result.final_cost = sys.cost;
  result.information = sys.hessian;
  return result;
}

}  // namespace solver_detail

/// Iterative solve from an initial state. Gauss-Newton applies undamped
/// Newton steps; Levenberg-Marquardt damps with lambda * I, the gain-ratio
/// rule controlling lambda. Terminates when the step norm drops below
/// step_tol or max_iters is reached.
inline OptimizationResult lm_solve(const Problem& problem, const State& initial,
                                   const SolverConfig& cfg = {}) {
  cfg.validate();
  problem.check_state(initial);
  if (cfg.mode == SolverConfig::Mode::GaussNewton) {
    return solver_detail::gauss_newton_solve(problem, initial, cfg);
  }
  return solver_detail::levenberg_marquardt_solve(problem, initial, cfg);
}

/// Laplace-approximation covariance: the symmetrized inverse of the
/// information matrix at the solution.
inline Eigen::MatrixXd laplace_covariance(const OptimizationResult& result) {
  const Eigen::MatrixXd& info = result.information;
  if (info.rows() == 0 || info.rows() != info.cols()) {
    throw std::invalid_argument("laplace_covariance: information matrix is empty");
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success) {
    throw RankDeficiencyError("laplace_covariance: factorization failed");
  }
  const Eigen::VectorXd d = ldlt.vectorD();
  const double d_max = d.cwiseAbs().maxCoeff();
  if (!(d_max > 0.0) || d.minCoeff() <= d_max * 1e-14) {
    throw RankDeficiencyError("laplace_covariance: information matrix is singular");
  }
  const Eigen::MatrixXd cov =
      ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  return 0.5 * (cov + cov.transpose());
}

}  // namespace gmmnls

#endif  // GMMNLS_SOLVER_HPP
