#ifndef GMMNLS_MIXTURE_HPP
#define GMMNLS_MIXTURE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmmnls/lie.hpp"
#include "gmmnls/numeric.hpp"

namespace gmmnls {

using ErrorFn = std::function<Eigen::VectorXd(const State&)>;
using ErrorJacobianFn = std::function<Eigen::MatrixXd(const State&)>;

/// One Gaussian component of a mixture measurement model: a weight, a mean,
/// an SPD covariance, and the raw residual eta(x) with its Jacobian taken
/// with respect to a left perturbation of the state.
struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  ErrorFn error;
  ErrorJacobianFn error_jacobian;
};

/// Component with the covariance folded in: whitened error
/// e(x) = L (eta(x) - mu) with L^T L = R^-1, and the covariance-normalized
/// weight alpha = w det(R)^(-1/2) kept in the log domain.
class NormalizedComponent {
 public:
  NormalizedComponent(double log_alpha, Eigen::MatrixXd sqrt_info, Eigen::VectorXd mean,
                      ErrorFn error, ErrorJacobianFn error_jacobian)
      : log_alpha_(log_alpha),
        sqrt_info_(std::move(sqrt_info)),
        mean_(std::move(mean)),
        error_(std::move(error)),
        error_jacobian_(std::move(error_jacobian)) {}

  double log_alpha() const { return log_alpha_; }
  double alpha() const { return std::exp(log_alpha_); }
  const Eigen::MatrixXd& sqrt_info() const { return sqrt_info_; }
  const Eigen::VectorXd& mean() const { return mean_; }

  Eigen::VectorXd error(const State& x) const {
    const Eigen::VectorXd eta = error_(x);
    if (eta.size() != mean_.size()) {
      throw std::invalid_argument("component error dimension does not match mean");
    }
    return sqrt_info_ * (eta - mean_);
  }

  Eigen::MatrixXd error_jacobian(const State& x) const {
    return sqrt_info_ * error_jacobian_(x);
  }

 private:
  double log_alpha_;
  Eigen::MatrixXd sqrt_info_;
  Eigen::VectorXd mean_;
  ErrorFn error_;
  ErrorJacobianFn error_jacobian_;
};

/// Change of variables from (w, mu, R, eta) to the whitened form. Any L with
/// L^T L = R^-1 is acceptable; this uses the inverse Cholesky factor.
inline NormalizedComponent normalize_component(const GaussianComponent& c) {
  if (!(c.weight > 0.0)) throw std::invalid_argument("component weight must be positive");
  const Eigen::Index n = c.covariance.rows();
  if (c.covariance.cols() != n || n != c.mean.size()) {
    throw std::invalid_argument("covariance/mean dimensions are inconsistent");
  }
  if ((c.covariance - c.covariance.transpose()).norm() > 1e-9 * (1.0 + c.covariance.norm())) {
    throw std::runtime_error("covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("covariance is not positive definite");
  }
  const Eigen::MatrixXd chol_lower = llt.matrixL();
  double half_log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) half_log_det += std::log(chol_lower(i, i));
  const Eigen::MatrixXd sqrt_info = chol_lower.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(n, n));
  return NormalizedComponent(std::log(c.weight) - half_log_det, sqrt_info, c.mean, c.error,
                             c.error_jacobian);
}

/// A component evaluated at a state: everything the mixture formulations
/// consume. f caches the half squared norm of the whitened error.
struct EvaluatedComponent {
  double log_alpha = 0.0;
  Eigen::VectorXd error;
  Eigen::MatrixXd jacobian;
  double f = 0.0;
};

inline EvaluatedComponent make_evaluated(double log_alpha, Eigen::VectorXd error,
                                         Eigen::MatrixXd jacobian) {
  if (jacobian.rows() != error.size()) {
    throw std::invalid_argument("component Jacobian row count does not match error size");
  }
  EvaluatedComponent out;
  out.log_alpha = log_alpha;
  out.f = 0.5 * error.squaredNorm();
  out.error = std::move(error);
  out.jacobian = std::move(jacobian);
  return out;
}

/// Immutable Gaussian mixture; shareable across concurrent solvers.
class Mixture {
 public:
  explicit Mixture(const std::vector<GaussianComponent>& components) {
    if (components.empty()) throw std::invalid_argument("mixture needs at least one component");
    components_.reserve(components.size());
    for (const auto& c : components) components_.push_back(normalize_component(c));
  }

  explicit Mixture(std::vector<NormalizedComponent> components)
      : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  }

  int size() const { return static_cast<int>(components_.size()); }

  const std::vector<NormalizedComponent>& components() const { return components_; }

  std::vector<EvaluatedComponent> evaluate(const State& x) const {
    std::vector<EvaluatedComponent> out;
    out.reserve(components_.size());
    for (const auto& c : components_) {
      out.push_back(make_evaluated(c.log_alpha(), c.error(x), c.error_jacobian(x)));
    }
    return out;
  }

  /// Exact mixture negative log-likelihood -log sum_k alpha_k exp(-f_k(x)),
  /// up to the constants dropped by the covariance normalization.
  double nll(const State& x) const {
    Eigen::VectorXd logs(size());
    for (int k = 0; k < size(); ++k) {
      const Eigen::VectorXd e = components_[k].error(x);
      logs(k) = components_[k].log_alpha() - 0.5 * e.squaredNorm();
    }
    return -log_sum_exp(logs);
  }

 private:
  std::vector<NormalizedComponent> components_;
};

}  // namespace gmmnls

#endif  // GMMNLS_MIXTURE_HPP
