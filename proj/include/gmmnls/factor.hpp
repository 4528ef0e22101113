#ifndef GMMNLS_FACTOR_HPP
#define GMMNLS_FACTOR_HPP

#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmmnls/mixture_factors.hpp"

namespace gmmnls {

/// A residual term referencing one or more variable slots. Factors are
/// immutable after construction; linearize is pure in the state argument.
class Factor {
 public:
  explicit Factor(std::vector<int> slots) : slots_(std::move(slots)) {
    if (slots_.empty()) throw std::invalid_argument("factor references no variables");
  }
  virtual ~Factor() = default;

  /// Indices of the variables this factor touches, in Jacobian column order.
  const std::vector<int>& slots() const { return slots_; }

  /// Evaluate at the referenced variables (in slot order). The Jacobian
  /// columns span the referenced variables' tangent spaces, left to right.
  virtual FactorLinearization linearize(const State& local_vars) const = 0;

 private:
  std::vector<int> slots_;
};

/// Plain residual factor: loss = 0.5 ||e(x)||^2 with the Gauss-Newton
/// Hessian implied by the Jacobian.
class ResidualFactor final : public Factor {
 public:
  ResidualFactor(std::vector<int> slots, ErrorFn error, ErrorJacobianFn jacobian)
      : Factor(std::move(slots)), error_(std::move(error)), jacobian_(std::move(jacobian)) {}

  FactorLinearization linearize(const State& local_vars) const override {
    FactorLinearization out;
    out.error = error_(local_vars);
    out.jacobian = jacobian_(local_vars);
    if (out.jacobian.rows() != out.error.size()) {
      throw std::invalid_argument("residual Jacobian row count does not match error size");
    }
    out.loss = 0.5 * out.error.squaredNorm();
    return out;
  }

 private:
  ErrorFn error_;
  ErrorJacobianFn jacobian_;
};

/// Gaussian mixture factor evaluated under one of the four formulations.
class MixtureFactor final : public Factor {
 public:
  MixtureFactor(std::vector<int> slots, Mixture mixture, MixtureMethod method,
                MixtureEvalOptions options = {})
      : Factor(std::move(slots)),
        mixture_(std::move(mixture)),
        method_(method),
        options_(options) {}

  FactorLinearization linearize(const State& local_vars) const override {
    const std::vector<EvaluatedComponent> comps = mixture_.evaluate(local_vars);
    return evaluate_mixture(method_, comps, options_);
  }

  const Mixture& mixture() const { return mixture_; }
  MixtureMethod method() const { return method_; }

 private:
  Mixture mixture_;
  MixtureMethod method_;
  MixtureEvalOptions options_;
};

}  // namespace gmmnls

#endif  // GMMNLS_FACTOR_HPP
