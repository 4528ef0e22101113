#ifndef GMMNLS_BENCH_SWEEP_HPP
#define GMMNLS_BENCH_SWEEP_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gmmnls/mixture_factors.hpp"
#include "gmmnls/numdiff.hpp"

namespace gmmnls::bench {

struct HessianSweepRow {
  double x = 0.0;
  double h_exact = 0.0;
  double h_mm = 0.0;
  double h_sm = 0.0;
  double h_msm = 0.0;
  double h_hsm = 0.0;
};

struct HessianSweepResult {
  std::vector<HessianSweepRow> rows;
  // integrated |H_method - H_exact| over the sweep interval (trapezoid rule)
  double iad_mm = 0.0;
  double iad_sm = 0.0;
  double iad_msm = 0.0;
  double iad_hsm = 0.0;
};

/// Two zero-mean components with sigma = 1 and sigma = 3, equal weights.
inline Mixture default_sweep_mixture() {
  std::vector<GaussianComponent> comps(2);
  const double sigmas[2] = {1.0, 3.0};
  for (int k = 0; k < 2; ++k) {
    auto& c = comps[static_cast<std::size_t>(k)];
    c.weight = 0.5;
    c.mean = Eigen::VectorXd::Zero(1);
    c.covariance = Eigen::MatrixXd::Constant(1, 1, sigmas[k] * sigmas[k]);
    c.error = [](const State& s) { return s[0].coordinates(); };
    c.error_jacobian = [](const State&) { return Eigen::MatrixXd::Identity(1, 1); };
  }
  return Mixture(comps);
}

/// Sweeps a 1D mixture over [lo, hi]: the exact NLL Hessian from central
/// differences against each formulation's implied Hessian (J^T J from the
/// linearization, or the explicit Hessian where one is provided).
inline HessianSweepResult hessian_sweep_1d(const Mixture& mixture, double lo = -5.0,
                                           double hi = 5.0, int n_samples = 1001,
                                           double msm_delta = 1.0) {
  if (n_samples < 2) throw std::invalid_argument("hessian_sweep_1d: need at least 2 samples");
  if (!(hi > lo)) throw std::invalid_argument("hessian_sweep_1d: empty interval");

  const auto nll = [&mixture](const State& s) { return mixture.nll(s); };
  const auto implied = [](const FactorLinearization& lin) {
    if (lin.hessian.has_value()) return (*lin.hessian)(0, 0);
    return (lin.jacobian.transpose() * lin.jacobian)(0, 0);
  };

  HessianSweepResult result;
  result.rows.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (n_samples - 1);
    const State s{ManifoldElement::RealVector(Eigen::VectorXd::Constant(1, x))};
    const std::vector<EvaluatedComponent> comps = mixture.evaluate(s);
    HessianSweepRow row;
    row.x = x;
    row.h_exact = fd_hessian(nll, s)(0, 0);
    row.h_mm = implied(evaluate_max_mixture(comps));
    row.h_sm = implied(evaluate_sum_mixture(comps));
    row.h_msm = implied(evaluate_max_sum_mixture(comps, msm_delta));
    row.h_hsm = implied(evaluate_hsm(comps));
    result.rows.push_back(row);
  }

  const auto integrate = [&result](double HessianSweepRow::* field) {
    double acc = 0.0;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
      const auto& a = result.rows[i - 1];
      const auto& b = result.rows[i];
      acc += 0.5 * (std::abs(a.*field - a.h_exact) + std::abs(b.*field - b.h_exact)) *
             (b.x - a.x);
    }
    return acc;
  };
  result.iad_mm = integrate(&HessianSweepRow::h_mm);
  result.iad_sm = integrate(&HessianSweepRow::h_sm);
  result.iad_msm = integrate(&HessianSweepRow::h_msm);
  result.iad_hsm = integrate(&HessianSweepRow::h_hsm);
  return result;
}

}  // namespace gmmnls::bench

#endif  // GMMNLS_BENCH_SWEEP_HPP
