#ifndef GMMNLS_BENCH_SELFTEST_HPP
#define GMMNLS_BENCH_SELFTEST_HPP

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gmmnls/bench/sweep.hpp"
#include "gmmnls/bench/toy.hpp"
#include "gmmnls/numdiff.hpp"
#include "gmmnls/rng.hpp"
#include "gmmnls/solver.hpp"

namespace gmmnls::bench {

/// Random mixture with affine component errors eta_k(x) = M_k x + b_k;
/// covariance eigenvalues are bounded away from zero.
inline Mixture random_affine_mixture(Rng& rng, int dim, int n_components, int error_dim) {
  std::vector<GaussianComponent> comps(static_cast<std::size_t>(n_components));
  for (auto& c : comps) {
    c.weight = rng.uniform(0.2, 1.0);
    c.mean = Eigen::VectorXd(error_dim);
    for (int i = 0; i < error_dim; ++i) c.mean(i) = rng.uniform(-2.0, 2.0);
    Eigen::MatrixXd basis(error_dim, error_dim);
    for (int i = 0; i < error_dim; ++i) {
      for (int j = 0; j < error_dim; ++j) basis(i, j) = rng.uniform(-1.0, 1.0);
    }
    c.covariance = basis * basis.transpose() +
                   rng.uniform(0.3, 1.0) * Eigen::MatrixXd::Identity(error_dim, error_dim);
    Eigen::MatrixXd slope(error_dim, dim);
    for (int i = 0; i < error_dim; ++i) {
      for (int j = 0; j < dim; ++j) slope(i, j) = rng.uniform(-1.5, 1.5);
    }
    Eigen::VectorXd intercept(error_dim);
    for (int i = 0; i < error_dim; ++i) intercept(i) = rng.uniform(-2.0, 2.0);
    c.error = [slope, intercept](const State& s) {
      return Eigen::VectorXd(slope * s[0].coordinates() + intercept);
    };
    c.error_jacobian = [slope](const State&) { return slope; };
  }
  return Mixture(comps);
}

inline State random_rvec_state(Rng& rng, int dim, double lo = -3.0, double hi = 3.0) {
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = rng.uniform(lo, hi);
  return State{ManifoldElement::RealVector(x)};
}

/// Tangent sample with rotation-block magnitude below `rot_cap` (keeps the
/// logarithm well inside its domain).
inline Eigen::VectorXd random_tangent(Rng& rng, ManifoldKind kind, double rot_cap = 3.0) {
  switch (kind) {
    case ManifoldKind::SO2: {
      Eigen::VectorXd xi(1);
      xi(0) = rng.uniform(-rot_cap, rot_cap);
      return xi;
    }
    case ManifoldKind::SE2: {
      Eigen::VectorXd xi(3);
      xi(0) = rng.uniform(-rot_cap, rot_cap);
      xi(1) = rng.uniform(-3.0, 3.0);
      xi(2) = rng.uniform(-3.0, 3.0);
      return xi;
    }
    case ManifoldKind::SO3:
    case ManifoldKind::SE3: {
      Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
      if (dir.norm() < 1e-12) dir = Eigen::Vector3d::UnitX();
      dir.normalize();
      const Eigen::Vector3d phi = rng.uniform(0.0, rot_cap) * dir;
      if (kind == ManifoldKind::SO3) return phi;
      Eigen::VectorXd xi(6);
      xi.head<3>() = phi;
      for (int i = 3; i < 6; ++i) xi(i) = rng.uniform(-3.0, 3.0);
      return xi;
    }
    default: {
      Eigen::VectorXd xi(3);
      for (int i = 0; i < 3; ++i) xi(i) = rng.uniform(-3.0, 3.0);
      return xi;
    }
  }
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace selftest_detail {

inline void run_check(std::vector<CheckResult>& results, const std::string& name,
                      const std::function<std::string()>& body) {
  CheckResult r;
  r.name = name;
  try {
    r.detail = body();  // empty string means pass
    r.passed = r.detail.empty();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  results.push_back(r);
}

inline std::string describe(double value, double bound, const char* what) {
  std::ostringstream out;
  out << what << " " << value << " exceeds " << bound;
  return out.str();
}

}  // namespace selftest_detail

/// Fast invariant suite behind the CLI selftest command. Each check is
/// seeded and deterministic.
inline std::vector<CheckResult> run_selftest(std::uint64_t seed = kDefaultSeed) {
  using selftest_detail::describe;
  using selftest_detail::run_check;
  std::vector<CheckResult> results;
  const std::vector<ManifoldKind> group_kinds = {ManifoldKind::SO2, ManifoldKind::SE2,
                                                 ManifoldKind::SO3, ManifoldKind::SE3};

  run_check(results, "lie exp/log round trip", [&]() -> std::string {
    Rng rng(seed);
    double worst = 0.0;
    for (ManifoldKind kind : group_kinds) {
      for (int i = 0; i < 2000; ++i) {
        const Eigen::VectorXd xi = random_tangent(rng, kind);
        worst = std::max(worst, (log_map(exp_map(xi, kind)) - xi).cwiseAbs().maxCoeff());
      }
    }
    return worst <= 1e-9 ? "" : describe(worst, 1e-9, "round-trip error");
  });

  run_check(results, "lie oplus/ominus inverse", [&]() -> std::string {
    Rng rng(seed + 1);
    double worst = 0.0;
    for (ManifoldKind kind : group_kinds) {
      for (int i = 0; i < 2000; ++i) {
        const ManifoldElement x = exp_map(random_tangent(rng, kind, 1.5), kind);
        const ManifoldElement y = exp_map(random_tangent(rng, kind, 1.5), kind);
        const ManifoldElement back = oplus(y, ominus(x, y));
        double err = back.orthonormality_defect();
        err = std::max(err, (back.rotation() - x.rotation()).norm());
        if (x.has_translation()) err = std::max(err, (back.translation() - x.translation()).norm());
        worst = std::max(worst, err);
      }
    }
    return worst <= 1e-9 ? "" : describe(worst, 1e-9, "inverse-property error");
  });

  run_check(results, "lie closure keeps orthonormality", [&]() -> std::string {
    Rng rng(seed + 2);
    double worst = 0.0;
    for (ManifoldKind kind : group_kinds) {
      ManifoldElement x = ManifoldElement::Identity(kind);
      for (int i = 0; i < 300; ++i) {
        x = x.compose(exp_map(random_tangent(rng, kind, 1.0), kind));
        if (i % 3 == 0) x = x.inverse();
        worst = std::max(worst, x.orthonormality_defect());
      }
    }
    return worst <= 1e-9 ? "" : describe(worst, 1e-9, "orthonormality defect");
  });

  run_check(results, "loss equals half squared error norm", [&]() -> std::string {
    Rng rng(seed + 3);
    double worst = 0.0;
    for (int i = 0; i < 300; ++i) {
      const int dim = 1 + static_cast<int>(rng.uniform() * 2.999);
      const Mixture mix = random_affine_mixture(rng, dim, 1 + i % 4, dim);
      const auto comps = mix.evaluate(random_rvec_state(rng, dim));
      for (auto m : {MixtureMethod::MaxMixture, MixtureMethod::SumMixture,
                     MixtureMethod::MaxSumMixture, MixtureMethod::HessianSumMixture}) {
        const FactorLinearization lin = evaluate_mixture(m, comps);
        worst = std::max(worst, std::abs(lin.loss - 0.5 * lin.error.squaredNorm()));
      }
    }
    return worst <= 1e-9 ? "" : describe(worst, 1e-9, "loss mismatch");
  });

  run_check(results, "loss offsets recover the exact NLL", [&]() -> std::string {
    Rng rng(seed + 4);
    double worst = 0.0;
    for (int i = 0; i < 300; ++i) {
      const int dim = 1 + i % 3;
      const Mixture mix = random_affine_mixture(rng, dim, 2 + i % 3, dim);
      const auto comps = mix.evaluate(random_rvec_state(rng, dim));
      const double nll = mixture_nll(comps);
      for (auto m : {MixtureMethod::SumMixture, MixtureMethod::MaxSumMixture,
                     MixtureMethod::HessianSumMixture}) {
        const FactorLinearization lin = evaluate_mixture(m, comps);
        worst = std::max(worst, std::abs(lin.loss - lin.loss_offset - nll));
      }
    }
    return worst <= 1e-9 ? "" : describe(worst, 1e-9, "offset identity error");
  });

  run_check(results, "hsm weights sum to one and ignore scaling", [&]() -> std::string {
    Rng rng(seed + 5);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const Mixture mix = random_affine_mixture(rng, 2, 2 + i % 3, 2);
      auto comps = mix.evaluate(random_rvec_state(rng, 2));
      const Eigen::VectorXd w = hsm_weights(comps);
      worst = std::max(worst, std::abs(w.sum() - 1.0));
      const double shift = std::log(rng.uniform(0.01, 100.0));
      for (auto& c : comps) c.log_alpha += shift;
      worst = std::max(worst, (hsm_weights(comps) - w).cwiseAbs().maxCoeff());
    }
    return worst <= 1e-12 ? "" : describe(worst, 1e-12, "weight error");
  });

  run_check(results, "hsm solver pair reproduces gradient and Hessian", [&]() -> std::string {
    Rng rng(seed + 6);
    double worst_grad = 0.0;
    double worst_hess = 0.0;
    for (int i = 0; i < 100; ++i) {
      const int dim = 1 + i % 3;
      const Mixture mix = random_affine_mixture(rng, dim, 2 + i % 3, dim);
      const State x = random_rvec_state(rng, dim);
      const auto comps = mix.evaluate(x);
      const FactorLinearization lin = evaluate_hsm(comps);
      const Eigen::VectorXd grad = lin.jacobian.transpose() * lin.error;
      const Eigen::MatrixXd fd_grad = fd_jacobian(
          [&mix](const State& s) {
            return Eigen::VectorXd::Constant(1, mix.nll(s));
          },
          x);
      worst_grad = std::max(worst_grad, (grad.transpose() - fd_grad.row(0)).norm());
      worst_hess = std::max(
          worst_hess,
          (Eigen::MatrixXd(lin.jacobian.transpose() * lin.jacobian) - *lin.hessian).norm());
    }
    if (worst_grad > 1e-6) return describe(worst_grad, 1e-6, "gradient error");
    if (worst_hess > 1e-12) return describe(worst_hess, 1e-12, "Hessian identity error");
    return "";
  });

  run_check(results, "delta_j lower bound holds under fuzz", [&]() -> std::string {
    Rng rng(seed + 7);
    for (int i = 0; i < 10000; ++i) {
      const int K = 1 + i % 5;
      const Mixture mix = random_affine_mixture(rng, 2, K, 2);
      auto comps = mix.evaluate(random_rvec_state(rng, 2, -6.0, 6.0));
      double log_alpha_max = comps[0].log_alpha;
      for (const auto& c : comps) log_alpha_max = std::max(log_alpha_max, c.log_alpha);
      Eigen::VectorXd alphas(static_cast<Eigen::Index>(comps.size()));
      for (std::size_t k = 0; k < comps.size(); ++k) {
        comps[k].log_alpha -= log_alpha_max;
        alphas(static_cast<Eigen::Index>(k)) = std::exp(comps[k].log_alpha);
      }
      const double slack = hsm_delta_j(comps) + hsm_normalization_constant(alphas);
      if (!(slack >= 0.0)) {
        return "bound violated by " + std::to_string(slack) + " at sample " + std::to_string(i);
      }
    }
    return "";
  });

  run_check(results, "single-component hsm equals gauss-newton", [&]() -> std::string {
    Rng rng(seed + 8);
    double worst = 0.0;
    int accepted = 0;
    for (int i = 0; i < 2000 && accepted < 200; ++i) {
      const int dim = 1 + i % 3;
      const Mixture mix = random_affine_mixture(rng, dim, 1, dim);
      const auto comps = mix.evaluate(random_rvec_state(rng, dim));
      // the absolute 1e-12 budget presumes a unit-scale, well-conditioned
      // system; ulp-level input noise is amplified by cond(J)^2 * ||step||
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(comps[0].jacobian);
      if (svd.singularValues()(0) > 10.0 * svd.singularValues()(dim - 1)) continue;
      const Eigen::VectorXd gn_step =
          newton_step(comps[0].jacobian.transpose() * comps[0].error,
                      comps[0].jacobian.transpose() * comps[0].jacobian);
      if (gn_step.norm() > 10.0) continue;
      ++accepted;
      const FactorLinearization lin = evaluate_hsm(comps);
      const Eigen::VectorXd hsm_step =
          newton_step(lin.jacobian.transpose() * lin.error, *lin.hessian);
      worst = std::max(worst, (hsm_step - gn_step).cwiseAbs().maxCoeff());
    }
    if (accepted < 100) return "could not collect enough conditioned samples";
    return worst <= 1e-12 ? "" : describe(worst, 1e-12, "step difference");
  });

  run_check(results, "sum-mixture Gauss-Newton Hessian is rank one", [&]() -> std::string {
    Rng rng(seed + 9);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Mixture mix = random_affine_mixture(rng, 2, 2 + i % 2, 2);
      const FactorLinearization lin =
          evaluate_sum_mixture(mix.evaluate(random_rvec_state(rng, 2)));
      const Eigen::MatrixXd gn = lin.jacobian.transpose() * lin.jacobian;
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(gn);
      if (svd.singularValues()(0) > 0.0) {
        worst = std::max(worst, svd.singularValues()(1) / svd.singularValues()(0));
      }
    }
    return worst < 1e-10 ? "" : describe(worst, 1e-10, "second singular value ratio");
  });

  run_check(results, "hessian sweep favors the weighted Hessian", [&]() -> std::string {
    const HessianSweepResult sweep = hessian_sweep_1d(default_sweep_mixture());
    if (sweep.iad_hsm >= sweep.iad_msm) {
      return "integrated deviation " + std::to_string(sweep.iad_hsm) + " not below msm " +
             std::to_string(sweep.iad_msm);
    }
    if (sweep.iad_hsm >= sweep.iad_mm) {
      return "integrated deviation " + std::to_string(sweep.iad_hsm) + " not below mm " +
             std::to_string(sweep.iad_mm);
    }
    return "";
  });

  run_check(results, "formulation Jacobians match finite differences", [&]() -> std::string {
    Rng rng(seed + 10);
    double worst = 0.0;
    int tested = 0;
    for (int i = 0; i < 60 || tested < 30; ++i) {
      if (i > 300) break;
      const int dim = 1 + i % 2;
      const Mixture mix = random_affine_mixture(rng, dim, 2 + i % 3, dim);
      const State x = random_rvec_state(rng, dim);
      // skip states where the dominant component flips inside the stencil
      const DiffConfig cfg;
      bool stable = true;
      const int dom0 = dominant_index(mix.evaluate(x));
      for (int axis = 0; axis < dim && stable; ++axis) {
        for (double sgn : {-1.0, 1.0}) {
          Eigen::VectorXd xi = Eigen::VectorXd::Zero(dim);
          xi(axis) = sgn * cfg.step;
          if (dominant_index(mix.evaluate({oplus(x[0], xi)})) != dom0) stable = false;
        }
      }
      if (!stable) continue;
      ++tested;
      for (auto m : {MixtureMethod::MaxMixture, MixtureMethod::SumMixture,
                     MixtureMethod::MaxSumMixture}) {
        const auto error_of = [&](const State& s) {
          return evaluate_mixture(m, mix.evaluate(s)).error;
        };
        const Eigen::MatrixXd fd = fd_jacobian(error_of, x, cfg);
        const Eigen::MatrixXd an = evaluate_mixture(m, mix.evaluate(x)).jacobian;
        worst = std::max(worst, (fd - an).cwiseAbs().maxCoeff());
      }
    }
    return worst <= 1e-6 ? "" : describe(worst, 1e-6, "Jacobian error");
  });

  return results;
}

}  // namespace gmmnls::bench

#endif  // GMMNLS_BENCH_SELFTEST_HPP
