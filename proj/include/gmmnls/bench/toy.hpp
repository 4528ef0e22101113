#ifndef GMMNLS_BENCH_TOY_HPP
#define GMMNLS_BENCH_TOY_HPP

#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "gmmnls/bench/metrics.hpp"
#include "gmmnls/numdiff.hpp"
#include "gmmnls/parallel.hpp"
#include "gmmnls/rng.hpp"
#include "gmmnls/solver.hpp"

namespace gmmnls::bench {

/// Monte-Carlo study on a single d-dimensional mixture term: random mixture
/// parameters, a grid of initial guesses, success measured against a
/// grid-plus-refine global optimum.
struct ToySpec {
  int dim = 1;  // 1 or 2
  int n_components = 4;
  int n_param_draws = 100;
  int n_inits = 100;
  double init_lo = -4.0;
  double init_hi = 4.0;
  double success_tol = 0.01;
  std::uint64_t rng_seed = kDefaultSeed;
  int grid_resolution = 2001;
  SolverConfig solver;
  double msm_delta = 1.0;
  int n_threads = 0;

  void validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("toy dim must be 1 or 2");
    if (n_components < 1) throw std::invalid_argument("toy needs at least one component");
    if (n_param_draws < 1 || n_inits < 1) throw std::invalid_argument("toy trial counts");
  }
};

struct ToyInstance {
  Mixture mixture;
  Eigen::VectorXd ground_truth;
};

/// Draws mixture parameters: w1 ~ U(0.2, 0.8) with the rest splitting the
/// remainder evenly, the first mean at zero and the others' entries
/// U(-2, 2), R1 = sigma^2 I with sigma^2 ~ U(0.4, 1), and every other
/// covariance an independent multiple m_k R1 with m_k ~ U(4, 10). Ground
/// truth comes from the grid-plus-refine oracle on the init box.
inline ToyInstance gen_toy_mixture(const ToySpec& spec, Rng& rng) {
  spec.validate();
  const int K = spec.n_components;
  const int d = spec.dim;

  const double w1 = (K == 1) ? 1.0 : rng.uniform(0.2, 0.8);
  const double sigma2 = rng.uniform(0.4, 1.0);
  std::vector<GaussianComponent> comps(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    auto& c = comps[static_cast<std::size_t>(k)];
    c.weight = (k == 0) ? w1 : (1.0 - w1) / (K - 1);
    if (k == 0) {
      c.mean = Eigen::VectorXd::Zero(d);
      c.covariance = sigma2 * Eigen::MatrixXd::Identity(d, d);
    } else {
      c.mean = Eigen::VectorXd(d);
      for (int i = 0; i < d; ++i) c.mean(i) = rng.uniform(-2.0, 2.0);
      c.covariance = rng.uniform(4.0, 10.0) * sigma2 * Eigen::MatrixXd::Identity(d, d);
    }
    c.error = [](const State& s) { return s[0].coordinates(); };
    c.error_jacobian = [d](const State&) { return Eigen::MatrixXd::Identity(d, d); };
  }

  Mixture mixture(comps);
  std::vector<std::pair<double, double>> bounds(static_cast<std::size_t>(d),
                                                {spec.init_lo, spec.init_hi});
  Eigen::VectorXd truth = grid_global_optimum(
      [&mixture](const Eigen::VectorXd& v) {
        return mixture.nll({ManifoldElement::RealVector(v)});
      },
      bounds, spec.grid_resolution);
  return ToyInstance{std::move(mixture), std::move(truth)};
}

/// Initial points spread uniformly on a grid over the init box; n_inits
/// points in 1D, a sqrt(n_inits) x sqrt(n_inits) grid in 2D.
inline std::vector<Eigen::VectorXd> toy_init_grid(const ToySpec& spec) {
  spec.validate();
  std::vector<Eigen::VectorXd> inits;
  const auto axis = [&spec](int idx, int count) {
    if (count == 1) return 0.5 * (spec.init_lo + spec.init_hi);
    return spec.init_lo +
           (spec.init_hi - spec.init_lo) * static_cast<double>(idx) / (count - 1);
  };
  if (spec.dim == 1) {
    inits.reserve(static_cast<std::size_t>(spec.n_inits));
    for (int i = 0; i < spec.n_inits; ++i) {
      inits.push_back(Eigen::VectorXd::Constant(1, axis(i, spec.n_inits)));
    }
  } else {
    const int per_axis = static_cast<int>(std::llround(std::sqrt(double(spec.n_inits))));
    if (per_axis * per_axis != spec.n_inits) {
      throw std::invalid_argument("2D toy n_inits must be a perfect square");
    }
    inits.reserve(static_cast<std::size_t>(spec.n_inits));
    for (int i = 0; i < per_axis; ++i) {
      for (int j = 0; j < per_axis; ++j) {
        Eigen::VectorXd p(2);
        p << axis(i, per_axis), axis(j, per_axis);
        inits.push_back(p);
      }
    }
  }
  return inits;
}

/// Runs every (parameter draw, init, method) trial; methods share the exact
/// problem instance and initial guess. Parameter draws are parallelized,
/// each owning the RNG stream (seed, draw index).
inline StudyResult run_toy_mc(const ToySpec& spec, const std::vector<MixtureMethod>& methods) {
  spec.validate();
  if (methods.empty()) throw std::invalid_argument("run_toy_mc: no methods");
  const std::vector<Eigen::VectorXd> inits = toy_init_grid(spec);
  const int per_draw = static_cast<int>(inits.size()) * static_cast<int>(methods.size());

  StudyResult result;
  result.records.resize(static_cast<std::size_t>(spec.n_param_draws) *
                        static_cast<std::size_t>(per_draw));

  parallel_for(
      spec.n_param_draws,
      [&](int draw) {
        Rng rng = Rng::stream(spec.rng_seed, static_cast<std::uint64_t>(draw));
        const ToyInstance instance = gen_toy_mixture(spec, rng);
        SolverConfig cfg = spec.solver;
        std::size_t out = static_cast<std::size_t>(draw) * static_cast<std::size_t>(per_draw);
        for (std::size_t init_idx = 0; init_idx < inits.size(); ++init_idx) {
          const State x0{ManifoldElement::RealVector(inits[init_idx])};
          for (MixtureMethod method : methods) {
            Problem problem;
            problem.add_variable(x0[0]);
            problem.add_factor(std::make_shared<MixtureFactor>(
                std::vector<int>{0}, instance.mixture, method,
                MixtureEvalOptions{spec.msm_delta}));

            TrialRecord rec;
            rec.trial_id = draw * static_cast<int>(inits.size()) + static_cast<int>(init_idx);
            rec.method = method;
            const auto t0 = std::chrono::steady_clock::now();
            try {
              const OptimizationResult r = lm_solve(problem, x0, cfg);
              rec.converged = r.converged;
              rec.iterations = r.iterations;
              rec.err_norm = (r.estimate[0].coordinates() - instance.ground_truth).norm();
              rec.success = rec.err_norm <= spec.success_tol;
            } catch (const std::exception&) {
              rec.converged = false;
              rec.success = false;
              rec.iterations = cfg.max_iters;
              rec.err_norm = (inits[init_idx] - instance.ground_truth).norm();
            }
            const auto t1 = std::chrono::steady_clock::now();
            rec.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
            result.records[out++] = rec;
          }
        }
      },
      spec.n_threads);

  result.aggregates = aggregate_all(methods, result.records);
  return result;
}

}  // namespace gmmnls::bench

#endif  // GMMNLS_BENCH_TOY_HPP
