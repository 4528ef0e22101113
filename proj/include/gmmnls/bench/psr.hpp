#ifndef GMMNLS_BENCH_PSR_HPP
#define GMMNLS_BENCH_PSR_HPP

#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmmnls/bench/metrics.hpp"
#include "gmmnls/parallel.hpp"
#include "gmmnls/rng.hpp"
#include "gmmnls/solver.hpp"

namespace gmmnls::bench {

/// Point-set registration study: estimate the SE(2)/SE(3) transform aligning
/// an uncertain source cloud to an uncertain reference cloud, with data
/// association handled by a uniform-weight Gaussian mixture over all
/// reference points.
struct PsrSpec {
  ManifoldKind space = ManifoldKind::SE2;
  int n_landmarks = 15;
  double landmark_lo = -5.0;
  double landmark_hi = 5.0;
  double dup_fraction = 0.3;
  int dup_count = 4;
  double dup_spread_var = 0.1;
  int n_configs = 10;
  int n_pairs = 10;
  double rot_range = 15.0 / 180.0;  // radians, per rotation axis
  double trans_range = 0.5;
  double cov_diag_lo = 0.1;
  double cov_diag_hi = 0.6;
  std::uint64_t rng_seed = kDefaultSeed;
  SolverConfig solver;
  double msm_delta = 1.0;
  int n_threads = 0;

  static PsrSpec for_space(ManifoldKind space) {
    PsrSpec spec;
    spec.space = space;
    spec.n_landmarks = (space == ManifoldKind::SE3) ? 20 : 15;
    return spec;
  }

  int point_dim() const { return (space == ManifoldKind::SE3) ? 3 : 2; }
  ManifoldKind rotation_kind() const {
    return (space == ManifoldKind::SE3) ? ManifoldKind::SO3 : ManifoldKind::SO2;
  }

  void validate() const {
    if (space != ManifoldKind::SE2 && space != ManifoldKind::SE3) {
      throw std::invalid_argument("psr space must be SE2 or SE3");
    }
    if (n_landmarks < 1 || n_configs < 1 || n_pairs < 1) {
      throw std::invalid_argument("psr counts must be positive");
    }
  }
};

/// Landmarks drawn uniformly in the box; a fraction of them duplicated
/// dup_count times with Gaussian spread around the original.
inline std::vector<Eigen::VectorXd> gen_psr_landmarks(const PsrSpec& spec, Rng& rng) {
  spec.validate();
  const int nd = spec.point_dim();
  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(spec.n_landmarks * (1 + spec.dup_count)));
  for (int i = 0; i < spec.n_landmarks; ++i) {
    Eigen::VectorXd p(nd);
    for (int a = 0; a < nd; ++a) p(a) = rng.uniform(spec.landmark_lo, spec.landmark_hi);
    points.push_back(p);
  }
  const int n_dup = static_cast<int>(spec.dup_fraction * spec.n_landmarks);
  const double spread = std::sqrt(spec.dup_spread_var);
  for (int i = 0; i < n_dup; ++i) {
    for (int c = 0; c < spec.dup_count; ++c) {
      Eigen::VectorXd p = points[static_cast<std::size_t>(i)];
      for (int a = 0; a < nd; ++a) p(a) += spread * rng.normal();
      points.push_back(p);
    }
  }
  return points;
}

/// Random SPD covariance C D C^T with diagonal entries U(lo, hi) and a
/// random rotation drawn axis-wise from U(-pi, pi).
inline Eigen::MatrixXd sample_psr_covariance(const PsrSpec& spec, Rng& rng) {
  const int nd = spec.point_dim();
  Eigen::VectorXd diag(nd);
  for (int a = 0; a < nd; ++a) diag(a) = rng.uniform(spec.cov_diag_lo, spec.cov_diag_hi);
  const int rot_dim = (nd == 3) ? 3 : 1;
  Eigen::VectorXd xi(rot_dim);
  for (int a = 0; a < rot_dim; ++a) xi(a) = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const Eigen::MatrixXd C = exp_map(xi, spec.rotation_kind()).rotation();
  return C * diag.asDiagonal() * C.transpose();
}

struct PsrInstance {
  std::vector<Eigen::VectorXd> ref_points;  // reference cloud, world frame
  std::vector<Eigen::VectorXd> src_points;  // source cloud, source frame
  Eigen::MatrixXd sigma_m;                  // source point noise covariance
  Eigen::MatrixXd sigma_f;                  // reference point noise covariance
  ManifoldElement transform_truth;
};

/// One noisy cloud pair over a fixed landmark set: sample the noise
/// covariances and the ground-truth transform, then corrupt both clouds.
inline PsrInstance gen_psr_instance(const PsrSpec& spec,
                                    const std::vector<Eigen::VectorXd>& landmarks, Rng& rng) {
  spec.validate();
  const int nd = spec.point_dim();
  PsrInstance inst;
  inst.sigma_m = sample_psr_covariance(spec, rng);
  inst.sigma_f = sample_psr_covariance(spec, rng);

  const int rot_dim = (nd == 3) ? 3 : 1;
  Eigen::VectorXd xi(rot_dim + nd);
  for (int a = 0; a < rot_dim; ++a) xi(a) = rng.uniform(-spec.rot_range, spec.rot_range);
  for (int a = 0; a < nd; ++a) xi(rot_dim + a) = rng.uniform(-spec.trans_range, spec.trans_range);
  inst.transform_truth = exp_map(xi, spec.space);

  const Eigen::MatrixXd chol_f = Eigen::LLT<Eigen::MatrixXd>(inst.sigma_f).matrixL();
  const Eigen::MatrixXd chol_m = Eigen::LLT<Eigen::MatrixXd>(inst.sigma_m).matrixL();
  const Eigen::MatrixXd& C = inst.transform_truth.rotation();
  const Eigen::VectorXd& r = inst.transform_truth.translation();

  const auto noise = [&rng, nd](const Eigen::MatrixXd& chol) {
    Eigen::VectorXd z(nd);
    for (int a = 0; a < nd; ++a) z(a) = rng.normal();
    return Eigen::VectorXd(chol * z);
  };
  inst.ref_points.reserve(landmarks.size());
  inst.src_points.reserve(landmarks.size());
  for (const auto& lm : landmarks) inst.ref_points.push_back(lm + noise(chol_f));
  for (const auto& lm : landmarks) {
    inst.src_points.push_back(C.transpose() * (lm - r) + noise(chol_m));
  }
  return inst;
}

/// Mixture likelihood of one source point over every reference point. The
/// residual covariance C Sigma_m C^T + Sigma_f is rebuilt from the rotation
/// iterate at every linearization.
class PsrMixtureFactor final : public Factor {
 public:
  PsrMixtureFactor(std::vector<int> slots, std::shared_ptr<const PsrInstance> instance,
                   int source_index, MixtureMethod method, MixtureEvalOptions options = {})
      : Factor(std::move(slots)),
        instance_(std::move(instance)),
        source_index_(source_index),
        method_(method),
        options_(options) {}

  FactorLinearization linearize(const State& local_vars) const override {
    const ManifoldElement& T = local_vars.at(0);
    const Eigen::MatrixXd& C = T.rotation();
    const Eigen::VectorXd& r = T.translation();
    const PsrInstance& inst = *instance_;
    const int nd = static_cast<int>(r.size());
    const auto n_ref = inst.ref_points.size();

    const Eigen::MatrixXd cov = C * inst.sigma_m * C.transpose() + inst.sigma_f;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("psr residual covariance is not positive definite");
    }
    const Eigen::MatrixXd chol_lower = llt.matrixL();
    double half_log_det = 0.0;
    for (int a = 0; a < nd; ++a) half_log_det += std::log(chol_lower(a, a));
    const Eigen::MatrixXd sqrt_info =
        chol_lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(nd, nd));
    const double log_alpha = -std::log(static_cast<double>(n_ref)) - half_log_det;

    const Eigen::VectorXd v = C * inst.src_points[static_cast<std::size_t>(source_index_)] + r;
    Eigen::MatrixXd eta_jac(nd, T.tangent_dim());
    if (nd == 2) {
      eta_jac(0, 0) = v(1);   // -S v with S = [[0,-1],[1,0]]
      eta_jac(1, 0) = -v(0);
      eta_jac.block(0, 1, 2, 2) = -Eigen::Matrix2d::Identity();
    } else {
      eta_jac.block(0, 0, 3, 3) = lie_detail::skew3(v.head<3>());
      eta_jac.block(0, 3, 3, 3) = -Eigen::Matrix3d::Identity();
    }
    const Eigen::MatrixXd comp_jac = sqrt_info * eta_jac;

    std::vector<EvaluatedComponent> comps;
    comps.reserve(n_ref);
    for (const auto& p : inst.ref_points) {
      comps.push_back(make_evaluated(log_alpha, sqrt_info * (p - v), comp_jac));
    }
    return evaluate_mixture(method_, comps, options_);
  }

 private:
  std::shared_ptr<const PsrInstance> instance_;
  int source_index_;
  MixtureMethod method_;
  MixtureEvalOptions options_;
};

inline Problem build_psr_problem(std::shared_ptr<const PsrInstance> instance,
                                 ManifoldKind space, MixtureMethod method,
                                 MixtureEvalOptions options = {}) {
  Problem problem;
  problem.add_variable(ManifoldElement::Identity(space));
  for (std::size_t i = 0; i < instance->src_points.size(); ++i) {
    problem.add_factor(std::make_shared<PsrMixtureFactor>(
        std::vector<int>{0}, instance, static_cast<int>(i), method, options));
  }
  return problem;
}

/// Exact joint NLL of a PSR instance at T (sum of per-source mixture NLLs
/// with the residual covariance frozen at T's rotation).
inline double psr_nll(const PsrInstance& instance, ManifoldKind space,
                      const ManifoldElement& T) {
  const Eigen::MatrixXd& C = T.rotation();
  const Eigen::VectorXd& r = T.translation();
  const Eigen::MatrixXd cov = C * instance.sigma_m * C.transpose() + instance.sigma_f;
  const Eigen::MatrixXd info = cov.inverse();
  const double log_det = std::log(cov.determinant());
  const double log_alpha =
      -std::log(static_cast<double>(instance.ref_points.size())) - 0.5 * log_det;
  double total = 0.0;
  for (const auto& m : instance.src_points) {
    const Eigen::VectorXd v = C * m + r;
    Eigen::VectorXd logs(static_cast<Eigen::Index>(instance.ref_points.size()));
    for (std::size_t j = 0; j < instance.ref_points.size(); ++j) {
      const Eigen::VectorXd eta = instance.ref_points[j] - v;
      logs(static_cast<Eigen::Index>(j)) = log_alpha - 0.5 * eta.dot(info * eta);
    }
    total -= log_sum_exp(logs);
  }
  return total;
}

/// Runs n_configs x n_pairs trials; every method sees the identical instance
/// and the identity initial guess. Landmark sets are shared within a config.
inline StudyResult run_psr_mc(const PsrSpec& spec, const std::vector<MixtureMethod>& methods) {
  spec.validate();
  if (methods.empty()) throw std::invalid_argument("run_psr_mc: no methods");
  constexpr std::uint64_t kConfigStreamTag = 0x636f6e66;  // distinct stream family

  std::vector<std::vector<Eigen::VectorXd>> landmark_sets(
      static_cast<std::size_t>(spec.n_configs));
  for (int c = 0; c < spec.n_configs; ++c) {
    Rng rng = Rng::stream(spec.rng_seed ^ kConfigStreamTag, static_cast<std::uint64_t>(c));
    landmark_sets[static_cast<std::size_t>(c)] = gen_psr_landmarks(spec, rng);
  }

  const int n_trials = spec.n_configs * spec.n_pairs;
  StudyResult result;
  result.records.resize(static_cast<std::size_t>(n_trials) * methods.size());

  parallel_for(
      n_trials,
      [&](int trial) {
        const int config = trial / spec.n_pairs;
        Rng rng = Rng::stream(spec.rng_seed, static_cast<std::uint64_t>(trial));
        auto instance = std::make_shared<const PsrInstance>(
            gen_psr_instance(spec, landmark_sets[static_cast<std::size_t>(config)], rng));
        const State x0{ManifoldElement::Identity(spec.space)};
        const int rot_dim = x0[0].rotation_tangent_dim();
        const int dim = x0[0].tangent_dim();

        std::size_t out = static_cast<std::size_t>(trial) * methods.size();
        for (MixtureMethod method : methods) {
          Problem problem = build_psr_problem(instance, spec.space, method,
                                              MixtureEvalOptions{spec.msm_delta});
          TrialRecord rec;
          rec.trial_id = trial;
          rec.method = method;
          const auto t0 = std::chrono::steady_clock::now();
          try {
            const OptimizationResult r = lm_solve(problem, x0, spec.solver);
            rec.converged = r.converged;
            rec.success = r.converged;
            rec.iterations = r.iterations;
            const Eigen::VectorXd err = ominus(r.estimate[0], instance->transform_truth);
            rec.err_norm = err.norm();
            rec.err_rot_deg = err.head(rot_dim).norm() * 180.0 / std::numbers::pi;
            rec.err_trans_m = err.tail(dim - rot_dim).norm();
            try {
              const Eigen::MatrixXd cov = laplace_covariance(r);
              const Eigen::VectorXd scaled = Eigen::LDLT<Eigen::MatrixXd>(cov).solve(err);
              rec.anees_term = err.dot(scaled) / dim;
            } catch (const RankDeficiencyError&) {
              rec.anees_term = undefined();  // excluded from ANEES only
            }
          } catch (const std::exception&) {
            rec.converged = false;
            rec.success = false;
            rec.iterations = spec.solver.max_iters;
            rec.err_norm = undefined();
            rec.anees_term = undefined();
          }
          const auto t1 = std::chrono::steady_clock::now();
          rec.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
          result.records[out++] = rec;
        }
      },
      spec.n_threads);

  result.aggregates = aggregate_all(methods, result.records);
  return result;
}

}  // namespace gmmnls::bench

#endif  // GMMNLS_BENCH_PSR_HPP
