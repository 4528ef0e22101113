#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "gmmnls/bench/psr.hpp"
#include "gmmnls/bench/selftest.hpp"
#include "gmmnls/bench/sweep.hpp"
#include "gmmnls/bench/toy.hpp"
#include "gmmnls/numdiff.hpp"

using namespace gmmnls;
using namespace gmmnls::bench;

namespace {

ToySpec tiny_toy_spec(int dim) {
  ToySpec spec;
  spec.dim = dim;
  spec.n_param_draws = 4;
  spec.n_inits = (dim == 1) ? 10 : 9;
  spec.grid_resolution = (dim == 1) ? 2001 : 401;
  spec.rng_seed = 7;
  return spec;
}

const std::vector<MixtureMethod> kAllMethods = {
    MixtureMethod::MaxMixture, MixtureMethod::SumMixture, MixtureMethod::MaxSumMixture,
    MixtureMethod::HessianSumMixture};

}  // namespace

TEST_CASE("toy mixture parameters respect the sampling law", "[bench][toy]") {
  ToySpec spec = tiny_toy_spec(1);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng = Rng::stream(spec.rng_seed, seed);
    const ToyInstance inst = gen_toy_mixture(spec, rng);
    double weight_sum = 0.0;
    double alpha_first = 0.0;
    for (int k = 0; k < inst.mixture.size(); ++k) {
      const auto& c = inst.mixture.components()[static_cast<std::size_t>(k)];
      // reconstruct w and R eigenvalue from alpha and sqrt-info (scalar case)
      const double sqrt_info = c.sqrt_info()(0, 0);
      const double variance = 1.0 / (sqrt_info * sqrt_info);
      const double weight = c.alpha() / sqrt_info;
      weight_sum += weight;
      if (k == 0) {
        alpha_first = variance;
        REQUIRE(c.mean().norm() == 0.0);
        REQUIRE(variance >= 0.4);
        REQUIRE(variance <= 1.0);
      } else {
        // R_k = m_k R_1 with m_k in [4, 10]
        REQUIRE(variance / alpha_first >= 4.0 - 1e-12);
        REQUIRE(variance / alpha_first <= 10.0 + 1e-12);
      }
    }
    REQUIRE(weight_sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("toy generation is deterministic for a fixed seed", "[bench][toy]") {
  ToySpec spec = tiny_toy_spec(1);
  spec.rng_seed = 42;
  Rng r1 = Rng::stream(spec.rng_seed, 3);
  Rng r2 = Rng::stream(spec.rng_seed, 3);
  const ToyInstance a = gen_toy_mixture(spec, r1);
  const ToyInstance b = gen_toy_mixture(spec, r2);
  REQUIRE(a.ground_truth == b.ground_truth);
  for (int k = 0; k < a.mixture.size(); ++k) {
    const auto& ca = a.mixture.components()[static_cast<std::size_t>(k)];
    const auto& cb = b.mixture.components()[static_cast<std::size_t>(k)];
    REQUIRE(ca.log_alpha() == cb.log_alpha());
    REQUIRE(ca.mean() == cb.mean());
  }
}

TEST_CASE("toy init grid is uniform and sized", "[bench][toy]") {
  ToySpec spec = tiny_toy_spec(1);
  spec.n_inits = 100;
  const auto inits1 = toy_init_grid(spec);
  REQUIRE(inits1.size() == 100);
  REQUIRE(inits1.front()(0) == Catch::Approx(-4.0));
  REQUIRE(inits1.back()(0) == Catch::Approx(4.0));

  spec.dim = 2;
  const auto inits2 = toy_init_grid(spec);
  REQUIRE(inits2.size() == 100);
  REQUIRE(inits2.front()(0) == Catch::Approx(-4.0));
  REQUIRE(inits2.back()(1) == Catch::Approx(4.0));
}

TEST_CASE("degenerate single-component study converges everywhere", "[bench][toy]") {
  ToySpec spec = tiny_toy_spec(1);
  spec.n_components = 1;
  spec.n_param_draws = 3;
  spec.n_inits = 10;
  const StudyResult result = run_toy_mc(spec, kAllMethods);
  for (const auto& agg : result.aggregates) {
    INFO(to_string(agg.method));
    REQUIRE(agg.success_rate == 1.0);
    REQUIRE(agg.avg_iterations <= 3.0);
  }
}

TEST_CASE("toy study is reproducible bit for bit", "[bench][toy]") {
  const ToySpec spec = tiny_toy_spec(1);
  const StudyResult a = run_toy_mc(spec, kAllMethods);
  const StudyResult b = run_toy_mc(spec, kAllMethods);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].trial_id == b.records[i].trial_id);
    REQUIRE(a.records[i].method == b.records[i].method);
    REQUIRE(a.records[i].iterations == b.records[i].iterations);
    REQUIRE(a.records[i].err_norm == b.records[i].err_norm);  // bitwise
    REQUIRE(a.records[i].success == b.records[i].success);
  }
}

TEST_CASE("toy parallel and serial schedules agree", "[bench][toy]") {
  ToySpec spec = tiny_toy_spec(1);
  spec.n_threads = 1;
  const StudyResult serial = run_toy_mc(spec, kAllMethods);
  spec.n_threads = 4;
  const StudyResult parallel = run_toy_mc(spec, kAllMethods);
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    REQUIRE(serial.records[i].err_norm == parallel.records[i].err_norm);
    REQUIRE(serial.records[i].iterations == parallel.records[i].iterations);
  }
}

TEST_CASE("psr landmark duplication bookkeeping", "[bench][psr]") {
  PsrSpec spec = PsrSpec::for_space(ManifoldKind::SE2);
  Rng rng = Rng::stream(5, 0);
  const auto landmarks = gen_psr_landmarks(spec, rng);
  // 15 base + floor(0.3 * 15) = 4 duplicated 4 times each
  REQUIRE(landmarks.size() == 15 + 4 * 4);

  PsrSpec spec3 = PsrSpec::for_space(ManifoldKind::SE3);
  Rng rng3 = Rng::stream(5, 1);
  REQUIRE(gen_psr_landmarks(spec3, rng3).size() == 20 + 6 * 4);
}

TEST_CASE("psr instance measurement counts match the cloud size", "[bench][psr]") {
  PsrSpec spec = PsrSpec::for_space(ManifoldKind::SE2);
  Rng rng = Rng::stream(9, 0);
  const auto landmarks = gen_psr_landmarks(spec, rng);
  const PsrInstance inst = gen_psr_instance(spec, landmarks, rng);
  REQUIRE(inst.src_points.size() == landmarks.size());
  REQUIRE(inst.ref_points.size() == landmarks.size());
}

TEST_CASE("psr clouds are deterministic for a fixed seed", "[bench][psr]") {
  PsrSpec spec = PsrSpec::for_space(ManifoldKind::SE2);
  Rng a = Rng::stream(11, 2);
  Rng b = Rng::stream(11, 2);
  const auto lm_a = gen_psr_landmarks(spec, a);
  const auto lm_b = gen_psr_landmarks(spec, b);
  for (std::size_t i = 0; i < lm_a.size(); ++i) REQUIRE(lm_a[i] == lm_b[i]);
  const PsrInstance ia = gen_psr_instance(spec, lm_a, a);
  const PsrInstance ib = gen_psr_instance(spec, lm_b, b);
  for (std::size_t i = 0; i < ia.src_points.size(); ++i) {
    REQUIRE(ia.src_points[i] == ib.src_points[i]);
    REQUIRE(ia.ref_points[i] == ib.ref_points[i]);
  }
}

TEST_CASE("near-noiseless psr is recovered by every method", "[bench][psr]") {
  PsrSpec spec = PsrSpec::for_space(ManifoldKind::SE2);
  Rng rng = Rng::stream(13, 0);
  const auto landmarks = gen_psr_landmarks(spec, rng);
  PsrInstance inst = gen_psr_instance(spec, landmarks, rng);
  const double eps = 1e-8;
  inst.sigma_m = eps * Eigen::MatrixXd::Identity(2, 2);
  inst.sigma_f = eps * Eigen::MatrixXd::Identity(2, 2);
  // regenerate clouds without noise
  const Eigen::MatrixXd& C = inst.transform_truth.rotation();
  const Eigen::VectorXd& r = inst.transform_truth.translation();
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    inst.ref_points[i] = landmarks[i];
    inst.src_points[i] = C.transpose() * (landmarks[i] - r);
  }
  auto shared = std::make_shared<const PsrInstance>(inst);
  for (MixtureMethod m : kAllMethods) {
    Problem p = build_psr_problem(shared, spec.space, m);
    const OptimizationResult res =
        lm_solve(p, {ManifoldElement::Identity(ManifoldKind::SE2)}, spec.solver);
    const Eigen::VectorXd err = ominus(res.estimate[0], inst.transform_truth);
    INFO(to_string(m));
    REQUIRE(err.norm() < 1e-3);
  }
}

TEST_CASE("psr covariance matches the exact-NLL Hessian when weights are binary",
          "[bench][psr]") {
  PsrSpec spec = PsrSpec::for_space(ManifoldKind::SE2);
  spec.n_landmarks = 8;
  spec.dup_fraction = 0.0;  // isotropic small noise keeps associations unambiguous
  Rng rng = Rng::stream(17, 0);
  const auto landmarks = gen_psr_landmarks(spec, rng);
  PsrInstance inst = gen_psr_instance(spec, landmarks, rng);
  const double var = 1e-3;
  inst.sigma_m = var * Eigen::MatrixXd::Identity(2, 2);
  inst.sigma_f = var * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd& C = inst.transform_truth.rotation();
  const Eigen::VectorXd& r = inst.transform_truth.translation();
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    Eigen::Vector2d nf(rng.normal(), rng.normal());
    Eigen::Vector2d nm(rng.normal(), rng.normal());
    inst.ref_points[i] = landmarks[i] + sd * nf;
    inst.src_points[i] = C.transpose() * (landmarks[i] - r) + sd * nm;
  }
  auto shared = std::make_shared<const PsrInstance>(inst);
  Problem p = build_psr_problem(shared, spec.space, MixtureMethod::HessianSumMixture);
  const OptimizationResult res =
      lm_solve(p, {ManifoldElement::Identity(ManifoldKind::SE2)}, spec.solver);
  REQUIRE(res.converged);

  const Eigen::MatrixXd cov = laplace_covariance(res);
  const Eigen::MatrixXd exact_hessian = fd_hessian(
      [&](const State& s) { return psr_nll(*shared, spec.space, s[0]); },
      State{res.estimate[0]});
  const Eigen::MatrixXd exact_cov = exact_hessian.inverse();
  const double rel = (cov - exact_cov).norm() / exact_cov.norm();
  REQUIRE(rel < 0.05);
}

TEST_CASE("psr study runs and is reproducible", "[bench][psr]") {
  PsrSpec spec = PsrSpec::for_space(ManifoldKind::SE2);
  spec.n_configs = 2;
  spec.n_pairs = 2;
  spec.rng_seed = 23;
  const StudyResult a = run_psr_mc(spec, kAllMethods);
  const StudyResult b = run_psr_mc(spec, kAllMethods);
  REQUIRE(a.records.size() == 4 * kAllMethods.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].err_norm == b.records[i].err_norm);
    REQUIRE(a.records[i].iterations == b.records[i].iterations);
    REQUIRE(a.records[i].anees_term == b.records[i].anees_term);
  }
  for (const auto& rec : a.records) {
    REQUIRE(std::isfinite(rec.err_rot_deg));
    REQUIRE(std::isfinite(rec.err_trans_m));
  }
}

TEST_CASE("rmse matches its definition on a hand-built list", "[bench][metrics]") {
  std::vector<TrialRecord> records(3);
  const double errs[3] = {0.1, 0.2, 0.4};
  for (int i = 0; i < 3; ++i) {
    records[static_cast<std::size_t>(i)].method = MixtureMethod::MaxMixture;
    records[static_cast<std::size_t>(i)].err_norm = errs[i];
  }
  const TrialAggregate agg = aggregate(MixtureMethod::MaxMixture, records);
  const double expected = std::sqrt((0.01 + 0.04 + 0.16) / 3.0);
  REQUIRE(agg.rmse == Catch::Approx(expected).margin(1e-12));

  // RMSE of identical estimates is zero
  for (auto& r : records) r.err_norm = 0.0;
  REQUIRE(aggregate(MixtureMethod::MaxMixture, records).rmse == 0.0);
}

TEST_CASE("synthetic anees concentrates at one", "[bench][metrics]") {
  Rng rng(29);
  Eigen::MatrixXd P(3, 3);
  P << 0.9, 0.2, -0.1, 0.2, 1.4, 0.3, -0.1, 0.3, 0.6;
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(P).matrixL();
  const Eigen::MatrixXd info = P.inverse();
  double acc = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    const Eigen::VectorXd e = chol * z;
    acc += e.dot(info * e) / 3.0;
  }
  const double anees = acc / n;
  REQUIRE(anees > 0.95);
  REQUIRE(anees < 1.05);
}

TEST_CASE("hessian sweep saturates to the dominant block far from the means",
          "[bench][sweep]") {
  const Mixture mix = default_sweep_mixture();
  const State far{ManifoldElement::RealVector(Eigen::VectorXd::Constant(1, 100.0))};
  const auto comps = mix.evaluate(far);
  const int dom = dominant_index(comps);
  const double dom_jtj =
      (comps[static_cast<std::size_t>(dom)].jacobian.transpose() *
       comps[static_cast<std::size_t>(dom)].jacobian)(0, 0);
  const double h_mm =
      (evaluate_max_mixture(comps).jacobian.transpose() * evaluate_max_mixture(comps).jacobian)(
          0, 0);
  const double h_hsm = (*evaluate_hsm(comps).hessian)(0, 0);
  const double h_msm = (evaluate_max_sum_mixture(comps, 1.0).jacobian.transpose() *
                        evaluate_max_sum_mixture(comps, 1.0).jacobian)(0, 0);
  REQUIRE(std::abs(h_mm - dom_jtj) / dom_jtj < 1e-6);
  REQUIRE(std::abs(h_hsm - dom_jtj) / dom_jtj < 1e-6);
  REQUIRE(std::abs(h_msm - dom_jtj) / dom_jtj < 1e-6);
}

TEST_CASE("hessian sweep equal-component midpoint", "[bench][sweep]") {
  // two equal components at x = 0: the weighted Hessian is the average block
  std::vector<GaussianComponent> comps(2);
  for (auto& c : comps) {
    c.weight = 0.5;
    c.mean = Eigen::VectorXd::Zero(1);
    c.error = [](const State& s) { return s[0].coordinates(); };
    c.error_jacobian = [](const State&) { return Eigen::MatrixXd::Identity(1, 1); };
  }
  comps[0].covariance = Eigen::MatrixXd::Constant(1, 1, 1.0);
  comps[1].covariance = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const Mixture mix(comps);
  const auto at_zero = mix.evaluate({ManifoldElement::RealVector(Eigen::VectorXd::Zero(1))});
  const double avg_jtj =
      0.5 * ((at_zero[0].jacobian.transpose() * at_zero[0].jacobian)(0, 0) +
             (at_zero[1].jacobian.transpose() * at_zero[1].jacobian)(0, 0));
  REQUIRE((*evaluate_hsm(at_zero).hessian)(0, 0) == Catch::Approx(avg_jtj).margin(1e-12));
}

TEST_CASE("hessian sweep rows and ordering", "[bench][sweep]") {
  const HessianSweepResult sweep = hessian_sweep_1d(default_sweep_mixture());
  REQUIRE(sweep.rows.size() == 1001);
  REQUIRE(sweep.rows.front().x == Catch::Approx(-5.0));
  REQUIRE(sweep.rows.back().x == Catch::Approx(5.0));
  REQUIRE(sweep.iad_hsm < sweep.iad_msm);
  REQUIRE(sweep.iad_hsm < sweep.iad_mm);
}

TEST_CASE("selftest suite passes", "[bench][selftest]") {
  const auto checks = run_selftest(kDefaultSeed);
  for (const auto& c : checks) {
    INFO(c.name << ": " << c.detail);
    REQUIRE(c.passed);
  }
}
