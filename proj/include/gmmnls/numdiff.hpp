#ifndef GMMNLS_NUMDIFF_HPP
#define GMMNLS_NUMDIFF_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmmnls/lie.hpp"

namespace gmmnls {

struct DiffConfig {
  double step = 1e-6;
  /// Step for second differences; rounding error grows as eps/h^2, so the
  /// Hessian step sits near eps^(1/4) rather than at the Jacobian step.
  double hessian_step = 1e-4;
  /// Perturb through oplus; required for group-valued states.
  bool manifold_aware = true;
};

namespace numdiff_detail {

inline State perturbed(const State& x, int slot, const Eigen::VectorXd& xi,
                       const DiffConfig& cfg) {
  State out = x;
  const auto idx = static_cast<std::size_t>(slot);
  if (!cfg.manifold_aware && x[idx].kind() != ManifoldKind::RealVector) {
    throw std::invalid_argument("coordinate perturbation requires RealVector states");
  }
  out[idx] = oplus(x[idx], xi);
  return out;
}

inline int state_dim(const State& x) {
  int n = 0;
  for (const auto& v : x) n += v.tangent_dim();
  return n;
}

}  // namespace numdiff_detail

/// Central-difference Jacobian of f along each tangent axis (via oplus).
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const State&)>& f,
                                   const State& x, const DiffConfig& cfg = {}) {
  if (!(cfg.step > 0.0)) throw std::invalid_argument("fd_jacobian: step must be positive");
  const int n = numdiff_detail::state_dim(x);
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), n);
  int col = 0;
  for (std::size_t slot = 0; slot < x.size(); ++slot) {
    const int dim = x[slot].tangent_dim();
    for (int i = 0; i < dim; ++i) {
      Eigen::VectorXd xi = Eigen::VectorXd::Zero(dim);
      xi(i) = cfg.step;
      const Eigen::VectorXd fp =
          f(numdiff_detail::perturbed(x, static_cast<int>(slot), xi, cfg));
      xi(i) = -cfg.step;
      const Eigen::VectorXd fm =
          f(numdiff_detail::perturbed(x, static_cast<int>(slot), xi, cfg));
      if (!fp.allFinite() || !fm.allFinite()) {
        throw std::runtime_error("fd_jacobian: non-finite function sample");
      }
      jac.col(col++) = (fp - fm) / (2.0 * cfg.step);
    }
  }
  return jac;
}

inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const ManifoldElement&)>& f,
                                   const ManifoldElement& x, const DiffConfig& cfg = {}) {
  return fd_jacobian([&f](const State& s) { return f(s[0]); }, State{x}, cfg);
}

/// Central second-difference Hessian of a scalar function, symmetrized.
inline Eigen::MatrixXd fd_hessian(const std::function<double(const State&)>& fn, const State& x,
                                  const DiffConfig& cfg = {}) {
  if (!(cfg.hessian_step > 0.0)) throw std::invalid_argument("fd_hessian: step must be positive");
  const int n = numdiff_detail::state_dim(x);
  const double h = cfg.hessian_step;
  const double f0 = fn(x);

  // Perturbations are expressed in the full stacked tangent space, then
  // routed to the owning slot.
  const auto eval = [&](const Eigen::VectorXd& xi_full) {
    State y = x;
    int off = 0;
    for (std::size_t slot = 0; slot < y.size(); ++slot) {
      const int dim = y[slot].tangent_dim();
      const Eigen::VectorXd xi = xi_full.segment(off, dim);
      if ((xi.array() != 0.0).any()) {
        y = numdiff_detail::perturbed(y, static_cast<int>(slot), xi, cfg);
      }
      off += dim;
    }
    const double v = fn(y);
    if (!std::isfinite(v)) throw std::runtime_error("fd_hessian: non-finite function sample");
    return v;
  };

  Eigen::MatrixXd hess(n, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(n);
    xi(i) = h;
    const double fp = eval(xi);
    xi(i) = -h;
    const double fm = eval(xi);
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (int j = i + 1; j < n; ++j) {
      Eigen::VectorXd xij = Eigen::VectorXd::Zero(n);
      xij(i) = h;
      xij(j) = h;
      const double fpp = eval(xij);
      xij(j) = -h;
      const double fpm = eval(xij);
      xij(i) = -h;
      const double fmm = eval(xij);
      xij(j) = h;
      const double fmp = eval(xij);
      hess(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      hess(j, i) = hess(i, j);
    }
  }
  return 0.5 * (hess + hess.transpose());
}

inline Eigen::MatrixXd fd_hessian(const std::function<double(const ManifoldElement&)>& fn,
                                  const ManifoldElement& x, const DiffConfig& cfg = {}) {
  return fd_hessian([&fn](const State& s) { return fn(s[0]); }, State{x}, cfg);
}

namespace numdiff_detail {

/// Damped Newton refinement on finite-difference derivatives. Self-contained
/// so ground-truth generation does not share a code path with the solver
/// under test.
inline Eigen::VectorXd fd_refine(const std::function<double(const Eigen::VectorXd&)>& fn,
                                 Eigen::VectorXd x, int max_iters = 60) {
  const int n = static_cast<int>(x.size());
  const auto as_state = [](const Eigen::VectorXd& v) {
    return State{ManifoldElement::RealVector(v)};
  };
  double fx = fn(x);
  double lambda = 1e-6;
  for (int iter = 0; iter < max_iters; ++iter) {
    const DiffConfig cfg;
    Eigen::VectorXd grad(n);
    {
      const double h = cfg.step;
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        grad(i) = (fn(xp) - fn(xm)) / (2.0 * h);
      }
    }
    const Eigen::MatrixXd hess =
        fd_hessian([&](const State& s) { return fn(s[0].coordinates()); }, as_state(x), cfg);
    bool stepped = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      const Eigen::MatrixXd damped = hess + lambda * Eigen::MatrixXd::Identity(n, n);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd dx = ldlt.solve(-grad);
      if (!dx.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const double f_try = fn(x + dx);
      if (f_try <= fx) {
        if (dx.norm() < 1e-11) {
          x += dx;
          return x;
        }
        x += dx;
        fx = f_try;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) break;
  }
  return x;
}

}  // namespace numdiff_detail

/// Global minimizer of a scalar function over a box: dense grid search
/// followed by local refinement from the best cell.
inline Eigen::VectorXd grid_global_optimum(
    const std::function<double(const Eigen::VectorXd&)>& fn,
    const std::vector<std::pair<double, double>>& bounds, int resolution, bool refine = true) {
  const int dim = static_cast<int>(bounds.size());
  if (dim < 1 || dim > 2) throw std::invalid_argument("grid_global_optimum supports 1D and 2D");
  if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");

  Eigen::VectorXd best(dim);
  double best_value = std::numeric_limits<double>::infinity();
  const auto axis_value = [&](int axis, int idx) {
    const auto [lo, hi] = bounds[static_cast<std::size_t>(axis)];
    return lo + (hi - lo) * static_cast<double>(idx) / static_cast<double>(resolution - 1);
  };

  Eigen::VectorXd point(dim);
  if (dim == 1) {
    for (int i = 0; i < resolution; ++i) {
      point(0) = axis_value(0, i);
      const double v = fn(point);
      if (v < best_value) {
        best_value = v;
        best = point;
      }
    }
  } else {
    for (int i = 0; i < resolution; ++i) {
      point(0) = axis_value(0, i);
      for (int j = 0; j < resolution; ++j) {
        point(1) = axis_value(1, j);
        const double v = fn(point);
        if (v < best_value) {
          best_value = v;
          best = point;
        }
      }
    }
  }
  if (!refine) return best;
  const Eigen::VectorXd refined = numdiff_detail::fd_refine(fn, best);
  return (fn(refined) <= best_value) ? refined : best;
}

}  // namespace gmmnls

#endif  // GMMNLS_NUMDIFF_HPP
