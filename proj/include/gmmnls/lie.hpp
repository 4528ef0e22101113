#ifndef GMMNLS_LIE_HPP
#define GMMNLS_LIE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmmnls {

enum class ManifoldKind { RealVector, SO2, SE2, SO3, SE3 };

inline std::string to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::RealVector: return "RealVector";
    case ManifoldKind::SO2: return "SO2";
    case ManifoldKind::SE2: return "SE2";
    case ManifoldKind::SO3: return "SO3";
    case ManifoldKind::SE3: return "SE3";
  }
  return "?";
}

namespace lie_detail {

// Below this rotation magnitude the exp/log coefficient functions switch to
// 2nd-order Taylor expansions.
constexpr double kSmallAngle = 1e-7;
// A rotation this close to pi makes the logarithm singular.
constexpr double kPiMargin = 1e-9;

inline Eigen::Matrix2d rot2(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Eigen::Matrix2d out;
  out << c, -s, s, c;
  return out;
}

inline Eigen::Matrix3d skew3(const Eigen::Vector3d& v) {
  Eigen::Matrix3d out;
  out << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return out;
}

/// sin(t)/t
inline double sinc(double t) {
  if (std::abs(t) < kSmallAngle) return 1.0 - t * t / 6.0;
  return std::sin(t) / t;
}

/// (1 - cos t)/t^2, evaluated as 2 sin^2(t/2)/t^2 to avoid cancellation.
inline double one_minus_cos_over_t2(double t) {
  if (std::abs(t) < kSmallAngle) return 0.5 - t * t / 24.0;
  const double s = std::sin(0.5 * t);
  return 2.0 * s * s / (t * t);
}

/// (t - sin t)/t^3
inline double t_minus_sin_over_t3(double t) {
  if (std::abs(t) < kSmallAngle) return 1.0 / 6.0 - t * t / 120.0;
  return (t - std::sin(t)) / (t * t * t);
}

/// Coefficient of phi^^2 in the inverse left Jacobian of SO(3):
/// 1/t^2 - cot(t/2)/(2t).
inline double inv_left_jacobian_coeff(double t) {
  if (std::abs(t) < kSmallAngle) return 1.0 / 12.0 + t * t / 720.0;
  return 1.0 / (t * t) - std::cos(0.5 * t) / (2.0 * t * std::sin(0.5 * t));
}

inline Eigen::Matrix3d rot3(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d cross = skew3(phi);
  return Eigen::Matrix3d::Identity() + sinc(theta) * cross +
         one_minus_cos_over_t2(theta) * cross * cross;
}

inline double so2_log(const Eigen::Matrix2d& C) {
  const double angle = std::atan2(C(1, 0), C(0, 0));
  if (std::abs(std::abs(angle) - std::numbers::pi) < kPiMargin) {
    throw std::domain_error("log_map: SO(2) rotation at pi is singular");
  }
  return angle;
}

inline Eigen::Vector3d so3_log(const Eigen::Matrix3d& C) {
  const double cos_theta = std::clamp(0.5 * (C.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (std::numbers::pi - theta < kPiMargin) {
    throw std::domain_error("log_map: SO(3) rotation at pi is singular");
  }
  Eigen::Vector3d axis_term;
  axis_term << C(2, 1) - C(1, 2), C(0, 2) - C(2, 0), C(1, 0) - C(0, 1);
  return axis_term / (2.0 * sinc(theta));
}

/// SE(2) translation part of exp: r = V(phi) rho.
inline Eigen::Matrix2d se2_V(double phi) {
  const double a = sinc(phi);
  const double b = phi * one_minus_cos_over_t2(phi);  // (1 - cos)/phi
  Eigen::Matrix2d out;
  out << a, -b, b, a;
  return out;
}

inline Eigen::Matrix2d se2_V_inv(double phi) {
  const double a = sinc(phi);
  const double b = phi * one_minus_cos_over_t2(phi);
  const double den = a * a + b * b;  // = 2(1 - cos phi)/phi^2, nonzero away from +-2pi
  Eigen::Matrix2d out;
  out << a, b, -b, a;
  return out / den;
}

inline Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d cross = skew3(phi);
  return Eigen::Matrix3d::Identity() + one_minus_cos_over_t2(theta) * cross +
         t_minus_sin_over_t3(theta) * cross * cross;
}

inline Eigen::Matrix3d so3_left_jacobian_inv(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d cross = skew3(phi);
  return Eigen::Matrix3d::Identity() - 0.5 * cross +
         inv_left_jacobian_coeff(theta) * cross * cross;
}

}  // namespace lie_detail

/// An element of R^n, SO(2), SE(2), SO(3) or SE(3), stored as an orthonormal
/// rotation matrix plus translation (or plain coordinates for R^n).
/// Perturbations are applied on the left: X <- exp(xi^) * X, with tangent
/// vectors ordered [rotation; translation].
class ManifoldElement {
 public:
  ManifoldElement() : kind_(ManifoldKind::RealVector) {}

  static ManifoldElement RealVector(const Eigen::VectorXd& coords) {
    ManifoldElement out;
    out.kind_ = ManifoldKind::RealVector;
    out.translation_ = coords;
    return out;
  }

  static ManifoldElement Identity(ManifoldKind kind, int real_dim = 0) {
    ManifoldElement out;
    out.kind_ = kind;
    switch (kind) {
      case ManifoldKind::RealVector:
        out.translation_ = Eigen::VectorXd::Zero(real_dim);
        break;
      case ManifoldKind::SO2:
        out.rotation_ = Eigen::Matrix2d::Identity();
        break;
      case ManifoldKind::SE2:
        out.rotation_ = Eigen::Matrix2d::Identity();
        out.translation_ = Eigen::Vector2d::Zero();
        break;
      case ManifoldKind::SO3:
        out.rotation_ = Eigen::Matrix3d::Identity();
        break;
      case ManifoldKind::SE3:
        out.rotation_ = Eigen::Matrix3d::Identity();
        out.translation_ = Eigen::Vector3d::Zero();
        break;
    }
    return out;
  }

  static ManifoldElement FromRotation(ManifoldKind kind, const Eigen::MatrixXd& C) {
    if (kind != ManifoldKind::SO2 && kind != ManifoldKind::SO3) {
      throw std::invalid_argument("FromRotation: kind must be SO2 or SO3");
    }
    ManifoldElement out;
    out.kind_ = kind;
    out.rotation_ = C;
    out.check_rotation();
    return out;
  }

  static ManifoldElement FromRigid(ManifoldKind kind, const Eigen::MatrixXd& C,
                                   const Eigen::VectorXd& r) {
    if (kind != ManifoldKind::SE2 && kind != ManifoldKind::SE3) {
      throw std::invalid_argument("FromRigid: kind must be SE2 or SE3");
    }
    ManifoldElement out;
    out.kind_ = kind;
    out.rotation_ = C;
    out.translation_ = r;
    out.check_rotation();
    if (r.size() != out.ambient_dim()) {
      throw std::invalid_argument("FromRigid: translation dimension mismatch");
    }
    return out;
  }

  ManifoldKind kind() const { return kind_; }

  bool has_rotation() const { return kind_ != ManifoldKind::RealVector; }

  bool has_translation() const {
    return kind_ == ManifoldKind::SE2 || kind_ == ManifoldKind::SE3 ||
           kind_ == ManifoldKind::RealVector;
  }

  /// Dimension of the ambient point space (2 or 3); 0 for RealVector.
  int ambient_dim() const {
    switch (kind_) {
      case ManifoldKind::SO2:
      case ManifoldKind::SE2: return 2;
      case ManifoldKind::SO3:
      case ManifoldKind::SE3: return 3;
      default: return 0;
    }
  }

  int tangent_dim() const {
    switch (kind_) {
      case ManifoldKind::RealVector: return static_cast<int>(translation_.size());
      case ManifoldKind::SO2: return 1;
      case ManifoldKind::SE2: return 3;
      case ManifoldKind::SO3: return 3;
      case ManifoldKind::SE3: return 6;
    }
    return 0;
  }

  /// Size of the leading rotation block of a tangent vector.
  int rotation_tangent_dim() const {
    switch (kind_) {
      case ManifoldKind::SO2:
      case ManifoldKind::SE2: return 1;
      case ManifoldKind::SO3:
      case ManifoldKind::SE3: return 3;
      default: return 0;
    }
  }

  const Eigen::MatrixXd& rotation() const {
    if (!has_rotation()) throw std::logic_error("rotation(): element has no rotation");
    return rotation_;
  }

  const Eigen::VectorXd& translation() const {
    if (kind_ != ManifoldKind::SE2 && kind_ != ManifoldKind::SE3) {
      throw std::logic_error("translation(): element has no translation");
    }
    return translation_;
  }

  const Eigen::VectorXd& coordinates() const {
    if (kind_ != ManifoldKind::RealVector) {
      throw std::logic_error("coordinates(): element is not a RealVector");
    }
    return translation_;
  }

  /// Group composition this * rhs (coordinate addition for RealVector).
  ManifoldElement compose(const ManifoldElement& rhs) const {
    require_same_kind(rhs, "compose");
    ManifoldElement out;
    out.kind_ = kind_;
    switch (kind_) {
      case ManifoldKind::RealVector:
        out.translation_ = translation_ + rhs.translation_;
        break;
      case ManifoldKind::SO2:
      case ManifoldKind::SO3:
        out.rotation_ = rotation_ * rhs.rotation_;
        break;
      case ManifoldKind::SE2:
      case ManifoldKind::SE3:
        out.rotation_ = rotation_ * rhs.rotation_;
        out.translation_ = rotation_ * rhs.translation_ + translation_;
        break;
    }
    return out;
  }

  ManifoldElement inverse() const {
    ManifoldElement out;
    out.kind_ = kind_;
    switch (kind_) {
      case ManifoldKind::RealVector:
        out.translation_ = -translation_;
        break;
      case ManifoldKind::SO2:
      case ManifoldKind::SO3:
        out.rotation_ = rotation_.transpose();
        break;
      case ManifoldKind::SE2:
      case ManifoldKind::SE3:
        out.rotation_ = rotation_.transpose();
        out.translation_ = -(out.rotation_ * translation_);
        break;
    }
    return out;
  }

  /// ||C^T C - I||_F; zero for RealVector.
  double orthonormality_defect() const {
    if (!has_rotation()) return 0.0;
    const Eigen::MatrixXd d =
        rotation_.transpose() * rotation_ -
        Eigen::MatrixXd::Identity(rotation_.rows(), rotation_.cols());
    return d.norm();
  }

 private:
  void check_rotation() const {
    const int n = ambient_dim();
    if (rotation_.rows() != n || rotation_.cols() != n) {
      throw std::invalid_argument("rotation matrix has wrong dimensions");
    }
    if (orthonormality_defect() > 1e-9) {
      throw std::invalid_argument("rotation matrix is not orthonormal");
    }
    if (std::abs(rotation_.determinant() - 1.0) > 1e-9) {
      throw std::invalid_argument("rotation matrix determinant is not +1");
    }
  }

  void require_same_kind(const ManifoldElement& rhs, const char* op) const {
    if (rhs.kind_ != kind_ || rhs.tangent_dim() != tangent_dim()) {
      throw std::invalid_argument(std::string(op) + ": mismatched manifold kinds");
    }
  }

  friend ManifoldElement exp_map(const Eigen::VectorXd&, ManifoldKind);
  friend Eigen::VectorXd log_map(const ManifoldElement&);

  ManifoldKind kind_ = ManifoldKind::RealVector;
  Eigen::MatrixXd rotation_;     // empty for RealVector
  Eigen::VectorXd translation_;  // coordinates for RealVector, r for SE; empty for SO
};

/// List of variables making up a problem state.
using State = std::vector<ManifoldElement>;

namespace lie_detail {
inline int expected_tangent_dim(ManifoldKind kind, int fallback) {
  switch (kind) {
    case ManifoldKind::SO2: return 1;
    case ManifoldKind::SE2: return 3;
    case ManifoldKind::SO3: return 3;
    case ManifoldKind::SE3: return 6;
    default: return fallback;
  }
}
}  // namespace lie_detail

/// Group exponential. For RealVector the tangent vector is returned as-is.
inline ManifoldElement exp_map(const Eigen::VectorXd& xi, ManifoldKind kind) {
  if (!xi.allFinite()) throw std::invalid_argument("exp_map: non-finite tangent vector");
  const int n = static_cast<int>(xi.size());
  if (n != lie_detail::expected_tangent_dim(kind, n)) {
    throw std::invalid_argument("exp_map: tangent dimension mismatch for " + to_string(kind));
  }
  ManifoldElement out;
  out.kind_ = kind;
  switch (kind) {
    case ManifoldKind::RealVector:
      out.translation_ = xi;
      break;
    case ManifoldKind::SO2:
      out.rotation_ = lie_detail::rot2(xi(0));
      break;
    case ManifoldKind::SE2:
      out.rotation_ = lie_detail::rot2(xi(0));
      out.translation_ = lie_detail::se2_V(xi(0)) * xi.segment<2>(1);
      break;
    case ManifoldKind::SO3:
      out.rotation_ = lie_detail::rot3(xi.head<3>());
      break;
    case ManifoldKind::SE3:
      out.rotation_ = lie_detail::rot3(xi.head<3>());
      out.translation_ = lie_detail::so3_left_jacobian(xi.head<3>()) * xi.tail<3>();
      break;
  }
  return out;
}

/// Group logarithm; inverse of exp_map for rotation angles inside (-pi, pi).
inline Eigen::VectorXd log_map(const ManifoldElement& X) {
  switch (X.kind()) {
    case ManifoldKind::RealVector:
      return X.coordinates();
    case ManifoldKind::SO2: {
      Eigen::VectorXd xi(1);
      xi(0) = lie_detail::so2_log(X.rotation());
      return xi;
    }
    case ManifoldKind::SE2: {
      Eigen::VectorXd xi(3);
      xi(0) = lie_detail::so2_log(X.rotation());
      xi.segment<2>(1) = lie_detail::se2_V_inv(xi(0)) * X.translation();
      return xi;
    }
    case ManifoldKind::SO3: {
      Eigen::VectorXd xi(3);
      xi.head<3>() = lie_detail::so3_log(X.rotation());
      return xi;
    }
    case ManifoldKind::SE3: {
      Eigen::VectorXd xi(6);
      const Eigen::Vector3d phi = lie_detail::so3_log(X.rotation());
      xi.head<3>() = phi;
      xi.tail<3>() = lie_detail::so3_left_jacobian_inv(phi) * X.translation();
      return xi;
    }
  }
  throw std::logic_error("log_map: unreachable");
}

/// Left perturbation: exp(xi^) * X.
inline ManifoldElement oplus(const ManifoldElement& X, const Eigen::VectorXd& xi) {
  if (xi.size() != X.tangent_dim()) {
    throw std::invalid_argument("oplus: tangent dimension mismatch");
  }
  return exp_map(xi, X.kind()).compose(X);
}

/// Generalized difference: vee(log(X1 * X2^-1)), so oplus(X2, ominus(X1, X2)) = X1.
inline Eigen::VectorXd ominus(const ManifoldElement& X1, const ManifoldElement& X2) {
  if (X1.kind() != X2.kind() || X1.tangent_dim() != X2.tangent_dim()) {
    throw std::invalid_argument("ominus: mismatched manifold kinds");
  }
  return log_map(X1.compose(X2.inverse()));
}

}  // namespace gmmnls

#endif  // GMMNLS_LIE_HPP
