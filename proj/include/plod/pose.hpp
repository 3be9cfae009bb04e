#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace plod {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Rigid transform P' = R*P + t. The quaternion is kept unit-norm with a
/// non-negative scalar part so the minimal parameterization below is unique.
struct Pose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();

  static Pose identity() { return {}; }

  Pose() = default;
  Pose(const Eigen::Vector3d& t_, const Eigen::Quaterniond& q_) : t(t_), q(q_) {
    normalize();
  }

  void normalize() {
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  }

  Eigen::Matrix3d rotation() const { return q.toRotationMatrix(); }

  Eigen::Vector3d transform(const Eigen::Vector3d& P) const {
    return q * P + t;
  }

  Pose inverse() const {
    const Eigen::Quaterniond qi = q.conjugate();
    return Pose(-(qi * t), qi);
  }

  /// Composition: (a * b).transform(P) == a.transform(b.transform(P)).
  Pose operator*(const Pose& other) const {
    return Pose(q * other.t + t, q * other.q);
  }
};

/// Minimal 6-parameter form (tx, ty, tz, q1, q2, q3); the quaternion scalar
/// is recovered as sqrt(1 - q1^2 - q2^2 - q3^2).
inline Vector6d to_minimal(const Pose& pose) {
  Pose p = pose;
  p.normalize();
  Vector6d xi;
  xi << p.t, p.q.x(), p.q.y(), p.q.z();
  return xi;
}

inline Pose from_minimal(const Vector6d& xi) {
  const double n2 = xi.tail<3>().squaredNorm();
  const double w = std::sqrt(std::max(0.0, 1.0 - n2));
  return Pose(xi.head<3>(), Eigen::Quaterniond(w, xi[3], xi[4], xi[5]));
}

/// Rotation angle in radians, in [0, pi].
inline double rotation_angle(const Pose& pose) {
  const double w = std::min(1.0, std::abs(pose.q.w()));
  return 2.0 * std::acos(w);
}

/// Motion scaled toward identity: translation by `decay`, rotation slerped
/// from identity by the same factor.
inline Pose scale_motion(const Pose& motion, double decay) {
  Pose out;
  out.t = decay * motion.t;
  out.q = Eigen::Quaterniond::Identity().slerp(decay, motion.q);
  out.normalize();
  return out;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace plod
