#pragma once

#include <Eigen/Core>
#include <cmath>

#include "plod/errors.hpp"

namespace plod {

/// Hessian normal form (lx, ly, d) of the line through two normalized image
/// points: unit normal, d >= 0 (ties broken by lx > 0, then ly > 0), so
/// l . (p; 1) is the signed point-to-line distance.
inline Eigen::Vector3d hessian_from_endpoints(const Eigen::Vector2d& e1,
                                              const Eigen::Vector2d& e2) {
  const Eigen::Vector2d dir = e2 - e1;
  const double len = dir.norm();
  if (len < 1e-9) throw DegenerateLine();
  Eigen::Vector2d n(-dir.y() / len, dir.x() / len);
  double d = -n.dot(e1);
  if (d < 0.0 || (std::abs(d) <= 1e-12 &&
                  (n.x() < 0.0 || (n.x() == 0.0 && n.y() < 0.0)))) {
    n = -n;
    d = -d;
  }
  return {n.x(), n.y(), d};
}

inline double point_line_distance(const Eigen::Vector3d& hessian,
                                  const Eigen::Vector2d& p) {
  return hessian.x() * p.x() + hessian.y() * p.y() + hessian.z();
}

/// 2D segment in normalized image coordinates.
struct Line2D {
  Eigen::Vector2d e1 = Eigen::Vector2d::Zero();
  Eigen::Vector2d e2 = Eigen::Vector2d::Zero();
  Eigen::Vector3d hessian = Eigen::Vector3d::Zero();

  Line2D() = default;
  Line2D(const Eigen::Vector2d& a, const Eigen::Vector2d& b)
      : e1(a), e2(b), hessian(hessian_from_endpoints(a, b)) {}
};

/// 3D segment by its endpoints (meters).
struct Line3D {
  Eigen::Vector3d P1 = Eigen::Vector3d::Zero();
  Eigen::Vector3d P2 = Eigen::Vector3d::Zero();

  Line3D() = default;
  Line3D(const Eigen::Vector3d& a, const Eigen::Vector3d& b) : P1(a), P2(b) {
    if ((P2 - P1).norm() <= 1e-6)
      throw DegenerateLine("degenerate 3D line: endpoints coincide");
  }

  Eigen::Vector3d direction() const { return (P2 - P1).normalized(); }
};

/// Euclidean distance from a 3D point to the infinite line through A, B.
inline double point_to_line3d_distance(const Eigen::Vector3d& p,
                                       const Eigen::Vector3d& a,
                                       const Eigen::Vector3d& b) {
  const Eigen::Vector3d d = (b - a).normalized();
  const Eigen::Vector3d r = p - a;
  return (r - r.dot(d) * d).norm();
}

}  // namespace plod
