#pragma once

#include <Eigen/Core>
#include <cmath>

#include "plod/errors.hpp"

namespace plod {

inline constexpr double kMinDepth = 1e-9;

/// Pinhole camera. Pixel (u,v) relates to the normalized image plane by
/// u = fx*x + cx, v = fy*y + cy.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw SpecError("intrinsics: focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw SpecError("intrinsics: principal point outside image");
  }

  Eigen::Vector2d pixel_from_normalized(const Eigen::Vector2d& p) const {
    return {fx * p.x() + cx, fy * p.y() + cy};
  }

  Eigen::Vector2d normalized_from_pixel(const Eigen::Vector2d& px) const {
    return {(px.x() - cx) / fx, (px.y() - cy) / fy};
  }

  bool pixel_in_bounds(const Eigen::Vector2d& px) const {
    return px.x() >= 0.0 && px.x() <= width - 1 && px.y() >= 0.0 &&
           px.y() <= height - 1;
  }
};

/// Normalized image coordinates (x, y) = (X/Z, Y/Z) of a 3D point.
inline Eigen::Vector2d project_normalized(const Eigen::Vector3d& P) {
  if (P.z() <= kMinDepth) throw NonPositiveDepth(P.z());
  return {P.x() / P.z(), P.y() / P.z()};
}

/// Same as project_normalized but signals failure via return.
inline bool try_project_normalized(const Eigen::Vector3d& P,
                                   Eigen::Vector2d* out) {
  if (P.z() <= kMinDepth) return false;
  *out = {P.x() / P.z(), P.y() / P.z()};
  return true;
}

inline Eigen::Vector2d project_pixel(const Eigen::Vector3d& P,
                                     const CameraIntrinsics& K) {
  return K.pixel_from_normalized(project_normalized(P));
}

/// 3D point on the pixel ray at depth Z (camera frame).
inline Eigen::Vector3d back_project(const Eigen::Vector2d& pixel, double z,
                                    const CameraIntrinsics& K) {
  if (z <= kMinDepth) throw NonPositiveDepth(z);
  const Eigen::Vector2d n = K.normalized_from_pixel(pixel);
  return {n.x() * z, n.y() * z, z};
}

inline Eigen::Vector3d back_project_normalized(const Eigen::Vector2d& n,
                                               double z) {
  if (z <= kMinDepth) throw NonPositiveDepth(z);
  return {n.x() * z, n.y() * z, z};
}

/// Homogeneous form (x, y, 1) of a normalized image point.
inline Eigen::Vector3d homogeneous(const Eigen::Vector2d& n) {
  return {n.x(), n.y(), 1.0};
}

}  // namespace plod
