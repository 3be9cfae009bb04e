#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <cmath>

#include "plod/camera.hpp"
#include "plod/line.hpp"
#include "plod/pose.hpp"

namespace plod {

/// Temporal stereo pair: pose maps anchor-frame coordinates into
/// current-frame coordinates.
struct StereoFrame {
  Pose pose;
  double baseline() const { return pose.t.norm(); }
};

enum class TriStatus { valid, ill_posed, negative_depth, behind_camera };

struct DepthEstimate {
  double z = 0.0;
  TriStatus status = TriStatus::ill_posed;
  bool ok() const { return status == TriStatus::valid; }
};

/// Depth of an anchor-frame point ray against the projective plane of a
/// line observed in the current frame:
///   N' (R Z p_dot + t) = 0  =>  Z = -(N'.t) / (N'.R p_dot)
/// with N' the cross product of the current segment's homogeneous endpoints.
/// A negative Z is reported, not silently clamped; reprojection validation
/// decides whether the match itself is an outlier.
inline DepthEstimate triangulate_line_endpoint(const Eigen::Vector3d& p_dot,
                                               const Eigen::Vector2d& cur_e1,
                                               const Eigen::Vector2d& cur_e2,
                                               const StereoFrame& stereo) {
  DepthEstimate out;
  const Eigen::Vector3d n = homogeneous(cur_e1).cross(homogeneous(cur_e2));
  const double denom = n.dot(stereo.pose.q * p_dot);
  if (std::abs(denom) < 1e-9) {
    out.status = TriStatus::ill_posed;
    return out;
  }
  out.z = -n.dot(stereo.pose.t) / denom;
  out.status = (out.z > kMinDepth && std::isfinite(out.z))
                   ? TriStatus::valid
                   : TriStatus::negative_depth;
  return out;
}

struct PointTriangulation {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();  // anchor frame
  Eigen::Vector2d corrected_anchor = Eigen::Vector2d::Zero();
  Eigen::Vector2d corrected_current = Eigen::Vector2d::Zero();
  TriStatus status = TriStatus::ill_posed;
  bool ok() const { return status == TriStatus::valid; }
};

/// Linear (DLT) two-view triangulation; the corrected coordinates are the
/// reprojections of the least-squares point in both frames.
inline PointTriangulation triangulate_point_linear(const Eigen::Vector2d& p,
                                                   const Eigen::Vector2d& p_cur,
                                                   const StereoFrame& stereo) {
  PointTriangulation out;
  Eigen::Matrix<double, 3, 4> proj1, proj2;
  proj1 << Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero();
  proj2 << stereo.pose.rotation(), stereo.pose.t;

  Eigen::Matrix4d design;
  design.row(0) = p.x() * proj1.row(2) - proj1.row(0);
  design.row(1) = p.y() * proj1.row(2) - proj1.row(1);
  design.row(2) = p_cur.x() * proj2.row(2) - proj2.row(0);
  design.row(3) = p_cur.y() * proj2.row(2) - proj2.row(1);

  Eigen::JacobiSVD<Eigen::Matrix4d> svd(design, Eigen::ComputeFullV);
  const Eigen::Vector4d X = svd.matrixV().col(3);
  if (std::abs(X[3]) < 1e-12) {
    out.status = TriStatus::ill_posed;
    return out;
  }
  out.point = X.head<3>() / X[3];
  const Eigen::Vector3d Pc = stereo.pose.transform(out.point);
  if (out.point.z() <= kMinDepth || Pc.z() <= kMinDepth) {
    out.status = TriStatus::behind_camera;
    return out;
  }
  out.corrected_anchor = project_normalized(out.point);
  out.corrected_current = project_normalized(Pc);
  out.status = TriStatus::valid;
  return out;
}

/// Anchor depth from the stereo triangle through the corrected homogeneous
/// points. The ray length follows the law of sines,
///   lambda = B sin(alpha) / sin(alpha + beta),
/// with the angles of the triangle (camera1, camera2, point):
///   cos(beta)  = -t.(R p_dot) / (|p_dot| B)
///   cos(alpha) =  t.p_dot'    / (|p_dot'| B).
inline DepthEstimate point_depth_trig(const Eigen::Vector3d& p_dot,
                                      const Eigen::Vector3d& p_dot_cur,
                                      const StereoFrame& stereo) {
  DepthEstimate out;
  const double baseline = stereo.baseline();
  if (baseline < 1e-12) {
    out.status = TriStatus::ill_posed;
    return out;
  }
  const double np = p_dot.norm();
  const double npc = p_dot_cur.norm();
  const double cos_beta =
      std::clamp(-stereo.pose.t.dot(stereo.pose.q * p_dot) / (np * baseline),
                 -1.0, 1.0);
  const double cos_alpha =
      std::clamp(stereo.pose.t.dot(p_dot_cur) / (npc * baseline), -1.0, 1.0);
  const double alpha = std::acos(cos_alpha);
  const double beta = std::acos(cos_beta);
  const double sin_apex = std::sin(alpha + beta);
  if (sin_apex < 1e-9) {
    out.status = TriStatus::ill_posed;
    return out;
  }
  const double lambda = baseline * std::sin(alpha) / sin_apex;
  out.z = lambda / np;
  out.status = (out.z > kMinDepth && std::isfinite(out.z))
                   ? TriStatus::valid
                   : TriStatus::negative_depth;
  return out;
}

/// Reprojection gate for a line-endpoint depth estimate. Invalid estimates
/// are probed at an arbitrary positive depth: the transformed ray direction
/// still tells a correct match from a mismatch.
inline bool validate_line_endpoint(const DepthEstimate& est,
                                   const Eigen::Vector3d& p_dot,
                                   const Eigen::Vector3d& cur_hessian,
                                   const StereoFrame& stereo, double tol_norm,
                                   double arbitrary_depth = 1.0) {
  const double z = est.ok() ? est.z : arbitrary_depth;
  const Eigen::Vector3d Pc = stereo.pose.transform(z * p_dot);
  Eigen::Vector2d proj;
  if (!try_project_normalized(Pc, &proj)) return false;
  return std::abs(point_line_distance(cur_hessian, proj)) <= tol_norm;
}

/// Displacement gate between observed and DLT-corrected coordinates.
inline bool validate_point_correction(const Eigen::Vector2d& p,
                                      const Eigen::Vector2d& p_cur,
                                      const PointTriangulation& tri,
                                      double tol_norm) {
  if (!tri.ok()) return false;
  const double d1 = (p - tri.corrected_anchor).norm();
  const double d2 = (p_cur - tri.corrected_current).norm();
  return std::max(d1, d2) <= tol_norm;
}

/// Arbitrary-positive-depth probe for point matches whose triangulation was
/// invalid, mirroring the line-endpoint procedure with a point-to-point
/// distance.
inline bool validate_point_arbitrary(const Eigen::Vector2d& p,
                                     const Eigen::Vector2d& p_cur,
                                     const StereoFrame& stereo,
                                     double tol_norm,
                                     double arbitrary_depth = 1.0) {
  const Eigen::Vector3d Pc =
      stereo.pose.transform(arbitrary_depth * homogeneous(p));
  Eigen::Vector2d proj;
  if (!try_project_normalized(Pc, &proj)) return false;
  return (proj - p_cur).norm() <= tol_norm;
}

}  // namespace plod
