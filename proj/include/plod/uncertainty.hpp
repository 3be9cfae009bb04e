#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <optional>

#include "plod/camera.hpp"
#include "plod/pose.hpp"
#include "plod/triangulation.hpp"

namespace plod {

/// Minimal-coordinate state transition: the step xi(k+1|k) composed onto the
/// accumulated xi(k|1) gives xi(k+1|1),
///   t <- R_step t_acc + t_step,  q <- q_step (x) q_acc.
inline Vector6d compose_minimal(const Vector6d& step, const Vector6d& acc) {
  return to_minimal(from_minimal(step) * from_minimal(acc));
}

/// Jacobians of compose_minimal w.r.t. the accumulated (F) and step (G)
/// parameters, by central finite differences; the composition code stays the
/// single source of truth.
inline void compose_jacobians(const Vector6d& step, const Vector6d& acc,
                              Matrix6d* F, Matrix6d* G) {
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    if (F) {
      Vector6d ap = acc, am = acc;
      ap[i] += h;
      am[i] -= h;
      F->col(i) = (compose_minimal(step, ap) - compose_minimal(step, am)) /
                  (2.0 * h);
    }
    if (G) {
      Vector6d sp = step, sm = step;
      sp[i] += h;
      sm[i] -= h;
      G->col(i) = (compose_minimal(sp, acc) - compose_minimal(sm, acc)) /
                  (2.0 * h);
    }
  }
}

/// Clamp to symmetric PSD (eigenvalues floored at zero).
inline Matrix6d make_psd(const Matrix6d& m) {
  Matrix6d sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(sym);
  Vector6d ev = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

/// EKF-style propagation: Sigma(k+1|1) = F Sigma(k|1) F^T + G Sigma_step G^T.
inline Matrix6d propagate_pose_cov(const Matrix6d& acc_cov,
                                   const Matrix6d& step_cov,
                                   const Vector6d& step, const Vector6d& acc) {
  Matrix6d F, G;
  compose_jacobians(step, acc, &F, &G);
  return make_psd(F * acc_cov * F.transpose() + G * step_cov * G.transpose());
}

/// Sliding window of transforms from recent frames to the current frame with
/// their covariances. On advance every stored entry is recomposed onto the
/// new frame and the previous frame enters as the step itself (its implicit
/// identity transform composed with the step).
class PoseChainWindow {
 public:
  struct Entry {
    std::int64_t frame_id = 0;
    Pose to_current;
    Matrix6d cov = Matrix6d::Zero();
  };

  explicit PoseChainWindow(int capacity = 8) : capacity_(capacity) {}

  void reset(std::int64_t frame_id) {
    entries_.clear();
    current_frame_ = frame_id;
  }

  void advance(std::int64_t new_frame_id, const Pose& step,
               const Matrix6d& step_cov) {
    const Vector6d step_xi = to_minimal(step);
    for (Entry& e : entries_) {
      const Vector6d acc_xi = to_minimal(e.to_current);
      e.cov = propagate_pose_cov(e.cov, step_cov, step_xi, acc_xi);
      e.to_current = step * e.to_current;
    }
    entries_.push_front({current_frame_, step, make_psd(step_cov)});
    current_frame_ = new_frame_id;
    while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_back();
  }

  std::int64_t current_frame() const { return current_frame_; }
  int capacity() const { return capacity_; }
  const std::deque<Entry>& entries() const { return entries_; }

  /// Transform from a stored frame to the current frame; the current frame
  /// itself maps through the identity with zero uncertainty.
  std::optional<Entry> transform_to_current(std::int64_t frame_id) const {
    if (frame_id == current_frame_)
      return Entry{frame_id, Pose::identity(), Matrix6d::Zero()};
    for (const Entry& e : entries_)
      if (e.frame_id == frame_id) return e;
    return std::nullopt;
  }

 private:
  int capacity_;
  std::int64_t current_frame_ = 0;
  std::deque<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Inverse-depth variance of triangulated estimates.
// ---------------------------------------------------------------------------

enum class DepthKind { point, line_endpoint };

struct InverseDepthObservation {
  double rho = 0.0;     // 1/m
  double sigma2 = 0.0;  // 1/m^2
};

namespace detail {

/// Inverse depth through the production triangulation path; nullopt when the
/// geometry is ill-posed at the probe.
inline std::optional<double> inverse_depth_point(const Eigen::Vector2d& anchor,
                                                 const Eigen::Vector2d& cur,
                                                 const StereoFrame& stereo) {
  const PointTriangulation tri = triangulate_point_linear(anchor, cur, stereo);
  if (!tri.ok()) return std::nullopt;
  const DepthEstimate est =
      point_depth_trig(homogeneous(tri.corrected_anchor),
                       homogeneous(tri.corrected_current), stereo);
  if (!est.ok()) return std::nullopt;
  return 1.0 / est.z;
}

inline std::optional<double> inverse_depth_line(const Eigen::Vector2d& anchor,
                                                const Eigen::Vector2d& cur_e1,
                                                const Eigen::Vector2d& cur_e2,
                                                const StereoFrame& stereo) {
  const DepthEstimate est =
      triangulate_line_endpoint(homogeneous(anchor), cur_e1, cur_e2, stereo);
  if (!est.ok()) return std::nullopt;
  return 1.0 / est.z;
}

}  // namespace detail

struct InverseDepthVarianceResult {
  double rho = 0.0;
  double sigma2 = 0.0;
  bool ok = false;  // false: some finite-difference probe was ill-posed
};

/// First-order variance sigma^2 = J Sigma J^T of the inverse depth, with J
/// taken by central finite differences through the triangulation itself.
/// Inputs are the anchor observation, the current observation (one point, or
/// the two endpoints of the current segment for a line endpoint), the stereo
/// pose with its covariance, and the per-coordinate pixel noise converted to
/// normalized units through the focal lengths.
inline InverseDepthVarianceResult inverse_depth_variance(
    DepthKind kind, const Eigen::Vector2d& anchor,
    const Eigen::Vector2d& cur_a, const Eigen::Vector2d& cur_b,
    const StereoFrame& stereo, const Matrix6d& pose_cov,
    const CameraIntrinsics& K, double pixel_sigma_px = 1.0) {
  InverseDepthVarianceResult out;
  const int n_img = kind == DepthKind::point ? 4 : 6;
  const int n = n_img + 6;

  Eigen::VectorXd x(n);
  if (kind == DepthKind::point) {
    x << anchor, cur_a, to_minimal(stereo.pose);
  } else {
    x << anchor, cur_a, cur_b, to_minimal(stereo.pose);
  }

  auto eval = [&](const Eigen::VectorXd& v) -> std::optional<double> {
    StereoFrame s;
    s.pose = from_minimal(v.tail<6>());
    if (kind == DepthKind::point)
      return detail::inverse_depth_point(v.segment<2>(0), v.segment<2>(2), s);
    return detail::inverse_depth_line(v.segment<2>(0), v.segment<2>(2),
                                      v.segment<2>(4), s);
  };

  const auto rho0 = eval(x);
  if (!rho0) return out;
  out.rho = *rho0;

  const double h = 1e-6;
  Eigen::RowVectorXd J(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const auto fp = eval(xp);
    const auto fm = eval(xm);
    if (!fp || !fm) return out;
    J[i] = (*fp - *fm) / (2.0 * h);
  }

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n, n);
  const double sx = pixel_sigma_px / K.fx;
  const double sy = pixel_sigma_px / K.fy;
  for (int i = 0; i < n_img; i += 2) {
    sigma(i, i) = sx * sx;
    sigma(i + 1, i + 1) = sy * sy;
  }
  sigma.bottomRightCorner<6, 6>() = pose_cov;

  out.sigma2 = (J * sigma * J.transpose())(0, 0);
  out.ok = true;
  return out;
}

}  // namespace plod
