#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "plod/camera.hpp"
#include "plod/line.hpp"
#include "plod/matches.hpp"
#include "plod/pose.hpp"

namespace plod {

// ---------------------------------------------------------------------------
// Rotation derivatives in the minimal parameterization.
//
// With u = (q1,q2,q3), w = sqrt(1 - |u|^2):
//   R(q) v = (w^2 - u.u) v + 2 (u.v) u + 2 w (u x v)
// and the chain rule through w(u) gives the 3x3 blocks below.
// ---------------------------------------------------------------------------

/// d(R(q) v)/d(q1,q2,q3) at unit q with non-negative scalar part.
inline Eigen::Matrix3d rotate_jacobian(const Eigen::Quaterniond& q,
                                       const Eigen::Vector3d& v) {
  const Eigen::Vector3d u = q.vec();
  const double w = q.w();
  const Eigen::Vector3d uxv = u.cross(v);
  Eigen::Matrix3d du = -2.0 * v * u.transpose() + 2.0 * u * v.transpose() +
                       2.0 * u.dot(v) * Eigen::Matrix3d::Identity() -
                       2.0 * w * skew(v);
  const Eigen::Vector3d dw = 2.0 * w * v + 2.0 * uxv;
  return du - dw * (u.transpose() / w);
}

/// d(R(q)^T v)/d(q1,q2,q3).
inline Eigen::Matrix3d rotate_transpose_jacobian(const Eigen::Quaterniond& q,
                                                 const Eigen::Vector3d& v) {
  const Eigen::Vector3d u = q.vec();
  const double w = q.w();
  const Eigen::Vector3d uxv = u.cross(v);
  Eigen::Matrix3d du = -2.0 * v * u.transpose() + 2.0 * u * v.transpose() +
                       2.0 * u.dot(v) * Eigen::Matrix3d::Identity() +
                       2.0 * w * skew(v);
  const Eigen::Vector3d dw = 2.0 * w * v - 2.0 * uxv;
  return du - dw * (u.transpose() / w);
}

/// d(pi(P))/dP for the normalized projection pi(P) = (X/Z, Y/Z).
inline Eigen::Matrix<double, 2, 3> projection_jacobian(
    const Eigen::Vector3d& P) {
  const double iz = 1.0 / P.z();
  Eigen::Matrix<double, 2, 3> J;
  J << iz, 0.0, -P.x() * iz * iz, 0.0, iz, -P.y() * iz * iz;
  return J;
}

// ---------------------------------------------------------------------------
// Residual families. All operate in normalized image coordinates with the
// pose mapping first-frame coordinates into second-frame coordinates. A
// nullopt return means the match carries no information at this pose
// (transformed depth non-positive, or zero baseline for the epipolar term)
// and is excluded for the current iteration.
// ---------------------------------------------------------------------------

/// r = p' - pi(R P + t).
inline std::optional<Eigen::Vector2d> residual_point_3d_to_2d(
    const Eigen::Vector3d& P, const Eigen::Vector2d& p_obs, const Pose& pose) {
  const Eigen::Vector3d Pc = pose.transform(P);
  Eigen::Vector2d proj;
  if (!try_project_normalized(Pc, &proj)) return std::nullopt;
  return p_obs - proj;
}

/// r = p - pi(R^T (P' - t)); the 2D-to-3D direction via the inverse pose.
inline std::optional<Eigen::Vector2d> residual_point_2d_to_3d(
    const Eigen::Vector2d& p_obs, const Eigen::Vector3d& P, const Pose& pose) {
  const Eigen::Vector3d Pc = pose.q.conjugate() * (P - pose.t);
  Eigen::Vector2d proj;
  if (!try_project_normalized(Pc, &proj)) return std::nullopt;
  return p_obs - proj;
}

/// Signed point-to-line distances of both projected endpoints against l'.
inline std::optional<Eigen::Vector2d> residual_line_3d_to_2d(
    const Eigen::Vector3d& P1, const Eigen::Vector3d& P2,
    const Eigen::Vector3d& hessian, const Pose& pose) {
  const Eigen::Vector3d Q1 = pose.transform(P1);
  const Eigen::Vector3d Q2 = pose.transform(P2);
  Eigen::Vector2d a, b;
  if (!try_project_normalized(Q1, &a) || !try_project_normalized(Q2, &b))
    return std::nullopt;
  return Eigen::Vector2d(point_line_distance(hessian, a),
                         point_line_distance(hessian, b));
}

inline std::optional<Eigen::Vector2d> residual_line_2d_to_3d(
    const Eigen::Vector3d& hessian, const Eigen::Vector3d& P1,
    const Eigen::Vector3d& P2, const Pose& pose) {
  const Eigen::Quaterniond qi = pose.q.conjugate();
  const Eigen::Vector3d Q1 = qi * (P1 - pose.t);
  const Eigen::Vector3d Q2 = qi * (P2 - pose.t);
  Eigen::Vector2d a, b;
  if (!try_project_normalized(Q1, &a) || !try_project_normalized(Q2, &b))
    return std::nullopt;
  return Eigen::Vector2d(point_line_distance(hessian, a),
                         point_line_distance(hessian, b));
}

/// Scaled epipolar constraint for a depth-less pair, with the same pose
/// direction as the 3D-to-2D residual:
///   r = lambda * [ty - tz*y', tz*x' - tx, tx*y' - ty*x'] . (R p_dot).
/// Identically zero at zero baseline, so such poses exclude the match.
inline std::optional<double> residual_point_2d_to_2d(
    const Eigen::Vector2d& p, const Eigen::Vector2d& p_obs, const Pose& pose,
    double lambda) {
  if (pose.t.norm() < 1e-9) return std::nullopt;
  const Eigen::Vector3d b(pose.t.y() - pose.t.z() * p_obs.y(),
                          pose.t.z() * p_obs.x() - pose.t.x(),
                          pose.t.x() * p_obs.y() - pose.t.y() * p_obs.x());
  return lambda * b.dot(pose.q * homogeneous(p));
}

// Residual rows with analytic Jacobians w.r.t. xi = (t, q1, q2, q3).

struct Residual2 {
  Eigen::Vector2d r;
  Eigen::Matrix<double, 2, 6> J;
};

struct Residual1 {
  double r;
  Eigen::Matrix<double, 1, 6> J;
};

inline std::optional<Residual2> residual_jac_point_3d_to_2d(
    const Eigen::Vector3d& P, const Eigen::Vector2d& p_obs, const Pose& pose) {
  const Eigen::Vector3d Pc = pose.transform(P);
  Eigen::Vector2d proj;
  if (!try_project_normalized(Pc, &proj)) return std::nullopt;
  Residual2 out;
  out.r = p_obs - proj;
  const Eigen::Matrix<double, 2, 3> Jp = projection_jacobian(Pc);
  out.J.leftCols<3>() = -Jp;
  out.J.rightCols<3>() = -Jp * rotate_jacobian(pose.q, P);
  return out;
}

inline std::optional<Residual2> residual_jac_point_2d_to_3d(
    const Eigen::Vector2d& p_obs, const Eigen::Vector3d& P, const Pose& pose) {
  const Eigen::Vector3d v = P - pose.t;
  const Eigen::Vector3d Pc = pose.q.conjugate() * v;
  Eigen::Vector2d proj;
  if (!try_project_normalized(Pc, &proj)) return std::nullopt;
  Residual2 out;
  out.r = p_obs - proj;
  const Eigen::Matrix<double, 2, 3> Jp = projection_jacobian(Pc);
  out.J.leftCols<3>() = Jp * pose.rotation().transpose();
  out.J.rightCols<3>() = -Jp * rotate_transpose_jacobian(pose.q, v);
  return out;
}

inline std::optional<Residual2> residual_jac_line_3d_to_2d(
    const Eigen::Vector3d& P1, const Eigen::Vector3d& P2,
    const Eigen::Vector3d& hessian, const Pose& pose) {
  const Eigen::Vector3d Q1 = pose.transform(P1);
  const Eigen::Vector3d Q2 = pose.transform(P2);
  Eigen::Vector2d a, b;
  if (!try_project_normalized(Q1, &a) || !try_project_normalized(Q2, &b))
    return std::nullopt;
  Residual2 out;
  out.r = {point_line_distance(hessian, a), point_line_distance(hessian, b)};
  const Eigen::RowVector2d n(hessian.x(), hessian.y());
  const Eigen::RowVector3d g1 = n * projection_jacobian(Q1);
  const Eigen::RowVector3d g2 = n * projection_jacobian(Q2);
  out.J.row(0).head<3>() = g1;
  out.J.row(0).tail<3>() = g1 * rotate_jacobian(pose.q, P1);
  out.J.row(1).head<3>() = g2;
  out.J.row(1).tail<3>() = g2 * rotate_jacobian(pose.q, P2);
  return out;
}

inline std::optional<Residual2> residual_jac_line_2d_to_3d(
    const Eigen::Vector3d& hessian, const Eigen::Vector3d& P1,
    const Eigen::Vector3d& P2, const Pose& pose) {
  const Eigen::Vector3d v1 = P1 - pose.t;
  const Eigen::Vector3d v2 = P2 - pose.t;
  const Eigen::Quaterniond qi = pose.q.conjugate();
  const Eigen::Vector3d Q1 = qi * v1;
  const Eigen::Vector3d Q2 = qi * v2;
  Eigen::Vector2d a, b;
  if (!try_project_normalized(Q1, &a) || !try_project_normalized(Q2, &b))
    return std::nullopt;
  Residual2 out;
  out.r = {point_line_distance(hessian, a), point_line_distance(hessian, b)};
  const Eigen::RowVector2d n(hessian.x(), hessian.y());
  const Eigen::Matrix3d Rt = pose.rotation().transpose();
  const Eigen::RowVector3d g1 = n * projection_jacobian(Q1);
  const Eigen::RowVector3d g2 = n * projection_jacobian(Q2);
  out.J.row(0).head<3>() = -g1 * Rt;
  out.J.row(0).tail<3>() = g1 * rotate_transpose_jacobian(pose.q, v1);
  out.J.row(1).head<3>() = -g2 * Rt;
  out.J.row(1).tail<3>() = g2 * rotate_transpose_jacobian(pose.q, v2);
  return out;
}

inline std::optional<Residual1> residual_jac_point_2d_to_2d(
    const Eigen::Vector2d& p, const Eigen::Vector2d& p_obs, const Pose& pose,
    double lambda) {
  if (pose.t.norm() < 1e-9) return std::nullopt;
  const Eigen::Vector3d pd = homogeneous(p);
  const Eigen::Vector3d c = pose.q * pd;
  const Eigen::Vector3d b(pose.t.y() - pose.t.z() * p_obs.y(),
                          pose.t.z() * p_obs.x() - pose.t.x(),
                          pose.t.x() * p_obs.y() - pose.t.y() * p_obs.x());
  Eigen::Matrix3d M;  // b = M t
  M << 0.0, 1.0, -p_obs.y(), -1.0, 0.0, p_obs.x(), p_obs.y(), -p_obs.x(), 0.0;
  Residual1 out;
  out.r = lambda * b.dot(c);
  out.J.head<3>() = lambda * (c.transpose() * M);
  out.J.tail<3>() = lambda * (b.transpose() * rotate_jacobian(pose.q, pd));
  return out;
}

// ---------------------------------------------------------------------------
// Tukey weights.
// ---------------------------------------------------------------------------

inline double tukey_weight(double x, double c) {
  const double a = std::abs(x);
  if (a >= c) return 0.0;
  const double r = 1.0 - (a / c) * (a / c);
  return r * r;
}

/// Robust scale of residual magnitudes: 1.4826 * median(|m|), floored to
/// keep the exact-fit case well-defined.
inline double tukey_scale(std::vector<double> magnitudes) {
  if (magnitudes.empty()) return 1.0;
  const std::size_t mid = magnitudes.size() / 2;
  std::nth_element(magnitudes.begin(), magnitudes.begin() + mid,
                   magnitudes.end());
  double med = magnitudes[mid];
  if (magnitudes.size() % 2 == 0) {
    const double lo =
        *std::max_element(magnitudes.begin(), magnitudes.begin() + mid);
    med = 0.5 * (med + lo);
  }
  return std::max(1.4826 * med, 1e-12);
}

// ---------------------------------------------------------------------------
// Joint pose estimation.
// ---------------------------------------------------------------------------

enum class SolveStatus { converged, not_converged, insufficient_matches };

struct PoseEstimate {
  PoseWithCovariance estimate;
  SolveStatus status = SolveStatus::insufficient_matches;
  int iterations = 0;
  double final_cost = 0.0;
  // Final Tukey weights, one per match, aligned with the MatchSets entries.
  // Matches excluded at the solution (invalid geometry) carry weight 0.
  std::vector<double> w1, w2, w3, w4, w5;
};

namespace detail {

struct Row {
  int family = 0;            // 0..4 for S1..S5
  int match_index = 0;
  double magnitude = 0.0;    // per-match residual norm
  double weight = 0.0;
  bool valid = false;
  int dim = 0;
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
  Eigen::Matrix<double, 2, 6> J = Eigen::Matrix<double, 2, 6>::Zero();
};

inline std::vector<Row> evaluate_rows(const MatchSets& m, const Pose& pose,
                                      const SolverConfig& cfg) {
  std::vector<Row> rows;
  rows.reserve(m.s1.size() + m.s2.size() + m.s3.size() + m.s4.size() +
               m.s5.size());
  auto push2 = [&](int family, int idx,
                   const std::optional<Residual2>& res) {
    Row row;
    row.family = family;
    row.match_index = idx;
    row.dim = 2;
    if (res) {
      row.valid = true;
      row.r = res->r;
      row.J = res->J;
      row.magnitude = res->r.norm();
    }
    rows.push_back(row);
  };
  for (std::size_t i = 0; i < m.s1.size(); ++i)
    push2(0, static_cast<int>(i),
          residual_jac_point_3d_to_2d(m.s1[i].P, m.s1[i].p_obs, pose));
  for (std::size_t i = 0; i < m.s2.size(); ++i)
    push2(1, static_cast<int>(i),
          residual_jac_point_2d_to_3d(m.s2[i].p_obs, m.s2[i].P, pose));
  for (std::size_t i = 0; i < m.s3.size(); ++i)
    push2(2, static_cast<int>(i),
          residual_jac_line_3d_to_2d(m.s3[i].P1, m.s3[i].P2, m.s3[i].hessian,
                                     pose));
  for (std::size_t i = 0; i < m.s4.size(); ++i)
    push2(3, static_cast<int>(i),
          residual_jac_line_2d_to_3d(m.s4[i].hessian, m.s4[i].P1, m.s4[i].P2,
                                     pose));
  for (std::size_t i = 0; i < m.s5.size(); ++i) {
    Row row;
    row.family = 4;
    row.match_index = static_cast<int>(i);
    row.dim = 1;
    if (auto res = residual_jac_point_2d_to_2d(m.s5[i].p, m.s5[i].p_obs, pose,
                                               cfg.lambda_2d2d)) {
      row.valid = true;
      row.r[0] = res->r;
      row.J.row(0) = res->J;
      row.magnitude = std::abs(res->r);
    }
    rows.push_back(row);
  }
  return rows;
}

/// Per-family robust scales, then Tukey weights on every valid row.
inline void assign_weights(std::vector<Row>& rows, double c) {
  for (int family = 0; family < 5; ++family) {
    std::vector<double> mags;
    for (const Row& row : rows)
      if (row.family == family && row.valid) mags.push_back(row.magnitude);
    if (mags.empty()) continue;
    const double scale = tukey_scale(std::move(mags));
    for (Row& row : rows)
      if (row.family == family)
        row.weight = row.valid ? tukey_weight(row.magnitude / scale, c) : 0.0;
  }
}

inline double weighted_cost(const std::vector<Row>& rows) {
  double cost = 0.0;
  for (const Row& row : rows)
    if (row.valid) cost += row.weight * row.r.head(row.dim).squaredNorm();
  return cost;
}

/// Cost of the same weighted problem at a trial pose. Rows that lose
/// validity at the trial keep their previous contribution so a step cannot
/// look better by pushing matches out of view.
inline double trial_cost(const std::vector<Row>& rows, const MatchSets& m,
                         const Pose& pose, const SolverConfig& cfg) {
  std::vector<Row> trial = evaluate_rows(m, pose, cfg);
  double cost = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].valid || rows[i].weight == 0.0) continue;
    const Row& t = trial[i];
    const Eigen::Vector2d r = t.valid ? t.r : rows[i].r;
    cost += rows[i].weight * r.head(rows[i].dim).squaredNorm();
  }
  return cost;
}

inline Matrix6d covariance_from_rows(const std::vector<Row>& rows) {
  // Per-family residual variance (homoscedastic within a family): the
  // Tukey-weighted second moment of the residual components.
  double var[5];
  for (int family = 0; family < 5; ++family) {
    double sw = 0.0, swr2 = 0.0;
    for (const Row& row : rows) {
      if (row.family != family || !row.valid) continue;
      for (int k = 0; k < row.dim; ++k) {
        sw += row.weight;
        swr2 += row.weight * row.r[k] * row.r[k];
      }
    }
    var[family] = sw > 0.0 ? std::max(swr2 / sw, 1e-12) : 1e-12;
  }
  Matrix6d H = Matrix6d::Zero();
  for (const Row& row : rows) {
    if (!row.valid || row.weight == 0.0) continue;
    const double s = row.weight / var[row.family];
    H += s * row.J.topRows(row.dim).transpose() * row.J.topRows(row.dim);
  }
  // Invert through an eigendecomposition so near-singular geometry yields a
  // huge covariance rather than a crash; degeneracy checks pick it up.
  Eigen::SelfAdjointEigenSolver<Matrix6d> eig(H);
  Vector6d inv_eval;
  for (int i = 0; i < 6; ++i)
    inv_eval[i] = 1.0 / std::max(eig.eigenvalues()[i], 1e-18);
  Matrix6d cov = eig.eigenvectors() * inv_eval.asDiagonal() *
                 eig.eigenvectors().transpose();
  return 0.5 * (cov + cov.transpose());
}

}  // namespace detail

/// Joint Tukey-weighted minimization over the five residual families by
/// damped Gauss-Newton, weights refreshed every outer iteration.
inline PoseEstimate estimate_pose(const MatchSets& matches, const Pose& init,
                                  const SolverConfig& cfg) {
  PoseEstimate result;
  result.estimate.pose = init;
  if (matches.depth_match_count() < cfg.min_depth_matches) {
    result.status = SolveStatus::insufficient_matches;
    return result;
  }

  Vector6d xi = to_minimal(init);
  double mu = -1.0;
  result.status = SolveStatus::not_converged;

  for (int outer = 0; outer < cfg.max_iterations; ++outer) {
    result.iterations = outer + 1;
    const Pose pose = from_minimal(xi);
    std::vector<detail::Row> rows = detail::evaluate_rows(matches, pose, cfg);
    detail::assign_weights(rows, cfg.tukey_constant);

    Matrix6d H = Matrix6d::Zero();
    Vector6d g = Vector6d::Zero();
    int valid_rows = 0;
    for (const detail::Row& row : rows) {
      if (!row.valid || row.weight == 0.0) continue;
      ++valid_rows;
      const auto J = row.J.topRows(row.dim);
      H += row.weight * J.transpose() * J;
      g += row.weight * J.transpose() * row.r.head(row.dim);
    }
    if (valid_rows == 0) {
      result.status = SolveStatus::insufficient_matches;
      break;
    }
    const double cost = detail::weighted_cost(rows);
    if (mu < 0.0) mu = 1e-4 * H.diagonal().maxCoeff();

    bool accepted = false;
    Vector6d accepted_step = Vector6d::Zero();
    for (int attempt = 0; attempt < 12; ++attempt) {
      const Matrix6d A = H + mu * Matrix6d::Identity();
      const Vector6d delta = A.ldlt().solve(-g);
      const Vector6d xi_new = xi + delta;
      if (xi_new.tail<3>().squaredNorm() >= 1.0) {
        mu *= 10.0;
        continue;
      }
      const double new_cost =
          detail::trial_cost(rows, matches, from_minimal(xi_new), cfg);
      if (new_cost < cost || cost == 0.0) {
        xi = xi_new;
        mu = std::max(mu / 10.0, 1e-18);
        accepted = true;
        accepted_step = delta;
      }
      if (accepted) break;
      mu *= 10.0;
    }
    if (!accepted) {
      // Damping exhausted without progress; best iterate stands.
      break;
    }
    if (accepted_step.norm() < cfg.convergence_tol) {
      result.status = SolveStatus::converged;
      break;
    }
  }

  const Pose pose = from_minimal(xi);
  std::vector<detail::Row> rows = detail::evaluate_rows(matches, pose, cfg);
  detail::assign_weights(rows, cfg.tukey_constant);
  result.estimate.pose = pose;
  result.estimate.cov = detail::covariance_from_rows(rows);
  result.final_cost = detail::weighted_cost(rows);
  result.w1.assign(matches.s1.size(), 0.0);
  result.w2.assign(matches.s2.size(), 0.0);
  result.w3.assign(matches.s3.size(), 0.0);
  result.w4.assign(matches.s4.size(), 0.0);
  result.w5.assign(matches.s5.size(), 0.0);
  for (const detail::Row& row : rows) {
    std::vector<double>* w[] = {&result.w1, &result.w2, &result.w3, &result.w4,
                                &result.w5};
    (*w[row.family])[row.match_index] = row.weight;
  }
  return result;
}

/// Largest eigenvalue of the translation block of a pose covariance.
inline double translation_uncertainty(const Matrix6d& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(
      cov.topLeftCorner<3, 3>());
  return eig.eigenvalues().maxCoeff();
}

inline bool check_degeneracy(const PoseWithCovariance& est,
                             const SolverConfig& cfg) {
  const double lmax = translation_uncertainty(est.cov);
  return !std::isfinite(lmax) || lmax > cfg.degeneracy_eigenvalue_max;
}

/// Decaying velocity model: previous motion shrunk toward identity.
inline Pose velocity_fallback(const Pose& last_motion, double decay) {
  return scale_motion(last_motion, decay);
}

}  // namespace plod
