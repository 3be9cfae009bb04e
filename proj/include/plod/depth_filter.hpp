#pragma once

#include <Eigen/Core>
#include <cmath>
#include <optional>

#include "plod/camera.hpp"
#include "plod/errors.hpp"
#include "plod/line.hpp"
#include "plod/triangulation.hpp"
#include "plod/uncertainty.hpp"

namespace plod {

/// 1D Gaussian over inverse depth. The prior N(0,1) stands for an
/// uninformed, infinitely distant feature.
struct InverseDepthState {
  double rho = 0.0;
  double sigma2 = 1.0;
  int n_obs = 0;
};

inline InverseDepthState init_state() { return {}; }

struct FilterConfig {
  double init_variance_threshold = 1e-3;  // 1/m^2
  double consistency_tol_px = 2.0;
  double rho_min = 1e-3;  // 1/m; caps initialized depth at 1/rho_min

  void validate() const {
    if (!(init_variance_threshold > 0.0))
      throw SpecError("filter: init_variance_threshold must be positive");
    if (!(init_variance_threshold < 1.0))
      throw SpecError(
          "filter: init_variance_threshold must stay below the prior "
          "variance of 1");
  }
};

/// Product of two Gaussians.
inline InverseDepthState fuse(const InverseDepthState& prior,
                              const InverseDepthObservation& obs) {
  InverseDepthState out;
  const double denom = prior.sigma2 + obs.sigma2;
  out.rho = (prior.rho * obs.sigma2 + obs.rho * prior.sigma2) / denom;
  out.sigma2 = prior.sigma2 * obs.sigma2 / denom;
  out.n_obs = prior.n_obs + 1;
  return out;
}

/// Back-projects the anchor observation once the state is precise enough.
inline std::optional<Eigen::Vector3d> try_initialize_point(
    const InverseDepthState& state, const Eigen::Vector2d& anchor_norm,
    const FilterConfig& cfg) {
  if (state.sigma2 >= cfg.init_variance_threshold) return std::nullopt;
  if (state.rho <= cfg.rho_min) return std::nullopt;
  return back_project_normalized(anchor_norm, 1.0 / state.rho);
}

/// Both endpoint states must pass the gate.
inline std::optional<Line3D> try_initialize_line(
    const InverseDepthState& s1, const InverseDepthState& s2,
    const Eigen::Vector2d& anchor_e1, const Eigen::Vector2d& anchor_e2,
    const FilterConfig& cfg) {
  const auto p1 = try_initialize_point(s1, anchor_e1, cfg);
  const auto p2 = try_initialize_point(s2, anchor_e2, cfg);
  if (!p1 || !p2) return std::nullopt;
  if ((*p2 - *p1).norm() <= 1e-6) return std::nullopt;
  return Line3D(*p1, *p2);
}

/// Reprojection gate of the fused state against the latest observation.
inline bool consistency_keep_point(const InverseDepthState& state,
                                   const Eigen::Vector2d& anchor_norm,
                                   const Eigen::Vector2d& cur_norm,
                                   const StereoFrame& stereo,
                                   double tol_norm) {
  if (state.rho <= kMinDepth) return true;  // no committed depth yet
  const Eigen::Vector3d P =
      back_project_normalized(anchor_norm, 1.0 / state.rho);
  const Eigen::Vector3d Pc = stereo.pose.transform(P);
  Eigen::Vector2d proj;
  if (!try_project_normalized(Pc, &proj)) return false;
  return (proj - cur_norm).norm() <= tol_norm;
}

inline bool consistency_keep_line_endpoint(const InverseDepthState& state,
                                           const Eigen::Vector2d& anchor_norm,
                                           const Eigen::Vector3d& cur_hessian,
                                           const StereoFrame& stereo,
                                           double tol_norm) {
  if (state.rho <= kMinDepth) return true;
  const Eigen::Vector3d P =
      back_project_normalized(anchor_norm, 1.0 / state.rho);
  const Eigen::Vector3d Pc = stereo.pose.transform(P);
  Eigen::Vector2d proj;
  if (!try_project_normalized(Pc, &proj)) return false;
  return std::abs(point_line_distance(cur_hessian, proj)) <= tol_norm;
}

}  // namespace plod
