#pragma once

#include <Eigen/Core>
#include <vector>

#include "plod/pose.hpp"

namespace plod {

/// 3D point seen as a 2D point in the other frame.
struct PointMatch3D2D {
  Eigen::Vector3d P;       // 3D in the frame with depth
  Eigen::Vector2d p_obs;   // normalized observation in the other frame
};

/// 2D point whose match carries the 3D position.
struct PointMatch2D3D {
  Eigen::Vector2d p_obs;
  Eigen::Vector3d P;
};

/// 3D segment matched against a 2D line (Hessian form).
struct LineMatch3D2D {
  Eigen::Vector3d P1, P2;
  Eigen::Vector3d hessian;
};

struct LineMatch2D3D {
  Eigen::Vector3d hessian;
  Eigen::Vector3d P1, P2;
};

/// Depth-less point pair (epipolar residual).
struct PointMatch2D2D {
  Eigen::Vector2d p;       // first frame, normalized
  Eigen::Vector2d p_obs;   // second frame, normalized
};

/// The five residual families fed to the pose solver.
struct MatchSets {
  std::vector<PointMatch3D2D> s1;
  std::vector<PointMatch2D3D> s2;
  std::vector<LineMatch3D2D> s3;
  std::vector<LineMatch2D3D> s4;
  std::vector<PointMatch2D2D> s5;

  int depth_match_count() const {
    return static_cast<int>(s1.size() + s2.size() + s3.size() + s4.size());
  }
};

struct SolverConfig {
  double lambda_2d2d = 0.01;
  int max_iterations = 50;
  double convergence_tol = 1e-10;  // on |delta xi|
  double tukey_constant = 4.685;
  int min_depth_matches = 3;
  double degeneracy_eigenvalue_max = 1e-4;  // m^2, translation block
  double velocity_decay = 0.5;
};

struct PoseWithCovariance {
  Pose pose;
  Matrix6d cov = Matrix6d::Zero();
};

}  // namespace plod
