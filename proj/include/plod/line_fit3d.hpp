#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "plod/camera.hpp"
#include "plod/depth_map.hpp"
#include "plod/line.hpp"

namespace plod {

/// Back-projected depth samples along a 2D segment.
struct LineDepthSamples {
  std::vector<Eigen::Vector3d> samples;
  int valid_count = 0;
};

struct RansacConfig {
  double inlier_threshold = 0.03;  // m, Euclidean point-to-line
  int max_iterations = 200;
  int min_inliers = 6;
  double confidence = 0.999;
  double stride_px = 1.0;
};

enum class LineFitStatus { ok, no_valid_samples, too_few_samples, no_consensus };

/// Walks the rasterized segment at the configured stride and back-projects
/// every pixel with valid depth. Steps are taken along the segment at
/// `stride_px` in the dominant-axis metric, each rounded to its nearest
/// pixel, so a fully valid region yields floor(length/stride)+1 samples.
inline LineDepthSamples sample_line_depths(const DepthMap& depth,
                                           const Eigen::Vector2d& e1_px,
                                           const Eigen::Vector2d& e2_px,
                                           const CameraIntrinsics& K,
                                           double stride_px = 1.0) {
  LineDepthSamples out;
  const Eigen::Vector2d d = e2_px - e1_px;
  const double length = std::max(std::abs(d.x()), std::abs(d.y()));
  const int steps = length > 0.0
                        ? static_cast<int>(std::floor(length / stride_px))
                        : 0;
  for (int i = 0; i <= steps; ++i) {
    const double s = length > 0.0 ? i * stride_px / length : 0.0;
    const Eigen::Vector2d pos = e1_px + s * d;
    const int u = static_cast<int>(std::llround(pos.x()));
    const int v = static_cast<int>(std::llround(pos.y()));
    if (!depth.in_bounds(u, v)) continue;
    const float z = depth.at(u, v);
    if (!DepthMap::is_valid(z)) continue;
    out.samples.push_back(
        back_project({static_cast<double>(u), static_cast<double>(v)}, z, K));
  }
  out.valid_count = static_cast<int>(out.samples.size());
  return out;
}

struct LineFitResult {
  Line3D line;
  std::vector<char> inlier_mask;
  int inlier_count = 0;
  LineFitStatus status = LineFitStatus::too_few_samples;
  bool ok() const { return status == LineFitStatus::ok; }
};

/// RANSAC over sample pairs scored by Euclidean point-to-line distance,
/// followed by PCA on the consensus set. The fitted segment is
/// mean +/- sigma1 * V1 where sigma1^2 is the largest eigenvalue of the
/// inlier covariance; strongly isotropic consensus sets (sigma1 < 2 sigma2)
/// are rejected as non-linear structure.
inline LineFitResult fit_line_ransac_pca(const LineDepthSamples& samples,
                                         const RansacConfig& cfg,
                                         std::mt19937_64& rng) {
  LineFitResult out;
  const int n = samples.valid_count;
  const int min_inliers =
      std::max({cfg.min_inliers, 3,
                static_cast<int>(std::ceil(0.3 * n))});
  if (n < std::max(cfg.min_inliers, 3)) {
    out.status = LineFitStatus::too_few_samples;
    return out;
  }

  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<char> best_mask(n, 0);
  int best_count = 0;
  int iterations_needed = cfg.max_iterations;
  for (int it = 0; it < std::min(cfg.max_iterations, iterations_needed);
       ++it) {
    int i = pick(rng);
    int j = pick(rng);
    if (i == j) continue;
    const Eigen::Vector3d& a = samples.samples[i];
    const Eigen::Vector3d& b = samples.samples[j];
    if ((b - a).norm() < 1e-9) continue;
    std::vector<char> mask(n, 0);
    int count = 0;
    for (int k = 0; k < n; ++k) {
      if (point_to_line3d_distance(samples.samples[k], a, b) <=
          cfg.inlier_threshold) {
        mask[k] = 1;
        ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best_mask = std::move(mask);
      // Standard adaptive iteration bound from the inlier ratio.
      const double w = static_cast<double>(count) / n;
      const double denom = std::log(std::max(1e-12, 1.0 - w * w));
      if (denom < 0.0) {
        iterations_needed = static_cast<int>(
            std::ceil(std::log(1.0 - cfg.confidence) / denom));
      }
    }
  }

  if (best_count < min_inliers) {
    out.status = LineFitStatus::no_consensus;
    return out;
  }

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int k = 0; k < n; ++k)
    if (best_mask[k]) mean += samples.samples[k];
  mean /= best_count;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int k = 0; k < n; ++k) {
    if (!best_mask[k]) continue;
    const Eigen::Vector3d d = samples.samples[k] - mean;
    cov += d * d.transpose();
  }
  cov /= std::max(1, best_count - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const double sigma1 = std::sqrt(std::max(0.0, eig.eigenvalues()[2]));
  const double sigma2 = std::sqrt(std::max(0.0, eig.eigenvalues()[1]));
  if (sigma1 < 2.0 * sigma2 || sigma1 <= 1e-9) {
    out.status = LineFitStatus::no_consensus;
    return out;
  }
  const Eigen::Vector3d v1 = eig.eigenvectors().col(2);
  out.line = Line3D(mean - sigma1 * v1, mean + sigma1 * v1);
  out.inlier_mask = std::move(best_mask);
  out.inlier_count = best_count;
  out.status = LineFitStatus::ok;
  return out;
}

}  // namespace plod
