#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "plod/errors.hpp"
#include "plod/pose.hpp"

namespace plod {

/// Timestamped camera-in-world pose (the TUM convention: the transform
/// mapping camera-frame coordinates into the world frame).
struct TrajectoryEntry {
  double timestamp = 0.0;
  Pose pose;
};

using Trajectory = std::vector<TrajectoryEntry>;

// "timestamp tx ty tz qx qy qz qw", '#' comments.

inline void write_tum(const Trajectory& traj,
                      const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DatasetFormatError("cannot open for writing: " + path.string());
  f << "# timestamp tx ty tz qx qy qz qw\n";
  char line[256];
  for (const auto& e : traj) {
    std::snprintf(line, sizeof(line),
                  "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", e.timestamp,
                  e.pose.t.x(), e.pose.t.y(), e.pose.t.z(), e.pose.q.x(),
                  e.pose.q.y(), e.pose.q.z(), e.pose.q.w());
    f << line;
  }
}

inline Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DatasetFormatError("cannot open: " + path.string());
  Trajectory traj;
  std::string line;
  while (std::getline(f, line)) {
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ss(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw DatasetFormatError("malformed trajectory line: " + line);
    TrajectoryEntry e;
    e.timestamp = ts;
    e.pose = Pose({tx, ty, tz}, Eigen::Quaterniond(qw, qx, qy, qz));
    traj.push_back(e);
  }
  return traj;
}

struct RpeResult {
  double rmse_translation_m = 0.0;
  double rmse_rotation_deg = 0.0;
  int pairs = 0;
};

namespace detail {

inline int nearest_index(const Trajectory& traj, double t) {
  int best = -1;
  double best_dt = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double dt = std::abs(traj[i].timestamp - t);
    if (dt < best_dt) {
      best_dt = dt;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace detail

/// Relative pose error over a fixed time interval: for every estimate pair
/// (t, t+interval), the discrepancy between the estimated and ground-truth
/// relative motions. Invariant to a global rigid offset of either
/// trajectory.
inline RpeResult evaluate_rpe(const Trajectory& est, const Trajectory& gt,
                              double interval_s = 1.0,
                              double align_tol_s = 0.02) {
  if (est.empty() || gt.empty()) throw NoOverlap("empty trajectory");
  double sum_t2 = 0.0, sum_r2 = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t0 = est[i].timestamp;
    const double t1 = t0 + interval_s;
    const int j = detail::nearest_index(est, t1);
    if (j < 0 || std::abs(est[j].timestamp - t1) > align_tol_s) continue;
    const int g0 = detail::nearest_index(gt, t0);
    const int g1 = detail::nearest_index(gt, est[j].timestamp);
    if (g0 < 0 || g1 < 0) continue;
    if (std::abs(gt[g0].timestamp - t0) > align_tol_s ||
        std::abs(gt[g1].timestamp - est[j].timestamp) > align_tol_s)
      continue;
    const Pose rel_est = est[i].pose.inverse() * est[j].pose;
    const Pose rel_gt = gt[g0].pose.inverse() * gt[g1].pose;
    const Pose err = rel_gt.inverse() * rel_est;
    sum_t2 += err.t.squaredNorm();
    const double ang = rotation_angle(err);
    sum_r2 += ang * ang;
    ++pairs;
  }
  if (pairs == 0) throw NoOverlap("no timestamp-aligned pose pairs");
  RpeResult out;
  out.pairs = pairs;
  out.rmse_translation_m = std::sqrt(sum_t2 / pairs);
  out.rmse_rotation_deg = std::sqrt(sum_r2 / pairs) * 180.0 / M_PI;
  return out;
}

/// Euclidean distance between the final positions after rigidly aligning
/// the first poses.
inline double evaluate_final_drift(const Trajectory& est,
                                   const Trajectory& gt) {
  if (est.empty() || gt.empty()) throw NoOverlap("empty trajectory");
  const Pose align = gt.front().pose * est.front().pose.inverse();
  const Eigen::Vector3d p_est = align.transform(est.back().pose.t);
  return (p_est - gt.back().pose.t).norm();
}

}  // namespace plod
