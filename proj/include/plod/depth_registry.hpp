#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "plod/camera.hpp"
#include "plod/depth_map.hpp"
#include "plod/errors.hpp"
#include "plod/robust_pose.hpp"
#include "plod/uncertainty.hpp"

namespace plod {

enum class DepthProvenance : std::uint8_t {
  invalid = 0,
  measured_now = 1,
  propagated = 2,
};

/// Bounded point cloud of past depth measurements, expressed in the frame
/// tagged by `frame_id`; at most one point per projected pixel.
struct RegisteredCloud {
  std::int64_t frame_id = -1;
  struct Point {
    Eigen::Vector3d position;
    std::int64_t source_frame;
  };
  std::vector<Point> points;
};

/// Current sensor raster augmented with propagated past measurements.
struct AugmentedDepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  std::vector<DepthProvenance> provenance;

  AugmentedDepthMap() = default;
  AugmentedDepthMap(int w, int h)
      : width(w),
        height(h),
        depth(w * h, 0.0f),
        provenance(w * h, DepthProvenance::invalid) {}

  struct Sample {
    float depth = 0.0f;
    DepthProvenance provenance = DepthProvenance::invalid;
    bool valid() const { return provenance != DepthProvenance::invalid; }
  };

  Sample sample(int u, int v) const {
    if (u < 0 || u >= width || v < 0 || v >= height) throw OutOfBounds(u, v);
    const int idx = v * width + u;
    return {depth[idx], provenance[idx]};
  }
};

struct RegistryConfig {
  double uncertainty_max = 4e-4;  // m^2, translation-block eigenvalue gate
  double near_plane = 0.05;       // m
};

/// One registration step. Past points are dropped when their source frame
/// left the window or its transform uncertainty exceeds the gate, the
/// survivors are carried into the current frame and rasterized (sensor
/// pixels win, then newer sources win), and every valid sensor pixel joins
/// the cloud tagged with the current frame.
inline std::pair<RegisteredCloud, AugmentedDepthMap> integrate_frame(
    const RegisteredCloud& cloud, const DepthMap& sensor,
    const PoseChainWindow& window, const CameraIntrinsics& K,
    const RegistryConfig& cfg) {
  const std::int64_t now = window.current_frame();
  const int w = sensor.width;
  const int h = sensor.height;

  AugmentedDepthMap augmented(w, h);
  RegisteredCloud out;
  out.frame_id = now;

  struct Slot {
    std::int64_t source = -1;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    bool measured = false;
    bool used = false;
  };
  std::vector<Slot> grid(static_cast<std::size_t>(w) * h);

  // Carry surviving past points into the current frame.
  if (cloud.frame_id >= 0 && !cloud.points.empty()) {
    const auto step = window.transform_to_current(cloud.frame_id);
    if (!step)
      throw Error("registered cloud frame left the pose window");
    for (const auto& pt : cloud.points) {
      const auto entry = window.transform_to_current(pt.source_frame);
      if (!entry) continue;
      if (translation_uncertainty(entry->cov) > cfg.uncertainty_max) continue;
      const Eigen::Vector3d pc = step->to_current.transform(pt.position);
      if (pc.z() < cfg.near_plane) continue;
      const Eigen::Vector2d px = K.pixel_from_normalized(
          Eigen::Vector2d(pc.x() / pc.z(), pc.y() / pc.z()));
      const int u = static_cast<int>(std::llround(px.x()));
      const int v = static_cast<int>(std::llround(px.y()));
      if (u < 0 || u >= w || v < 0 || v >= h) continue;
      if (DepthMap::is_valid(sensor.at(u, v))) continue;  // sensor wins
      Slot& slot = grid[v * w + u];
      if (slot.used && slot.source >= pt.source_frame) continue;
      slot = {pt.source_frame, pc, false, true};
    }
  }

  // Current sensor measurements: authoritative at their pixel.
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const float d = sensor.at(u, v);
      if (!DepthMap::is_valid(d)) continue;
      const Eigen::Vector3d p = back_project(
          {static_cast<double>(u), static_cast<double>(v)}, d, K);
      grid[v * w + u] = {now, p, true, true};
    }
  }

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Slot& slot = grid[v * w + u];
      if (!slot.used) continue;
      const int idx = v * w + u;
      if (slot.measured) {
        augmented.depth[idx] = sensor.at(u, v);
        augmented.provenance[idx] = DepthProvenance::measured_now;
      } else {
        augmented.depth[idx] = static_cast<float>(slot.position.z());
        augmented.provenance[idx] = DepthProvenance::propagated;
      }
      out.points.push_back({slot.position, slot.source});
    }
  }
  return {std::move(out), std::move(augmented)};
}

}  // namespace plod
