#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "plod/camera.hpp"
#include "plod/dataset.hpp"
#include "plod/depth_map.hpp"
#include "plod/errors.hpp"
#include "plod/pose.hpp"

namespace plod::sim {

struct SceneSpec {
  int point_count = 150;
  int line_count = 40;
  double extent = 8.0;  // m
  enum class Style { room, corridor, sparse_outdoor };
  Style style = Style::room;
};

struct SensorSpec {
  CameraIntrinsics intrinsics{525.0, 525.0, 319.5, 239.5, 640, 480};
  double pixel_noise_px = 0.0;
  double depth_noise_a = 0.0;  // sigma_Z = a + b * Z^2
  double depth_noise_b = 0.0;
  double dropout_prob = 0.0;
  double corruption_prob = 0.0;  // spatially stable spurious-depth mask
  double corruption_bias = 0.5;  // m
  double depth_min = 0.4;        // m
  double depth_max = 5.0;        // m
  double mismatch_prob = 0.0;    // per continuing correspondence
};

struct TrajectorySpec {
  enum class Style { arc, straight, orbit };
  Style style = Style::arc;
  double length = 4.0;  // m
  int frames = 100;
  double angular_rate_deg = 20.0;  // deg/s (arc style)
  double fps = 30.0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double uniform01(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

namespace detail {

/// Finite rectangle with orthogonal edge vectors.
struct Rect {
  Eigen::Vector3d origin, eu, ev;
};

struct World {
  std::vector<Rect> rects;
  std::vector<Eigen::Vector3d> points;                         // world frame
  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> lines;
};

/// Depth along a camera ray (x, y, 1): the ray parameter equals Z.
inline std::optional<double> ray_depth(const Rect& rect,
                                       const Eigen::Vector3d& dir) {
  const Eigen::Vector3d n = rect.eu.cross(rect.ev);
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double s = n.dot(rect.origin) / denom;
  if (s <= 0.0) return std::nullopt;
  const Eigen::Vector3d rel = s * dir - rect.origin;
  const double a = rel.dot(rect.eu) / rect.eu.squaredNorm();
  const double b = rel.dot(rect.ev) / rect.ev.squaredNorm();
  if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) return std::nullopt;
  return s;
}

inline std::vector<Rect> make_rects(const SceneSpec& scene) {
  const double e = scene.extent;
  std::vector<Rect> rects;
  using V = Eigen::Vector3d;
  auto box = [&](double x0, double x1, double y0, double y1, double z0,
                 double z1) {
    rects.push_back({V(x0, y0, z1), V(x1 - x0, 0, 0), V(0, y1 - y0, 0)});  // far
    rects.push_back({V(x0, y0, z0), V(x1 - x0, 0, 0), V(0, y1 - y0, 0)});  // near
    rects.push_back({V(x1, y0, z0), V(0, 0, z1 - z0), V(0, y1 - y0, 0)});  // +x
    rects.push_back({V(x0, y0, z0), V(0, 0, z1 - z0), V(0, y1 - y0, 0)});  // -x
    rects.push_back({V(x0, y1, z0), V(x1 - x0, 0, 0), V(0, 0, z1 - z0)});  // floor
    rects.push_back({V(x0, y0, z0), V(x1 - x0, 0, 0), V(0, 0, z1 - z0)});  // ceil
  };
  switch (scene.style) {
    case SceneSpec::Style::room:
      box(-e / 2, e / 2, -e / 4, e / 4, -e / 2, e);
      break;
    case SceneSpec::Style::corridor: {
      const double w = std::max(2.0, e / 8.0);
      box(-w / 2, w / 2, -w / 2, w / 2, -2.0, e);
      break;
    }
    case SceneSpec::Style::sparse_outdoor: {
      rects.push_back({V(-e, 1.2, -2.0), V(2 * e, 0, 0), V(0, 0, e + 2.0)});
      for (int i = 0; i < 8; ++i) {
        const double cx = -e / 3 + (2.0 * e / 3) * (i / 7.0);
        const double cz = 4.0 + (0.9 * e - 4.0) * ((i * 3) % 8) / 7.0;
        rects.push_back({V(cx - 1.0, -0.8, cz), V(2, 0, 0), V(0, 2, 0)});
      }
      break;
    }
  }
  return rects;
}

inline World make_world(const SceneSpec& scene, std::mt19937_64& rng) {
  World world;
  world.rects = make_rects(scene);
  std::uniform_int_distribution<int> pick_rect(
      0, static_cast<int>(world.rects.size()) - 1);
  std::uniform_real_distribution<double> uv(0.03, 0.97);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> seg_len(0.8, 2.2);

  for (int i = 0; i < scene.point_count; ++i) {
    const Rect& r = world.rects[pick_rect(rng)];
    world.points.push_back(r.origin + uv(rng) * r.eu + uv(rng) * r.ev);
  }
  for (int i = 0; i < scene.line_count; ++i) {
    for (int attempt = 0; attempt < 32; ++attempt) {
      const Rect& r = world.rects[pick_rect(rng)];
      const double a = uv(rng), b = uv(rng), th = angle(rng);
      const double len = seg_len(rng);
      const double a2 =
          std::clamp(a + len * std::cos(th) / r.eu.norm(), 0.02, 0.98);
      const double b2 =
          std::clamp(b + len * std::sin(th) / r.ev.norm(), 0.02, 0.98);
      const Eigen::Vector3d p1 = r.origin + a * r.eu + b * r.ev;
      const Eigen::Vector3d p2 = r.origin + a2 * r.eu + b2 * r.ev;
      if ((p2 - p1).norm() >= 0.4) {
        world.lines.emplace_back(p1, p2);
        break;
      }
    }
  }
  if (static_cast<int>(world.lines.size()) < scene.line_count)
    throw SpecError("scene too small to host the requested line segments");
  return world;
}

inline Eigen::Matrix3d rot_y(double angle) {
  Eigen::Matrix3d m;
  m << std::cos(angle), 0.0, std::sin(angle), 0.0, 1.0, 0.0, -std::sin(angle),
      0.0, std::cos(angle);
  return m;
}

/// Camera-in-world poses. World frame coincides with the first camera.
inline std::vector<Pose> make_trajectory(const TrajectorySpec& spec) {
  std::vector<Pose> poses;
  poses.reserve(spec.frames);
  const int n = spec.frames;
  for (int i = 0; i < n; ++i) {
    const double s = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    Pose p;
    switch (spec.style) {
      case TrajectorySpec::Style::straight:
        p.t = {0.0, 0.0, spec.length * s};
        break;
      case TrajectorySpec::Style::arc: {
        const double duration = n / spec.fps;
        const double total = spec.angular_rate_deg * M_PI / 180.0 * duration;
        if (std::abs(total) < 1e-9) {
          p.t = {0.0, 0.0, spec.length * s};
          break;
        }
        const double radius = spec.length / std::abs(total);
        const double phi = total * s;
        const double sign = total >= 0.0 ? 1.0 : -1.0;
        p.t = {sign * radius * (1.0 - std::cos(phi)), 0.0,
               radius * std::sin(std::abs(phi))};
        p.q = Eigen::Quaterniond(rot_y(phi));
        break;
      }
      case TrajectorySpec::Style::orbit: {
        const double d = std::max(1.0, spec.length / 3.0);
        const double total = spec.length / d;
        const double psi = total * s;
        p.t = Eigen::Vector3d(0, 0, d) +
              d * Eigen::Vector3d(std::sin(psi), 0.0, -std::cos(psi));
        p.q = Eigen::Quaterniond(rot_y(-psi));
        break;
      }
    }
    p.normalize();
    poses.push_back(p);
  }
  return poses;
}

/// Clip [s0,s1] of P(s) = a + s (b - a) to Z >= near in camera frame.
inline bool clip_by_depth(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                          double near, double* s0, double* s1) {
  const double za = a.z(), zb = b.z();
  *s0 = 0.0;
  *s1 = 1.0;
  if (za < near && zb < near) return false;
  if (za < near) *s0 = (near - za) / (zb - za);
  if (zb < near) *s1 = (near - za) / (zb - za);
  return *s1 > *s0;
}

/// Liang-Barsky segment clip against the pixel rectangle.
inline bool clip_to_image(Eigen::Vector2d* p0, Eigen::Vector2d* p1,
                          double width, double height) {
  double t0 = 0.0, t1 = 1.0;
  const Eigen::Vector2d d = *p1 - *p0;
  const double checks[4][2] = {{-d.x(), p0->x() - 0.0},
                               {d.x(), (width - 1) - p0->x()},
                               {-d.y(), p0->y() - 0.0},
                               {d.y(), (height - 1) - p0->y()}};
  for (const auto& c : checks) {
    const double p = c[0], q = c[1];
    if (std::abs(p) < 1e-15) {
      if (q < 0.0) return false;
      continue;
    }
    const double r = q / p;
    if (p < 0.0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
  }
  const Eigen::Vector2d a = *p0 + t0 * d;
  const Eigen::Vector2d b = *p0 + t1 * d;
  *p0 = a;
  *p1 = b;
  return true;
}

/// Depth of the point on the pixel ray closest to the 3D segment's line.
inline std::optional<double> ray_to_line_depth(const Eigen::Vector3d& dir,
                                               const Eigen::Vector3d& a,
                                               const Eigen::Vector3d& b) {
  const Eigen::Vector3d u = dir;
  const Eigen::Vector3d v = b - a;
  const double uu = u.dot(u), uv = u.dot(v), vv = v.dot(v);
  const double denom = uu * vv - uv * uv;
  if (std::abs(denom) < 1e-12) return std::nullopt;  // parallel
  const double s = (a.dot(u) * vv - a.dot(v) * uv) / denom;
  if (s <= 0.0) return std::nullopt;
  return s;  // dir.z == 1, so the parameter is the depth
}

}  // namespace detail

inline void validate(const SceneSpec& scene, const TrajectorySpec& traj,
                     const SensorSpec& sensor) {
  if (scene.point_count < 0 || scene.line_count < 0)
    throw SpecError("scene: landmark counts must be non-negative");
  if (!(scene.extent > 0.0)) throw SpecError("scene: extent must be positive");
  if (traj.frames < 2) throw SpecError("trajectory: needs at least 2 frames");
  if (!(traj.fps > 0.0)) throw SpecError("trajectory: fps must be positive");
  if (traj.length < 0.0)
    throw SpecError("trajectory: length must be non-negative");
  sensor.intrinsics.validate();
  for (double p : {sensor.pixel_noise_px, sensor.depth_noise_a,
                   sensor.depth_noise_b, sensor.corruption_bias})
    if (p < 0.0) throw SpecError("sensor: noise magnitudes must be >= 0");
  for (double p :
       {sensor.dropout_prob, sensor.corruption_prob, sensor.mismatch_prob})
    if (p < 0.0 || p > 1.0)
      throw SpecError("sensor: probabilities must lie in [0,1]");
  if (!(sensor.depth_min > 0.0) || !(sensor.depth_max > sensor.depth_min))
    throw SpecError("sensor: depth range must satisfy 0 < min < max");
}

/// Deterministic synthetic RGB-D dataset: exact data association with
/// injected mismatches, plus depth rasters carrying noise, dropout, range
/// gating and a spatially stable corruption mask.
inline Dataset generate_dataset(const SceneSpec& scene,
                                const TrajectorySpec& traj,
                                const SensorSpec& sensor,
                                std::uint64_t seed) {
  validate(scene, traj, sensor);
  const CameraIntrinsics& K = sensor.intrinsics;
  Dataset ds;
  ds.intrinsics = K;
  ds.fps = traj.fps;
  ds.seed = seed;

  std::mt19937_64 scene_rng(splitmix64(seed));
  const detail::World world = detail::make_world(scene, scene_rng);
  const std::vector<Pose> trajectory = detail::make_trajectory(traj);

  const std::int64_t line_id_base = 1000000;
  const double min_seg_px = 10.0;
  std::vector<char> point_visible(world.points.size(), 0);
  std::vector<char> line_visible(world.lines.size(), 0);

  for (int fi = 0; fi < traj.frames; ++fi) {
    const Pose cam_in_world = trajectory[fi];
    const Pose world_to_cam = cam_in_world.inverse();
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(0xF00D + fi)));
    std::normal_distribution<double> gauss(0.0, 1.0);

    FrameData frame;
    frame.frame_id = fi;
    frame.timestamp = fi / traj.fps;
    frame.depth = DepthMap(K.width, K.height);

    // Background surfaces, camera frame.
    std::vector<detail::Rect> rects_cam;
    rects_cam.reserve(world.rects.size());
    for (const auto& r : world.rects) {
      detail::Rect rc;
      rc.origin = world_to_cam.transform(r.origin);
      rc.eu = world_to_cam.q * r.eu;
      rc.ev = world_to_cam.q * r.ev;
      rects_cam.push_back(rc);
    }
    for (int v = 0; v < K.height; ++v) {
      for (int u = 0; u < K.width; ++u) {
        const Eigen::Vector3d dir((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& rc : rects_cam) {
          const auto z = detail::ray_depth(rc, dir);
          if (z && *z < best) best = *z;
        }
        if (std::isfinite(best))
          frame.depth.at(u, v) = static_cast<float>(best);
      }
    }

    // Point landmarks: exact observation plus a depth stamp at its pixel so
    // rounded-pixel sampling recovers the landmark exactly.
    struct PendingPoint {
      std::int64_t id;
      Eigen::Vector2d obs_px;
      bool is_new;
    };
    std::vector<PendingPoint> pts;
    std::vector<char> point_visible_now(world.points.size(), 0);
    for (std::size_t li = 0; li < world.points.size(); ++li) {
      const Eigen::Vector3d pc = world_to_cam.transform(world.points[li]);
      if (pc.z() < 0.05) continue;
      const Eigen::Vector2d px = project_pixel(pc, K);
      if (!K.pixel_in_bounds(px)) continue;
      const int su = static_cast<int>(std::llround(px.x()));
      const int sv = static_cast<int>(std::llround(px.y()));
      if (frame.depth.in_bounds(su, sv))
        frame.depth.at(su, sv) = static_cast<float>(pc.z());
      point_visible_now[li] = 1;
      Eigen::Vector2d obs = px;
      if (sensor.pixel_noise_px > 0.0) {
        obs.x() += sensor.pixel_noise_px * gauss(rng);
        obs.y() += sensor.pixel_noise_px * gauss(rng);
      }
      pts.push_back({static_cast<std::int64_t>(li), obs, !point_visible[li]});
    }

    // Line landmarks: clip to the frustum and image, stamp consistent depth
    // along the rasterized segment, then perturb the observed endpoints.
    struct PendingLine {
      std::int64_t id;
      Eigen::Vector2d e1, e2;
      bool is_new;
    };
    std::vector<PendingLine> lns;
    std::vector<char> line_visible_now(world.lines.size(), 0);
    for (std::size_t li = 0; li < world.lines.size(); ++li) {
      const Eigen::Vector3d a = world_to_cam.transform(world.lines[li].first);
      const Eigen::Vector3d b = world_to_cam.transform(world.lines[li].second);
      double s0, s1;
      if (!detail::clip_by_depth(a, b, 0.05, &s0, &s1)) continue;
      const Eigen::Vector3d ca = a + s0 * (b - a);
      const Eigen::Vector3d cb = a + s1 * (b - a);
      Eigen::Vector2d p0 = project_pixel(ca, K);
      Eigen::Vector2d p1 = project_pixel(cb, K);
      if (!detail::clip_to_image(&p0, &p1, K.width, K.height)) continue;
      if ((p1 - p0).norm() < min_seg_px) continue;

      // Stamp every pixel the segment rasterizes to.
      const double chebyshev = std::max(std::abs(p1.x() - p0.x()),
                                        std::abs(p1.y() - p0.y()));
      const int steps = static_cast<int>(std::ceil(chebyshev / 0.25));
      int last_u = -1, last_v = -1;
      for (int k = 0; k <= steps; ++k) {
        const Eigen::Vector2d pos = p0 + (p1 - p0) * (steps > 0 ? double(k) / steps : 0.0);
        const int u = static_cast<int>(std::llround(pos.x()));
        const int v = static_cast<int>(std::llround(pos.y()));
        if (u == last_u && v == last_v) continue;
        last_u = u;
        last_v = v;
        if (!frame.depth.in_bounds(u, v)) continue;
        const Eigen::Vector3d dir((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
        const auto z = detail::ray_to_line_depth(dir, a, b);
        if (z) frame.depth.at(u, v) = static_cast<float>(*z);
      }

      line_visible_now[li] = 1;
      Eigen::Vector2d o0 = p0, o1 = p1;
      if (sensor.pixel_noise_px > 0.0) {
        o0.x() += sensor.pixel_noise_px * gauss(rng);
        o0.y() += sensor.pixel_noise_px * gauss(rng);
        o1.x() += sensor.pixel_noise_px * gauss(rng);
        o1.y() += sensor.pixel_noise_px * gauss(rng);
        if (!detail::clip_to_image(&o0, &o1, K.width, K.height)) {
          line_visible_now[li] = 0;
          continue;
        }
        if ((o1 - o0).norm() < min_seg_px) {
          line_visible_now[li] = 0;
          continue;
        }
      }
      lns.push_back({line_id_base + static_cast<std::int64_t>(li), o0, o1,
                     !line_visible[li]});
    }

    // Sensor degradation: range gate, stable corruption, noise, dropout.
    for (int v = 0; v < K.height; ++v) {
      for (int u = 0; u < K.width; ++u) {
        float& d = frame.depth.at(u, v);
        if (!DepthMap::is_valid(d)) {
          d = 0.0f;
          continue;
        }
        if (d < sensor.depth_min || d > sensor.depth_max) {
          d = 0.0f;
          continue;
        }
        if (sensor.corruption_prob > 0.0) {
          const std::uint64_t h = splitmix64(
              seed ^ splitmix64(0xC0FFEEull + 73856093ull * u + 19349663ull * v));
          if (uniform01(h) < sensor.corruption_prob)
            d += static_cast<float>(sensor.corruption_bias);
        }
        const double sigma =
            sensor.depth_noise_a + sensor.depth_noise_b * double(d) * double(d);
        if (sigma > 0.0) d += static_cast<float>(sigma * gauss(rng));
        if (sensor.dropout_prob > 0.0 &&
            uniform01(rng()) < sensor.dropout_prob)
          d = 0.0f;
        if (d <= 0.0f) d = 0.0f;
      }
    }

    // Mismatch injection on continuing tracks: the observation jumps to a
    // different visible feature of the same kind.
    if (sensor.mismatch_prob > 0.0 && fi > 0) {
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      if (pts.size() >= 2) {
        std::uniform_int_distribution<int> pick(0, int(pts.size()) - 1);
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (pts[i].is_new || u01(rng) >= sensor.mismatch_prob) continue;
          int j = pick(rng);
          if (j == int(i)) j = (j + 1) % int(pts.size());
          pts[i].obs_px = pts[j].obs_px;
          ds.injected_mismatches.emplace_back(fi, pts[i].id);
        }
      }
      if (lns.size() >= 2) {
        std::uniform_int_distribution<int> pick(0, int(lns.size()) - 1);
        for (std::size_t i = 0; i < lns.size(); ++i) {
          if (lns[i].is_new || u01(rng) >= sensor.mismatch_prob) continue;
          int j = pick(rng);
          if (j == int(i)) j = (j + 1) % int(lns.size());
          lns[i].e1 = lns[j].e1;
          lns[i].e2 = lns[j].e2;
          ds.injected_mismatches.emplace_back(fi, lns[i].id);
        }
      }
    }

    for (const auto& p : pts) {
      Observation obs;
      obs.track_id = p.id;
      obs.kind = FeatureKind::point;
      obs.new_track = p.is_new;
      obs.point_px = p.obs_px;
      frame.observations.push_back(obs);
    }
    for (const auto& l : lns) {
      Observation obs;
      obs.track_id = l.id;
      obs.kind = FeatureKind::line;
      obs.new_track = l.is_new;
      obs.line_e1_px = l.e1;
      obs.line_e2_px = l.e2;
      frame.observations.push_back(obs);
    }

    point_visible = point_visible_now;
    line_visible = line_visible_now;

    ds.frames.push_back(std::move(frame));
    ds.ground_truth.push_back({fi / traj.fps, cam_in_world});
  }
  return ds;
}

}  // namespace plod::sim
