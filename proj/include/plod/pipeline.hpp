#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "plod/camera.hpp"
#include "plod/config.hpp"
#include "plod/dataset.hpp"
#include "plod/depth_filter.hpp"
#include "plod/depth_map.hpp"
#include "plod/depth_registry.hpp"
#include "plod/line_fit3d.hpp"
#include "plod/matches.hpp"
#include "plod/robust_pose.hpp"
#include "plod/trajectory.hpp"
#include "plod/triangulation.hpp"
#include "plod/uncertainty.hpp"

namespace plod {

enum class FrameStatus { tracked, fallback_velocity };

enum class TrackDepthSource : std::uint8_t {
  none,
  measured,
  propagated,
  estimated,
  hypothesis_pair,
};

struct TrackWeight {
  std::int64_t track_id = 0;
  double weight = 0.0;
};

struct FrameResult {
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  Pose global_pose;  // camera-in-world, anchored at the first frame
  FrameStatus status = FrameStatus::tracked;
  SolveStatus solver_status = SolveStatus::insufficient_matches;
  std::array<int, 5> family_counts{};
  int active_tracks = 0;
  int cloud_size = 0;
  int fused_observations = 0;
  int initialized_tracks = 0;
  int reset_tracks = 0;
  std::vector<std::int64_t> fused_track_ids;
  // Final Tukey weights per family entry, aligned with family_counts.
  std::array<std::vector<TrackWeight>, 5> weights;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<FrameResult> frames;
};

/// Per-frame orchestration: track maintenance, depth association, robust
/// pose estimation with velocity fallback, depth map registration, temporal
/// stereo triangulation and fusion under scheme A or B.
class OdometryPipeline {
 public:
  OdometryPipeline(const CameraIntrinsics& intrinsics,
                   const PipelineConfig& cfg)
      : K_(intrinsics),
        cfg_(cfg),
        window_(cfg.window_capacity),
        rng_(cfg.seed) {
    K_.validate();
    cfg_.validate();
  }

  FrameResult process_frame(const FrameData& frame) {
    FrameResult result;
    result.frame_id = frame.frame_id;
    result.timestamp = frame.timestamp;

    if (first_) return process_first_frame(frame, result);

    ingest_observations(frame);

    // Raw sensor depth sampled at the current observations (pre-pose).
    std::map<std::int64_t, Eigen::Vector3d> raw_points;
    std::map<std::int64_t, Line3D> raw_lines;
    sample_raw_depth(frame, &raw_points, &raw_lines);

    // Residual families from the previous frame's 3D and the current raw 3D.
    MatchSets matches;
    std::array<std::vector<std::int64_t>, 5> family_ids;
    build_match_sets(raw_points, raw_lines, &matches, &family_ids);

    const PoseEstimate est = estimate_pose(matches, last_motion_, cfg_.solver);
    bool fallback = est.status == SolveStatus::insufficient_matches ||
                    check_degeneracy(est.estimate, cfg_.solver);
    Pose step;
    Matrix6d step_cov;
    if (fallback) {
      step = velocity_fallback(last_motion_, cfg_.solver.velocity_decay);
      step_cov = fallback_covariance();
      result.status = FrameStatus::fallback_velocity;
    } else {
      step = est.estimate.pose;
      step_cov = est.estimate.cov;
      result.status = FrameStatus::tracked;
    }
    result.solver_status = est.status;
    result.family_counts = {int(matches.s1.size()), int(matches.s2.size()),
                            int(matches.s3.size()), int(matches.s4.size()),
                            int(matches.s5.size())};
    const std::vector<double>* fam_w[5] = {&est.w1, &est.w2, &est.w3, &est.w4,
                                           &est.w5};
    for (int f = 0; f < 5; ++f)
      for (std::size_t i = 0; i < fam_w[f]->size(); ++i)
        result.weights[f].push_back({family_ids[f][i], (*fam_w[f])[i]});

    window_.advance(frame.frame_id, step, step_cov);
    world_to_cam_ = step * world_to_cam_;
    last_motion_ = step;

    auto [cloud, augmented] =
        integrate_frame(cloud_, frame.depth, window_, K_, cfg_.registry);
    cloud_ = std::move(cloud);
    DepthMap augmented_raster;
    augmented_raster.width = augmented.width;
    augmented_raster.height = augmented.height;
    augmented_raster.data = augmented.depth;

    update_tracks(frame, augmented, augmented_raster, raw_points, raw_lines,
                  &result);

    result.global_pose = world_to_cam_.inverse();
    result.active_tracks = static_cast<int>(tracks_.size());
    result.cloud_size = static_cast<int>(cloud_.points.size());
    last_frame_id_ = frame.frame_id;
    return result;
  }

  const PoseChainWindow& window() const { return window_; }
  const RegisteredCloud& cloud() const { return cloud_; }

 private:
  struct Track {
    std::int64_t id = 0;
    FeatureKind kind = FeatureKind::point;
    std::int64_t anchor_frame = 0;
    // Observations in normalized coordinates; pixels kept for raster access.
    Eigen::Vector2d anchor_pt, anchor_e1, anchor_e2;
    Eigen::Vector2d prev_pt, cur_pt;
    Eigen::Vector2d cur_px, cur_e1_px, cur_e2_px;
    Line2D prev_line, cur_line;
    // 3D carried in the frame that has just been processed, feeding the next
    // frame's 3D-to-2D families.
    std::optional<Eigen::Vector3d> prev_p3d;
    std::optional<Line3D> prev_l3d;
    std::optional<Eigen::Vector3d> hyp_p3d;
    std::optional<Line3D> hyp_l3d;
    TrackDepthSource source = TrackDepthSource::none;
    InverseDepthState st, st1, st2;
    bool initialized = false;
    bool seen = false;
    bool is_new = false;
  };

  FrameResult process_first_frame(const FrameData& frame, FrameResult result) {
    window_.reset(frame.frame_id);
    world_to_cam_ = Pose::identity();
    last_motion_ = Pose::identity();
    for (const Observation& obs : frame.observations)
      create_track(obs, frame.frame_id);

    auto [cloud, augmented] =
        integrate_frame(cloud_, frame.depth, window_, K_, cfg_.registry);
    cloud_ = std::move(cloud);

    // Seed next frame's 3D-to-2D families from the sensor raster.
    for (auto& [id, t] : tracks_) {
      if (t.kind == FeatureKind::point) {
        if (auto p = sample_point_depth(frame.depth, t.cur_px, t.cur_pt)) {
          t.prev_p3d = p;
          t.source = TrackDepthSource::measured;
        }
      } else {
        if (auto l = fit_track_line(frame.depth, t)) {
          t.prev_l3d = l;
          t.source = TrackDepthSource::measured;
        }
      }
    }
    result.status = FrameStatus::tracked;
    result.solver_status = SolveStatus::converged;
    result.global_pose = Pose::identity();
    result.active_tracks = static_cast<int>(tracks_.size());
    result.cloud_size = static_cast<int>(cloud_.points.size());
    first_ = false;
    last_frame_id_ = frame.frame_id;
    return result;
  }

  void create_track(const Observation& obs, std::int64_t frame_id) {
    Track t;
    t.id = obs.track_id;
    t.kind = obs.kind;
    t.anchor_frame = frame_id;
    t.seen = true;
    t.is_new = true;
    if (obs.kind == FeatureKind::point) {
      t.cur_px = obs.point_px;
      t.cur_pt = K_.normalized_from_pixel(obs.point_px);
      t.anchor_pt = t.cur_pt;
      t.prev_pt = t.cur_pt;
    } else {
      t.cur_e1_px = obs.line_e1_px;
      t.cur_e2_px = obs.line_e2_px;
      t.cur_line = Line2D(K_.normalized_from_pixel(obs.line_e1_px),
                          K_.normalized_from_pixel(obs.line_e2_px));
      t.prev_line = t.cur_line;
      t.anchor_e1 = t.cur_line.e1;
      t.anchor_e2 = t.cur_line.e2;
    }
    tracks_[obs.track_id] = t;
  }

  void ingest_observations(const FrameData& frame) {
    for (auto& [id, t] : tracks_) {
      t.seen = false;
      t.is_new = false;
    }
    for (const Observation& obs : frame.observations) {
      auto it = tracks_.find(obs.track_id);
      if (obs.new_track || it == tracks_.end()) {
        create_track(obs, frame.frame_id);
        continue;
      }
      Track& t = it->second;
      t.seen = true;
      if (t.kind == FeatureKind::point) {
        t.prev_pt = t.cur_pt;
        t.cur_px = obs.point_px;
        t.cur_pt = K_.normalized_from_pixel(obs.point_px);
      } else {
        t.prev_line = t.cur_line;
        t.cur_e1_px = obs.line_e1_px;
        t.cur_e2_px = obs.line_e2_px;
        t.cur_line = Line2D(K_.normalized_from_pixel(obs.line_e1_px),
                            K_.normalized_from_pixel(obs.line_e2_px));
      }
    }
    // Match failure kills a track.
    for (auto it = tracks_.begin(); it != tracks_.end();) {
      if (!it->second.seen)
        it = tracks_.erase(it);
      else
        ++it;
    }
  }

  /// Depth at the rounded pixel, back-projected along the sub-pixel ray.
  std::optional<Eigen::Vector3d> sample_point_depth(
      const DepthMap& depth, const Eigen::Vector2d& px,
      const Eigen::Vector2d& norm) const {
    const int u = static_cast<int>(std::llround(px.x()));
    const int v = static_cast<int>(std::llround(px.y()));
    if (!depth.in_bounds(u, v)) return std::nullopt;
    const float d = depth.at(u, v);
    if (!DepthMap::is_valid(d)) return std::nullopt;
    return back_project_normalized(norm, d);
  }

  std::optional<Line3D> fit_track_line(const DepthMap& depth, const Track& t) {
    const LineDepthSamples samples = sample_line_depths(
        depth, t.cur_e1_px, t.cur_e2_px, K_, cfg_.ransac.stride_px);
    if (samples.valid_count < 3) return std::nullopt;
    const LineFitResult fit = fit_line_ransac_pca(samples, cfg_.ransac, rng_);
    if (!fit.ok()) return std::nullopt;
    return fit.line;
  }

  void sample_raw_depth(const FrameData& frame,
                        std::map<std::int64_t, Eigen::Vector3d>* raw_points,
                        std::map<std::int64_t, Line3D>* raw_lines) {
    for (auto& [id, t] : tracks_) {
      if (!t.seen) continue;
      if (t.kind == FeatureKind::point) {
        if (auto p = sample_point_depth(frame.depth, t.cur_px, t.cur_pt))
          (*raw_points)[id] = *p;
      } else {
        if (auto l = fit_track_line(frame.depth, t)) (*raw_lines)[id] = *l;
      }
    }
  }

  void build_match_sets(
      const std::map<std::int64_t, Eigen::Vector3d>& raw_points,
      const std::map<std::int64_t, Line3D>& raw_lines, MatchSets* ms,
      std::array<std::vector<std::int64_t>, 5>* ids) {
    for (auto& [id, t] : tracks_) {
      if (!t.seen || t.is_new) continue;
      if (t.kind == FeatureKind::point) {
        if (t.prev_p3d) {
          ms->s1.push_back({*t.prev_p3d, t.cur_pt});
          (*ids)[0].push_back(id);
        }
        if (t.hyp_p3d) {
          ms->s1.push_back({*t.hyp_p3d, t.cur_pt});
          (*ids)[0].push_back(id);
        }
        const auto raw = raw_points.find(id);
        if (raw != raw_points.end()) {
          ms->s2.push_back({t.prev_pt, raw->second});
          (*ids)[1].push_back(id);
        }
        if (!t.prev_p3d && !t.hyp_p3d && raw == raw_points.end()) {
          ms->s5.push_back({t.prev_pt, t.cur_pt});
          (*ids)[4].push_back(id);
        }
      } else {
        if (t.prev_l3d) {
          ms->s3.push_back({t.prev_l3d->P1, t.prev_l3d->P2,
                            t.cur_line.hessian});
          (*ids)[2].push_back(id);
        }
        if (t.hyp_l3d) {
          ms->s3.push_back({t.hyp_l3d->P1, t.hyp_l3d->P2,
                            t.cur_line.hessian});
          (*ids)[2].push_back(id);
        }
        const auto raw = raw_lines.find(id);
        if (raw != raw_lines.end()) {
          ms->s4.push_back({t.prev_line.hessian, raw->second.P1,
                            raw->second.P2});
          (*ids)[3].push_back(id);
        }
      }
    }
  }

  Matrix6d fallback_covariance() const {
    Matrix6d cov = Matrix6d::Zero();
    cov.topLeftCorner<3, 3>() = 10.0 * cfg_.solver.degeneracy_eigenvalue_max *
                                Eigen::Matrix3d::Identity();
    cov.bottomRightCorner<3, 3>() = 1e-2 * Eigen::Matrix3d::Identity();
    return cov;
  }

  double norm_tol(double px) const { return px / K_.fx; }

  void reset_track(Track& t, std::int64_t frame_id) {
    t.anchor_frame = frame_id;
    t.anchor_pt = t.cur_pt;
    t.anchor_e1 = t.cur_line.e1;
    t.anchor_e2 = t.cur_line.e2;
    t.st = init_state();
    t.st1 = init_state();
    t.st2 = init_state();
    t.initialized = false;
  }

  /// Re-express an inverse-depth state at a new anchor; depth-domain spread
  /// is preserved, so sigma_rho scales with rho^2.
  static InverseDepthState reexpress_state(const InverseDepthState& st,
                                           double rho_new) {
    InverseDepthState out = st;
    out.rho = rho_new;
    const double ratio = rho_new / st.rho;
    out.sigma2 = std::max(st.sigma2 * ratio * ratio * ratio * ratio, 1e-14);
    return out;
  }

  /// Move the anchor to the current frame, carrying converged inverse depth
  /// through the window transform. Uninformative states restart from the
  /// prior.
  void migrate_anchor(Track& t, const Pose& to_current,
                      std::int64_t frame_id) {
    if (t.kind == FeatureKind::point) {
      if (t.st.rho > 1e-6) {
        const Eigen::Vector3d pc =
            to_current.transform(back_project_normalized(t.anchor_pt,
                                                         1.0 / t.st.rho));
        if (pc.z() > kMinDepth) {
          t.st = reexpress_state(t.st, 1.0 / pc.z());
          t.anchor_pt = t.cur_pt;
        } else {
          t.st = init_state();
          t.anchor_pt = t.cur_pt;
          t.initialized = false;
        }
      } else {
        t.st = init_state();
        t.anchor_pt = t.cur_pt;
        t.initialized = false;
      }
    } else {
      bool ok = t.st1.rho > 1e-6 && t.st2.rho > 1e-6;
      if (ok) {
        const Eigen::Vector3d p1 = to_current.transform(
            back_project_normalized(t.anchor_e1, 1.0 / t.st1.rho));
        const Eigen::Vector3d p2 = to_current.transform(
            back_project_normalized(t.anchor_e2, 1.0 / t.st2.rho));
        if (p1.z() > kMinDepth && p2.z() > kMinDepth) {
          t.st1 = reexpress_state(t.st1, 1.0 / p1.z());
          t.st2 = reexpress_state(t.st2, 1.0 / p2.z());
          t.anchor_e1 = project_normalized(p1);
          t.anchor_e2 = project_normalized(p2);
        } else {
          ok = false;
        }
      }
      if (!ok) {
        t.st1 = init_state();
        t.st2 = init_state();
        t.anchor_e1 = t.cur_line.e1;
        t.anchor_e2 = t.cur_line.e2;
        t.initialized = false;
      }
    }
    t.anchor_frame = frame_id;
  }

  void update_tracks(const FrameData& frame, const AugmentedDepthMap& augmented,
                     const DepthMap& augmented_raster,
                     const std::map<std::int64_t, Eigen::Vector3d>& raw_points,
                     const std::map<std::int64_t, Line3D>& raw_lines,
                     FrameResult* result) {
    const std::int64_t fid = frame.frame_id;
    const double tri_tol = norm_tol(cfg_.triangulation.tol_px);
    const double cons_tol = norm_tol(cfg_.filter.consistency_tol_px);

    for (auto& [id, t] : tracks_) {
      if (!t.seen) continue;

      // Current-frame 3D from measurement or propagation.
      std::optional<Eigen::Vector3d> cur_p3d;
      std::optional<Line3D> cur_l3d;
      TrackDepthSource cur_src = TrackDepthSource::none;
      if (t.kind == FeatureKind::point) {
        const auto raw = raw_points.find(id);
        if (raw != raw_points.end()) {
          cur_p3d = raw->second;
          cur_src = TrackDepthSource::measured;
        } else {
          const int u = static_cast<int>(std::llround(t.cur_px.x()));
          const int v = static_cast<int>(std::llround(t.cur_px.y()));
          if (u >= 0 && u < augmented.width && v >= 0 && v < augmented.height) {
            const auto s = augmented.sample(u, v);
            if (s.valid()) {
              cur_p3d = back_project_normalized(t.cur_pt, s.depth);
              cur_src = s.provenance == DepthProvenance::measured_now
                            ? TrackDepthSource::measured
                            : TrackDepthSource::propagated;
            }
          }
        }
      } else {
        const auto raw = raw_lines.find(id);
        if (raw != raw_lines.end()) {
          cur_l3d = raw->second;
          cur_src = TrackDepthSource::measured;
        } else if (auto l = fit_track_line(augmented_raster, t)) {
          cur_l3d = l;
          cur_src = TrackDepthSource::propagated;
        }
      }

      // Temporal-stereo estimation.
      const bool has_measured = cur_p3d.has_value() || cur_l3d.has_value();
      if (cfg_.enable_depth_estimation && !t.is_new &&
          t.anchor_frame != fid) {
        const auto entry = window_.transform_to_current(t.anchor_frame);
        if (!entry) {
          // Anchor left the window before migration could run; restart.
          reset_track(t, fid);
          ++result->reset_tracks;
        } else if (cfg_.mode == EstimationMode::B || !has_measured) {
          const StereoFrame stereo{entry->to_current};
          if (t.kind == FeatureKind::point)
            estimate_point_depth(t, stereo, entry->cov, tri_tol, fid, result);
          else
            estimate_line_depth(t, stereo, entry->cov, tri_tol, fid, result);
        }
      }

      // Initialization of converged states (first success re-anchors).
      if (cfg_.enable_depth_estimation && !t.initialized &&
          t.anchor_frame != fid) {
        const auto entry = window_.transform_to_current(t.anchor_frame);
        if (entry) try_initialize_track(t, entry->to_current, fid, result);
      }

      // Consistency of the fused estimate against the latest observation.
      if ((t.st.n_obs >= 1 || t.st1.n_obs >= 1) && t.anchor_frame != fid) {
        const auto entry = window_.transform_to_current(t.anchor_frame);
        if (entry) {
          const StereoFrame stereo{entry->to_current};
          bool keep = true;
          if (t.kind == FeatureKind::point) {
            keep = consistency_keep_point(t.st, t.anchor_pt, t.cur_pt, stereo,
                                          cons_tol);
          } else {
            keep = consistency_keep_line_endpoint(t.st1, t.anchor_e1,
                                                  t.cur_line.hessian, stereo,
                                                  cons_tol) &&
                   consistency_keep_line_endpoint(t.st2, t.anchor_e2,
                                                  t.cur_line.hessian, stereo,
                                                  cons_tol);
          }
          if (!keep) {
            reset_track(t, fid);
            ++result->reset_tracks;
          }
        }
      }

      // Keep anchors inside the window: migrate those about to age out.
      if (t.anchor_frame <= fid - window_.capacity() + 1 &&
          t.anchor_frame != fid) {
        const auto entry = window_.transform_to_current(t.anchor_frame);
        if (entry)
          migrate_anchor(t, entry->to_current, fid);
        else
          reset_track(t, fid);
      }

      // Refresh the 3D carried into the next frame (current-frame coords).
      t.prev_p3d.reset();
      t.prev_l3d.reset();
      t.hyp_p3d.reset();
      t.hyp_l3d.reset();
      t.source = TrackDepthSource::none;

      std::optional<Eigen::Vector3d> est_p3d;
      std::optional<Line3D> est_l3d;
      if (t.initialized) {
        const auto entry = window_.transform_to_current(t.anchor_frame);
        if (entry) {
          if (t.kind == FeatureKind::point && t.st.rho > cfg_.filter.rho_min) {
            const Eigen::Vector3d pc = entry->to_current.transform(
                back_project_normalized(t.anchor_pt, 1.0 / t.st.rho));
            if (pc.z() > kMinDepth) est_p3d = pc;
          } else if (t.kind == FeatureKind::line &&
                     t.st1.rho > cfg_.filter.rho_min &&
                     t.st2.rho > cfg_.filter.rho_min) {
            const Eigen::Vector3d p1 = entry->to_current.transform(
                back_project_normalized(t.anchor_e1, 1.0 / t.st1.rho));
            const Eigen::Vector3d p2 = entry->to_current.transform(
                back_project_normalized(t.anchor_e2, 1.0 / t.st2.rho));
            if (p1.z() > kMinDepth && p2.z() > kMinDepth &&
                (p2 - p1).norm() > 1e-6)
              est_l3d = Line3D(p1, p2);
          }
        }
      }

      if (t.kind == FeatureKind::point) {
        if (cur_p3d && est_p3d && cfg_.mode == EstimationMode::B) {
          t.prev_p3d = cur_p3d;
          t.hyp_p3d = est_p3d;
          t.source = TrackDepthSource::hypothesis_pair;
        } else if (cur_p3d) {
          t.prev_p3d = cur_p3d;
          t.source = cur_src;
        } else if (est_p3d) {
          t.prev_p3d = est_p3d;
          t.source = TrackDepthSource::estimated;
        }
      } else {
        if (cur_l3d && est_l3d && cfg_.mode == EstimationMode::B) {
          t.prev_l3d = cur_l3d;
          t.hyp_l3d = est_l3d;
          t.source = TrackDepthSource::hypothesis_pair;
        } else if (cur_l3d) {
          t.prev_l3d = cur_l3d;
          t.source = cur_src;
        } else if (est_l3d) {
          t.prev_l3d = est_l3d;
          t.source = TrackDepthSource::estimated;
        }
      }
    }
  }

  void estimate_point_depth(Track& t, const StereoFrame& stereo,
                            const Matrix6d& stereo_cov, double tri_tol,
                            std::int64_t fid, FrameResult* result) {
    const PointTriangulation tri =
        triangulate_point_linear(t.anchor_pt, t.cur_pt, stereo);
    if (tri.ok()) {
      if (!validate_point_correction(t.anchor_pt, t.cur_pt, tri, tri_tol))
        return;
      const DepthEstimate trig =
          point_depth_trig(homogeneous(tri.corrected_anchor),
                           homogeneous(tri.corrected_current), stereo);
      if (!trig.ok()) return;
      const auto var = inverse_depth_variance(
          DepthKind::point, t.anchor_pt, t.cur_pt, Eigen::Vector2d::Zero(),
          stereo, stereo_cov, K_, cfg_.pixel_sigma_px);
      if (!var.ok || !(var.sigma2 > 0.0)) return;
      t.st = fuse(t.st, {1.0 / trig.z, var.sigma2});
      ++result->fused_observations;
      result->fused_track_ids.push_back(t.id);
    } else {
      // No usable depth; the arbitrary-depth probe still unmasks mismatches.
      if (!validate_point_arbitrary(t.anchor_pt, t.cur_pt, stereo, tri_tol,
                                    cfg_.triangulation.arbitrary_depth)) {
        reset_track(t, fid);
        ++result->reset_tracks;
      }
    }
  }

  void estimate_line_depth(Track& t, const StereoFrame& stereo,
                           const Matrix6d& stereo_cov, double tri_tol,
                           std::int64_t fid, FrameResult* result) {
    const Eigen::Vector2d cur_e1 = t.cur_line.e1;
    const Eigen::Vector2d cur_e2 = t.cur_line.e2;
    struct EndpointRef {
      Eigen::Vector2d anchor;
      InverseDepthState* state;
    };
    EndpointRef endpoints[2] = {{t.anchor_e1, &t.st1}, {t.anchor_e2, &t.st2}};
    bool fused_any = false;
    for (auto& ep : endpoints) {
      const DepthEstimate est = triangulate_line_endpoint(
          homogeneous(ep.anchor), cur_e1, cur_e2, stereo);
      const bool valid = validate_line_endpoint(
          est, homogeneous(ep.anchor), t.cur_line.hessian, stereo, tri_tol,
          cfg_.triangulation.arbitrary_depth);
      if (est.ok() && valid) {
        const auto var = inverse_depth_variance(
            DepthKind::line_endpoint, ep.anchor, cur_e1, cur_e2, stereo,
            stereo_cov, K_, cfg_.pixel_sigma_px);
        if (!var.ok || !(var.sigma2 > 0.0)) continue;
        *ep.state = fuse(*ep.state, {1.0 / est.z, var.sigma2});
        fused_any = true;
      } else if (!est.ok() && !valid) {
        reset_track(t, fid);
        ++result->reset_tracks;
        return;
      }
    }
    if (fused_any) {
      ++result->fused_observations;
      result->fused_track_ids.push_back(t.id);
    }
  }

  void try_initialize_track(Track& t, const Pose& to_current,
                            std::int64_t fid, FrameResult* result) {
    if (t.kind == FeatureKind::point) {
      const auto p = try_initialize_point(t.st, t.anchor_pt, cfg_.filter);
      if (!p) return;
      const Eigen::Vector3d pc = to_current.transform(*p);
      if (pc.z() <= kMinDepth) return;
      t.st = reexpress_state(t.st, 1.0 / pc.z());
      t.anchor_pt = t.cur_pt;
      t.anchor_frame = fid;
      t.initialized = true;
      ++result->initialized_tracks;
    } else {
      const auto line = try_initialize_line(t.st1, t.st2, t.anchor_e1,
                                            t.anchor_e2, cfg_.filter);
      if (!line) return;
      const Eigen::Vector3d p1 = to_current.transform(line->P1);
      const Eigen::Vector3d p2 = to_current.transform(line->P2);
      if (p1.z() <= kMinDepth || p2.z() <= kMinDepth) return;
      t.st1 = reexpress_state(t.st1, 1.0 / p1.z());
      t.st2 = reexpress_state(t.st2, 1.0 / p2.z());
      t.anchor_e1 = project_normalized(p1);
      t.anchor_e2 = project_normalized(p2);
      t.anchor_frame = fid;
      t.initialized = true;
      ++result->initialized_tracks;
    }
  }

  CameraIntrinsics K_;
  PipelineConfig cfg_;
  PoseChainWindow window_;
  std::mt19937_64 rng_;
  RegisteredCloud cloud_;
  std::map<std::int64_t, Track> tracks_;
  Pose last_motion_;
  Pose world_to_cam_;
  bool first_ = true;
  std::int64_t last_frame_id_ = -1;
};

/// Left-fold of process_frame over an ordered dataset.
inline RunResult run_sequence(const Dataset& ds, const PipelineConfig& cfg) {
  RunResult out;
  if (ds.frames.empty()) return out;
  OdometryPipeline pipeline(ds.intrinsics, cfg);
  std::int64_t prev = std::numeric_limits<std::int64_t>::min();
  for (const FrameData& frame : ds.frames) {
    if (frame.frame_id <= prev)
      throw DatasetFormatError("dataset frames must be time-ordered");
    prev = frame.frame_id;
    out.frames.push_back(pipeline.process_frame(frame));
    out.trajectory.push_back(
        {frame.timestamp, out.frames.back().global_pose});
  }
  return out;
}

}  // namespace plod
