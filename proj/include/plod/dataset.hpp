#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "plod/camera.hpp"
#include "plod/depth_map.hpp"
#include "plod/errors.hpp"
#include "plod/trajectory.hpp"

namespace plod {

enum class FeatureKind { point, line };

/// One correspondence record: a track's observation in a frame, in pixels.
struct Observation {
  std::int64_t track_id = 0;
  FeatureKind kind = FeatureKind::point;
  bool new_track = false;
  Eigen::Vector2d point_px = Eigen::Vector2d::Zero();
  Eigen::Vector2d line_e1_px = Eigen::Vector2d::Zero();
  Eigen::Vector2d line_e2_px = Eigen::Vector2d::Zero();
};

struct FrameData {
  std::int64_t frame_id = 0;
  double timestamp = 0.0;
  std::vector<Observation> observations;
  DepthMap depth;
};

struct Dataset {
  CameraIntrinsics intrinsics;
  double fps = 30.0;
  std::uint64_t seed = 0;
  std::vector<FrameData> frames;
  Trajectory ground_truth;  // camera-in-world per frame
  // Diagnostics sidecar: correspondences replaced by a wrong feature.
  std::vector<std::pair<std::int64_t, std::int64_t>> injected_mismatches;
};

namespace detail {

inline std::string frame_raster_name(std::int64_t frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06lld.spld",
                static_cast<long long>(frame_id));
  return buf;
}

}  // namespace detail

inline void write_dataset(const Dataset& ds,
                          const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "depth");

  {
    nlohmann::json j{{"fx", ds.intrinsics.fx}, {"fy", ds.intrinsics.fy},
                     {"cx", ds.intrinsics.cx}, {"cy", ds.intrinsics.cy},
                     {"width", ds.intrinsics.width},
                     {"height", ds.intrinsics.height}};
    std::ofstream f(dir / "intrinsics.json");
    f << j.dump(2) << "\n";
  }
  {
    nlohmann::json j{{"fps", ds.fps},
                     {"frames", ds.frames.size()},
                     {"seed", ds.seed}};
    std::ofstream f(dir / "meta.json");
    f << j.dump(2) << "\n";
  }
  {
    std::ofstream f(dir / "correspondences.jsonl");
    for (const auto& frame : ds.frames) {
      for (const auto& obs : frame.observations) {
        nlohmann::json j;
        j["frame"] = frame.frame_id;
        j["track_id"] = obs.track_id;
        j["kind"] = obs.kind == FeatureKind::point ? "point" : "line";
        if (obs.kind == FeatureKind::point) {
          j["obs"] = {obs.point_px.x(), obs.point_px.y()};
        } else {
          j["obs"] = {{obs.line_e1_px.x(), obs.line_e1_px.y()},
                      {obs.line_e2_px.x(), obs.line_e2_px.y()}};
        }
        j["new_track"] = obs.new_track;
        f << j.dump() << "\n";
      }
    }
  }
  for (const auto& frame : ds.frames)
    write_spld(frame.depth, dir / "depth" / detail::frame_raster_name(frame.frame_id));
  write_tum(ds.ground_truth, dir / "groundtruth.txt");
  if (!ds.injected_mismatches.empty()) {
    std::ofstream f(dir / "mismatches.jsonl");
    for (const auto& [frame, track] : ds.injected_mismatches) {
      nlohmann::json j{{"frame", frame}, {"track_id", track}};
      f << j.dump() << "\n";
    }
  }
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  auto parse_json_file = [](const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw DatasetFormatError("cannot open: " + p.string());
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DatasetFormatError(p.string() + ": " + e.what());
    }
    return j;
  };

  {
    const nlohmann::json j = parse_json_file(dir / "intrinsics.json");
    try {
      ds.intrinsics.fx = j.at("fx").get<double>();
      ds.intrinsics.fy = j.at("fy").get<double>();
      ds.intrinsics.cx = j.at("cx").get<double>();
      ds.intrinsics.cy = j.at("cy").get<double>();
      ds.intrinsics.width = j.at("width").get<int>();
      ds.intrinsics.height = j.at("height").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw DatasetFormatError("intrinsics.json: " + std::string(e.what()));
    }
    ds.intrinsics.validate();
  }
  std::size_t n_frames = 0;
  {
    const nlohmann::json j = parse_json_file(dir / "meta.json");
    ds.fps = j.value("fps", 30.0);
    n_frames = j.at("frames").get<std::size_t>();
    ds.seed = j.value("seed", std::uint64_t{0});
  }

  ds.frames.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    ds.frames[i].frame_id = static_cast<std::int64_t>(i);
    ds.frames[i].timestamp = static_cast<double>(i) / ds.fps;
    ds.frames[i].depth =
        read_spld(dir / "depth" / detail::frame_raster_name(i));
  }

  {
    std::ifstream f(dir / "correspondences.jsonl");
    if (!f)
      throw DatasetFormatError("cannot open: " +
                               (dir / "correspondences.jsonl").string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        Observation obs;
        const std::int64_t frame = j.at("frame").get<std::int64_t>();
        if (frame < 0 || static_cast<std::size_t>(frame) >= n_frames)
          throw DatasetFormatError("correspondence frame out of range");
        obs.track_id = j.at("track_id").get<std::int64_t>();
        const std::string kind = j.at("kind").get<std::string>();
        obs.new_track = j.at("new_track").get<bool>();
        if (kind == "point") {
          obs.kind = FeatureKind::point;
          obs.point_px = {j.at("obs").at(0).get<double>(),
                          j.at("obs").at(1).get<double>()};
        } else if (kind == "line") {
          obs.kind = FeatureKind::line;
          obs.line_e1_px = {j.at("obs").at(0).at(0).get<double>(),
                            j.at("obs").at(0).at(1).get<double>()};
          obs.line_e2_px = {j.at("obs").at(1).at(0).get<double>(),
                            j.at("obs").at(1).at(1).get<double>()};
        } else {
          throw DatasetFormatError("unknown feature kind: " + kind);
        }
        ds.frames[frame].observations.push_back(obs);
      } catch (const nlohmann::json::exception& e) {
        throw DatasetFormatError("correspondences.jsonl line " +
                                 std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  if (fs::exists(dir / "groundtruth.txt"))
    ds.ground_truth = read_tum(dir / "groundtruth.txt");
  if (fs::exists(dir / "mismatches.jsonl")) {
    std::ifstream f(dir / "mismatches.jsonl");
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const nlohmann::json j = nlohmann::json::parse(line);
      ds.injected_mismatches.emplace_back(j.at("frame").get<std::int64_t>(),
                                          j.at("track_id").get<std::int64_t>());
    }
  }
  return ds;
}

}  // namespace plod
