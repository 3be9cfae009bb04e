#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "plod/depth_filter.hpp"
#include "plod/depth_registry.hpp"
#include "plod/errors.hpp"
#include "plod/line_fit3d.hpp"
#include "plod/matches.hpp"

namespace plod {

enum class EstimationMode { A, B };

struct TriangulationConfig {
  double tol_px = 2.0;           // reprojection validation gate
  double arbitrary_depth = 1.0;  // m, probe depth for invalid estimates
};

struct PipelineConfig {
  EstimationMode mode = EstimationMode::A;
  std::uint64_t seed = 0;
  bool enable_depth_estimation = true;
  int window_capacity = 8;
  double pixel_sigma_px = 1.0;  // observation noise assumed by Eq-style propagation
  SolverConfig solver;
  RansacConfig ransac;
  FilterConfig filter;
  TriangulationConfig triangulation;
  RegistryConfig registry;

  void validate() const {
    filter.validate();
    if (window_capacity < 1)
      throw SpecError("config: window_capacity must be >= 1");
    if (solver.min_depth_matches < 3)
      throw SpecError("config: min_depth_matches must be >= 3");
    if (!(solver.lambda_2d2d > 0.0))
      throw SpecError("config: lambda_2d2d must be positive");
    if (!(ransac.inlier_threshold > 0.0))
      throw SpecError("config: ransac inlier_threshold must be positive");
  }
};

namespace detail {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<std::string> allowed,
                       const std::string& scope) {
  for (const auto& item : j.items()) {
    bool found = false;
    for (const auto& k : allowed)
      if (item.key() == k) found = true;
    if (!found)
      throw DatasetFormatError("unknown config key '" + item.key() + "' in " +
                               scope);
  }
}

}  // namespace detail

inline void from_json(const nlohmann::json& j, PipelineConfig& cfg) {
  detail::check_keys(j,
                     {"mode", "seed", "enable_depth_estimation",
                      "window_capacity", "pixel_sigma_px", "solver", "ransac",
                      "filter", "triangulation", "registry"},
                     "config");
  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "A")
      cfg.mode = EstimationMode::A;
    else if (m == "B")
      cfg.mode = EstimationMode::B;
    else
      throw DatasetFormatError("config: mode must be \"A\" or \"B\"");
  }
  detail::read_key(j, "seed", &cfg.seed);
  detail::read_key(j, "enable_depth_estimation",
                   &cfg.enable_depth_estimation);
  detail::read_key(j, "window_capacity", &cfg.window_capacity);
  detail::read_key(j, "pixel_sigma_px", &cfg.pixel_sigma_px);
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::check_keys(s,
                       {"lambda_2d2d", "max_iterations", "convergence_tol",
                        "tukey_constant", "min_depth_matches",
                        "degeneracy_eigenvalue_max", "velocity_decay"},
                       "config.solver");
    detail::read_key(s, "lambda_2d2d", &cfg.solver.lambda_2d2d);
    detail::read_key(s, "max_iterations", &cfg.solver.max_iterations);
    detail::read_key(s, "convergence_tol", &cfg.solver.convergence_tol);
    detail::read_key(s, "tukey_constant", &cfg.solver.tukey_constant);
    detail::read_key(s, "min_depth_matches", &cfg.solver.min_depth_matches);
    detail::read_key(s, "degeneracy_eigenvalue_max",
                     &cfg.solver.degeneracy_eigenvalue_max);
    detail::read_key(s, "velocity_decay", &cfg.solver.velocity_decay);
  }
  if (j.contains("ransac")) {
    const auto& s = j.at("ransac");
    detail::check_keys(s,
                       {"inlier_threshold", "max_iterations", "min_inliers",
                        "confidence", "stride_px"},
                       "config.ransac");
    detail::read_key(s, "inlier_threshold", &cfg.ransac.inlier_threshold);
    detail::read_key(s, "max_iterations", &cfg.ransac.max_iterations);
    detail::read_key(s, "min_inliers", &cfg.ransac.min_inliers);
    detail::read_key(s, "confidence", &cfg.ransac.confidence);
    detail::read_key(s, "stride_px", &cfg.ransac.stride_px);
  }
  if (j.contains("filter")) {
    const auto& s = j.at("filter");
    detail::check_keys(
        s, {"init_variance_threshold", "consistency_tol_px", "rho_min"},
        "config.filter");
    detail::read_key(s, "init_variance_threshold",
                     &cfg.filter.init_variance_threshold);
    detail::read_key(s, "consistency_tol_px", &cfg.filter.consistency_tol_px);
    detail::read_key(s, "rho_min", &cfg.filter.rho_min);
  }
  if (j.contains("triangulation")) {
    const auto& s = j.at("triangulation");
    detail::check_keys(s, {"tol_px", "arbitrary_depth"},
                       "config.triangulation");
    detail::read_key(s, "tol_px", &cfg.triangulation.tol_px);
    detail::read_key(s, "arbitrary_depth", &cfg.triangulation.arbitrary_depth);
  }
  if (j.contains("registry")) {
    const auto& s = j.at("registry");
    detail::check_keys(s, {"uncertainty_max", "near_plane"},
                       "config.registry");
    detail::read_key(s, "uncertainty_max", &cfg.registry.uncertainty_max);
    detail::read_key(s, "near_plane", &cfg.registry.near_plane);
  }
  cfg.validate();
}

inline void to_json(nlohmann::json& j, const PipelineConfig& cfg) {
  j = nlohmann::json{
      {"mode", cfg.mode == EstimationMode::A ? "A" : "B"},
      {"seed", cfg.seed},
      {"enable_depth_estimation", cfg.enable_depth_estimation},
      {"window_capacity", cfg.window_capacity},
      {"pixel_sigma_px", cfg.pixel_sigma_px},
      {"solver",
       {{"lambda_2d2d", cfg.solver.lambda_2d2d},
        {"max_iterations", cfg.solver.max_iterations},
        {"convergence_tol", cfg.solver.convergence_tol},
        {"tukey_constant", cfg.solver.tukey_constant},
        {"min_depth_matches", cfg.solver.min_depth_matches},
        {"degeneracy_eigenvalue_max", cfg.solver.degeneracy_eigenvalue_max},
        {"velocity_decay", cfg.solver.velocity_decay}}},
      {"ransac",
       {{"inlier_threshold", cfg.ransac.inlier_threshold},
        {"max_iterations", cfg.ransac.max_iterations},
        {"min_inliers", cfg.ransac.min_inliers},
        {"confidence", cfg.ransac.confidence},
        {"stride_px", cfg.ransac.stride_px}}},
      {"filter",
       {{"init_variance_threshold", cfg.filter.init_variance_threshold},
        {"consistency_tol_px", cfg.filter.consistency_tol_px},
        {"rho_min", cfg.filter.rho_min}}},
      {"triangulation",
       {{"tol_px", cfg.triangulation.tol_px},
        {"arbitrary_depth", cfg.triangulation.arbitrary_depth}}},
      {"registry",
       {{"uncertainty_max", cfg.registry.uncertainty_max},
        {"near_plane", cfg.registry.near_plane}}}};
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DatasetFormatError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetFormatError("config parse error: " + std::string(e.what()));
  }
  PipelineConfig cfg;
  from_json(j, cfg);
  return cfg;
}

inline void save_config(const PipelineConfig& cfg,
                        const std::filesystem::path& path) {
  nlohmann::json j;
  to_json(j, cfg);
  std::ofstream f(path);
  if (!f) throw DatasetFormatError("cannot open for writing: " + path.string());
  f << j.dump(2) << "\n";
}

}  // namespace plod
