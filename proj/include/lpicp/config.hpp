#pragma once

// Flat key/value configuration files (YAML syntax). Every key maps onto one field
// of the detection, solver, feature, sensor, prior or scene settings; unknown keys
// are rejected so typos do not silently fall back to defaults.

#include "lpicp/experiment.hpp"
#include "lpicp/scene.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <functional>
#include <map>
#include <string>

namespace lpicp::config {

namespace detail {

using Setter = std::function<void(const YAML::Node&)>;

template <class T>
Setter bind(T& field) {
  return [&field](const YAML::Node& n) { field = n.as<T>(); };
}

inline Setter bind_vec6(Vector6d& field) {
  return [&field](const YAML::Node& n) {
    if (!n.IsSequence() || n.size() != 6) throw Error(ErrorCode::kConfig, "expected a list of 6 numbers");
    for (std::size_t i = 0; i < 6; ++i) field[static_cast<Eigen::Index>(i)] = n[i].as<double>();
  };
}

inline Setter bind_metric(ContributionMetric& field) {
  return [&field](const YAML::Node& n) {
    const auto s = n.as<std::string>();
    if (s == "squared") field = ContributionMetric::kSquared;
    else if (s == "absolute") field = ContributionMetric::kAbsolute;
    else throw Error(ErrorCode::kConfig, "metric must be squared or absolute");
  };
}

inline Setter bind_jacobian(JacobianType& field) {
  return [&field](const YAML::Node& n) {
    const auto s = n.as<std::string>();
    if (s == "euler") field = JacobianType::kEuler;
    else if (s == "lie") field = JacobianType::kLie;
    else throw Error(ErrorCode::kConfig, "jacobian must be euler or lie");
  };
}

inline void apply(const YAML::Node& root, const std::map<std::string, Setter>& setters,
                  const std::string& source) {
  if (!root || root.IsNull()) return;
  if (!root.IsMap()) throw Error(ErrorCode::kConfig, source + ": expected key: value pairs");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorCode::kConfig, source + ": unknown key '" + key + "'");
    try {
      it->second(kv.second);
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::kConfig, source + ": bad value for '" + key + "': " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, source + ": bad value for '" + key + "': " + e.what());
    }
  }
}

inline YAML::Node load(const std::filesystem::path& path) {
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline std::map<std::string, detail::Setter> experiment_keys(ExperimentConfig& c) {
  using detail::bind;
  auto& d = c.registration.detection;
  auto& a = c.registration.detection_absolute;
  auto& s = c.registration.solver;
  auto& f = c.registration.features;
  auto& sn = c.sensor;
  return {
      {"method", [&c](const YAML::Node& n) { c.registration.method = parse_method(n.as<std::string>()); }},
      {"zhang_threshold", bind(c.registration.zhang_threshold)},
      {"h_f", bind(d.h_f)}, {"h_u", bind(d.h_u)},
      {"t1", bind(d.t1)}, {"t2", bind(d.t2)}, {"t3", bind(d.t3)}, {"t4", bind(d.t4)},
      {"metric", detail::bind_metric(d.metric)},
      {"jacobian", [&d, &a](const YAML::Node& n) {
         detail::bind_jacobian(d.jacobian)(n);
         a.jacobian = d.jacobian;
       }},
      {"normalize_rotation", [&d, &a](const YAML::Node& n) {
         d.normalize_rotation = a.normalize_rotation = n.as<bool>();
       }},
      {"absolute_h_f", bind(a.h_f)}, {"absolute_h_u", bind(a.h_u)},
      {"absolute_t1", bind(a.t1)}, {"absolute_t2", bind(a.t2)},
      {"absolute_t3", bind(a.t3)}, {"absolute_t4", bind(a.t4)},
      {"mu_low", bind(s.mu_low)}, {"mu_high", bind(s.mu_high)}, {"t5", bind(s.t5)},
      {"max_outer_iters", bind(s.max_outer_iters)},
      {"step_tol_rot", bind(s.step_tol_rot)}, {"step_tol_trans", bind(s.step_tol_trans)},
      {"local_icp_iters", bind(s.local_icp_iters)}, {"local_rank_tol", bind(s.local_rank_tol)},
      {"cond_guard", bind(s.cond_guard)}, {"max_backtracks", bind(s.max_backtracks)},
      {"detect_every_iteration", bind(s.detect_every_iteration)},
      {"curvature_half_window", bind(f.curvature_half_window)},
      {"edge_curvature", bind(f.edge_curvature)}, {"planar_curvature", bind(f.planar_curvature)},
      {"sectors_per_ring", bind(f.sectors_per_ring)},
      {"max_edges_per_sector", bind(f.max_edges_per_sector)},
      {"max_planar_per_sector", bind(f.max_planar_per_sector)},
      {"gap_ratio", bind(f.gap_ratio)},
      {"allow_unorganized", bind(f.allow_unorganized)}, {"unorganized_k", bind(f.unorganized_k)},
      {"edge_variation", bind(f.edge_variation)}, {"planar_variation", bind(f.planar_variation)},
      {"k_line", bind(f.k_line)}, {"line_ratio", bind(f.line_ratio)},
      {"k_plane", bind(f.k_plane)}, {"plane_tol", bind(f.plane_tol)},
      {"plane_min_spread", bind(f.plane_min_spread)},
      {"max_corr_dist", bind(f.max_corr_dist)},
      {"sensor_rings", bind(sn.rings)},
      {"sensor_vfov_min_deg", bind(sn.vfov_min_deg)}, {"sensor_vfov_max_deg", bind(sn.vfov_max_deg)},
      {"sensor_h_res_deg", bind(sn.h_res_deg)},
      {"sensor_min_range", bind(sn.min_range)}, {"sensor_max_range", bind(sn.max_range)},
      {"sensor_range_sigma", bind(sn.range_sigma)}, {"sensor_seed", bind(sn.seed)},
      {"prior_bias", detail::bind_vec6(c.prior.bias)},
      {"prior_noise", detail::bind_vec6(c.prior.noise)},
      {"prior_seed", bind(c.prior.seed)},
      {"constant_velocity", bind(c.prior.constant_velocity)},
      {"align_n", bind(c.align_n)},
  };
}

inline std::map<std::string, detail::Setter> scene_keys(SceneSpec& s) {
  using detail::bind;
  return {
      {"kind", [&s](const YAML::Node& n) { s.kind = parse_scene_kind(n.as<std::string>()); }},
      {"length", bind(s.length)}, {"width", bind(s.width)}, {"height", bind(s.height)},
      {"density", bind(s.density)}, {"sigma", bind(s.sigma)}, {"seed", bind(s.seed)},
      {"terrain_wavelength", bind(s.terrain_wavelength)},
  };
}

inline void validate(const ExperimentConfig& c) {
  c.registration.detection.validate();
  c.registration.detection_absolute.validate();
  c.registration.solver.validate();
  c.sensor.validate();
}

/// Overlays the keys found in `text` on `base`.
inline ExperimentConfig parse_experiment(const std::string& text, ExperimentConfig base = {},
                                         const std::string& source = "config") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfig, source + ": " + e.what());
  }
  detail::apply(root, experiment_keys(base), source);
  validate(base);
  return base;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path, ExperimentConfig base = {}) {
  detail::apply(detail::load(path), experiment_keys(base), path.string());
  validate(base);
  return base;
}

inline SceneSpec parse_scene(const std::string& text, SceneSpec base = {},
                             const std::string& source = "scene") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfig, source + ": " + e.what());
  }
  detail::apply(root, scene_keys(base), source);
  base.validate();
  return base;
}

inline SceneSpec load_scene(const std::filesystem::path& path, SceneSpec base = {}) {
  detail::apply(detail::load(path), scene_keys(base), path.string());
  base.validate();
  return base;
}

}  // namespace lpicp::config
