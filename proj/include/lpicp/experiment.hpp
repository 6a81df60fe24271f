#pragma once

// Trajectory experiments on synthetic scenes: simulate a scan at every ground-truth
// pose, predict an initial estimate from the previous result, register, and collect
// per-scan results and trajectory error.

#include "lpicp/core.hpp"
#include "lpicp/features.hpp"
#include "lpicp/optimizer.hpp"
#include "lpicp/scene.hpp"
#include "lpicp/trajectory.hpp"

#include <chrono>
#include <optional>
#include <vector>

namespace lpicp {

/// Corrupts the predicted initial estimate to emulate a degraded odometry prior:
/// x0 = prediction + bias + noise * N(0, 1), per state component.
struct PriorModel {
  Vector6d bias = Vector6d::Zero();
  Vector6d noise = Vector6d::Zero();
  std::uint64_t seed = 7;
  // Predict with the last estimated motion instead of the ground-truth increment.
  bool constant_velocity = false;
};

/// Feature settings for noise-free synthetic maps. The generic defaults accept
/// neighbourhoods that straddle a crease and grazing-angle range jumps as edges;
/// exact geometry allows much tighter plane checks.
inline FeatureConfig synthetic_scene_features() {
  FeatureConfig f;
  f.k_plane = 8;
  f.plane_tol = 0.02;
  f.planar_variation = 0.005;
  f.max_planar_per_sector = 20;
  f.gap_ratio = 0.02;
  return f;
}

inline RegistrationConfig synthetic_registration_config() {
  RegistrationConfig r;
  r.features = synthetic_scene_features();
  return r;
}

struct ExperimentConfig {
  RegistrationConfig registration = synthetic_registration_config();
  SensorModel sensor;
  PriorModel prior;
  std::size_t align_n = 0;
};

struct ScanRecord {
  std::size_t index = 0;
  double stamp = 0.0;
  Pose6D ground_truth;
  Pose6D x0;
  Pose6D estimate;
  std::size_t scan_points = 0;
  std::size_t edge_features = 0;
  std::size_t planar_features = 0;
  RegistrationResult result;
  std::optional<ErrorCode> failure;
  std::string message;
  double seconds = 0.0;  // wall time of feature extraction + registration, not emitted
};

struct ExperimentReport {
  Method method = Method::kLpIcp;
  std::vector<ScanRecord> scans;
  Trajectory estimate;
  Trajectory ground_truth;
  std::optional<AteResult> ate;

  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& s : scans) n += s.failure ? 1 : 0;
    return n;
  }
};

/// Per-direction categories of one scan: detection categories for the
/// localizability methods, eigenvalue flags (None/Full) for the remapping baseline,
/// nullopt for plain Gauss-Newton.
inline std::optional<Categories> scan_categories(const ScanRecord& s) {
  return detail::categories_of(s.result);
}

inline ExperimentReport run_trajectory(const Scene& scene, const FeatureMap& map,
                                       const Trajectory& gt, const ExperimentConfig& cfg) {
  gt.validate();
  ExperimentReport report;
  report.method = cfg.registration.method;
  report.ground_truth = gt;
  Rng rng(cfg.prior.seed);

  for (std::size_t k = 0; k < gt.size(); ++k) {
    ScanRecord rec;
    rec.index = k;
    rec.stamp = gt.stamps[k];
    rec.ground_truth = gt.poses[k];

    Pose6D predicted = gt.poses[0];
    if (k > 0) {
      const Pose6D& prev = report.estimate.poses[k - 1];
      Pose6D motion = compose(invert(gt.poses[k - 1]), gt.poses[k]);
      if (cfg.prior.constant_velocity && k > 1) {
        motion = compose(invert(report.estimate.poses[k - 2]), prev);
      }
      predicted = compose(prev, motion);
    }
    Vector6d x0 = predicted.vector() + cfg.prior.bias;
    for (int i = 0; i < 6; ++i) {
      if (cfg.prior.noise[i] > 0.0) x0[i] += cfg.prior.noise[i] * rng.normal();
    }
    rec.x0 = Pose6D::from_vector(x0);
    rec.estimate = rec.x0;

    SensorModel sensor = cfg.sensor;
    sensor.seed = cfg.sensor.seed + k;
    const PointCloud scan = simulate_scan(scene, gt.poses[k], sensor);
    rec.scan_points = scan.size();

    const auto start = std::chrono::steady_clock::now();
    try {
      const FeatureCloud features = extract_features(scan, cfg.registration.features);
      rec.edge_features = features.edge_points.size();
      rec.planar_features = features.planar_points.size();
      rec.result = register_scan(features, map, rec.x0, cfg.registration);
      rec.failure = rec.result.failure;
      rec.message = rec.result.message;
      rec.estimate = rec.result.pose;
    } catch (const Error& e) {
      rec.failure = e.code();
      rec.message = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.estimate.push_back(rec.stamp, rec.estimate);
    report.scans.push_back(std::move(rec));
  }
  if (!gt.empty()) report.ate = evaluate_ate(report.estimate, gt, cfg.align_n);
  return report;
}

inline ExperimentReport run_trajectory(const Scene& scene, const Trajectory& gt,
                                       const ExperimentConfig& cfg) {
  const FeatureMap map = build_feature_map(scene.map, cfg.registration.features);
  return run_trajectory(scene, map, gt, cfg);
}

/// Straight-line ground truth from `start` to `end` with `n` poses at unit time steps.
inline Trajectory straight_trajectory(const Pose6D& start, const Pose6D& end, std::size_t n) {
  Trajectory t;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    t.push_back(static_cast<double>(i),
                Pose6D::from_vector((1.0 - s) * start.vector() + s * end.vector()));
  }
  return t;
}

}  // namespace lpicp
