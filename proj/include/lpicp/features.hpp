#pragma once

// Edge/planar feature extraction and scan-to-map correspondence search.

#include "lpicp/core.hpp"
#include "lpicp/spatial_index.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace lpicp {

struct FeatureConfig {
  // Ring (scan-line) mode: curvature over +-half_window neighbours on the same ring.
  int curvature_half_window = 5;
  double edge_curvature = 0.01;     // c above this -> edge candidate
  double planar_curvature = 0.002;  // c below this -> planar candidate
  int sectors_per_ring = 6;
  int max_edges_per_sector = 20;
  int max_planar_per_sector = 120;  // 0 keeps every planar candidate
  double gap_ratio = 0.1;           // neighbour spacing above gap_ratio * range breaks a window

  // Unorganized mode: covariance of k-NN neighbourhoods.
  bool allow_unorganized = true;
  int unorganized_k = 10;
  double edge_variation = 0.05;    // lambda_min / trace above this -> edge
  double planar_variation = 0.01;  // below this -> planar

  // Association.
  int k_line = 5;
  double line_ratio = 3.0;
  int k_plane = 5;
  double plane_tol = 0.2;
  double plane_min_spread = 0.05;  // middle / largest covariance eigenvalue; rejects collinear sets
  double max_corr_dist = 1.0;
};

struct FeatureCloud {
  std::vector<Point3> edge_points;
  std::vector<Point3> planar_points;

  std::size_t size() const { return edge_points.size() + planar_points.size(); }
};

struct LineModel {
  Point3 anchor;
  Eigen::Vector3d direction;  // unit
};

struct PlaneModel {
  Point3 anchor;
  Eigen::Vector3d normal;  // unit
};

enum class FeatureKind { kEdge, kPlanar };

/// One matched constraint. For edges `direction` is the line direction l and
/// `distance_dir` the unit vector d from the line to the transformed point; for
/// planes `direction` is the normal n and `distance_dir` is zero.
struct Correspondence {
  FeatureKind kind = FeatureKind::kPlanar;
  Point3 point = Point3::Zero();      // scan frame
  Point3 point_map = Point3::Zero();  // map frame, at the pose used for matching
  Point3 anchor = Point3::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d distance_dir = Eigen::Vector3d::Zero();
  std::size_t source_index = 0;
};

inline Correspondence make_planar(const Point3& p, const Point3& anchor, const Eigen::Vector3d& n,
                                  const Pose6D& pose = Pose6D::identity()) {
  Correspondence c;
  c.kind = FeatureKind::kPlanar;
  c.point = p;
  c.point_map = transform_point(pose, p);
  c.anchor = anchor;
  c.direction = n.normalized();
  return c;
}

/// Unit rejection of (p_map - anchor) from the line direction, or nullopt when
/// the point lies on the line within 1e-9 m.
inline std::optional<Eigen::Vector3d> line_distance_direction(const Point3& p_map,
                                                              const Point3& anchor,
                                                              const Eigen::Vector3d& dir) {
  const Eigen::Vector3d rel = p_map - anchor;
  const Eigen::Vector3d rej = rel - rel.dot(dir) * dir;
  const double norm = rej.norm();
  if (norm < 1e-9) return std::nullopt;
  return rej / norm;
}

inline std::optional<Correspondence> make_edge(const Point3& p, const Point3& anchor,
                                               const Eigen::Vector3d& l,
                                               const Pose6D& pose = Pose6D::identity()) {
  Correspondence c;
  c.kind = FeatureKind::kEdge;
  c.point = p;
  c.point_map = transform_point(pose, p);
  c.anchor = anchor;
  c.direction = l.normalized();
  auto d = line_distance_direction(c.point_map, anchor, c.direction);
  if (!d) return std::nullopt;
  c.distance_dir = *d;
  return c;
}

namespace detail {

struct Covariance {
  Point3 centroid;
  Eigen::Vector3d values;   // ascending
  Eigen::Matrix3d vectors;  // columns match values
};

inline Covariance covariance_of(std::span<const Point3> pts) {
  Point3 mean = Point3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector3d d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  return {mean, es.eigenvalues(), es.eigenvectors()};
}

}  // namespace detail

/// Principal-direction line through the neighbours, or nullopt when the largest
/// covariance eigenvalue is below line_ratio times the second one.
inline std::optional<LineModel> fit_line(std::span<const Point3> neighbors,
                                         const FeatureConfig& cfg = {}) {
  if (neighbors.size() < static_cast<std::size_t>(cfg.k_line) || neighbors.size() < 2) {
    throw Error(ErrorCode::kTooFewPoints, "fit_line needs at least k_line points");
  }
  const auto cov = detail::covariance_of(neighbors);
  const double largest = cov.values[2];
  if (largest <= 0.0 || largest < cfg.line_ratio * cov.values[1]) return std::nullopt;
  return LineModel{cov.centroid, cov.vectors.col(2).normalized()};
}

/// Least-squares plane through the neighbours, or nullopt when any neighbour is
/// farther than plane_tol from it or the neighbours are close to collinear (the
/// normal would then be arbitrary about the line).
inline std::optional<PlaneModel> fit_plane(std::span<const Point3> neighbors,
                                           const FeatureConfig& cfg = {}) {
  if (neighbors.size() < static_cast<std::size_t>(cfg.k_plane) || neighbors.size() < 3) {
    throw Error(ErrorCode::kTooFewPoints, "fit_plane needs at least k_plane points");
  }
  const auto cov = detail::covariance_of(neighbors);
  if (!(cov.values[1] > cfg.plane_min_spread * cov.values[2])) return std::nullopt;
  const Eigen::Vector3d n = cov.vectors.col(0).normalized();
  for (const auto& p : neighbors) {
    if (std::abs(n.dot(p - cov.centroid)) > cfg.plane_tol) return std::nullopt;
  }
  return PlaneModel{cov.centroid, n};
}

namespace detail {

inline FeatureCloud extract_unorganized(const PointCloud& scan, const FeatureConfig& cfg) {
  FeatureCloud out;
  const auto k = static_cast<std::size_t>(std::max(cfg.unorganized_k, 3));
  if (scan.size() < k) return out;  // every point lacks a neighbourhood
  const SpatialIndex index(scan.points);
  std::vector<Point3> hood(k);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const auto nn = index.knn(scan.points[i], k);
    for (std::size_t j = 0; j < k; ++j) hood[j] = index.point(nn[j].index);
    const auto cov = covariance_of(hood);
    const double trace = cov.values.sum();
    const double variation = trace > 0.0 ? std::max(cov.values[0], 0.0) / trace : 0.0;
    if (variation > cfg.edge_variation) {
      out.edge_points.push_back(scan.points[i]);
    } else if (variation < cfg.planar_variation) {
      out.planar_points.push_back(scan.points[i]);
    }
  }
  return out;
}

inline void extract_ring(const std::vector<Point3>& pts, const FeatureConfig& cfg,
                         FeatureCloud& out) {
  const int w = cfg.curvature_half_window;
  const int m = static_cast<int>(pts.size());
  if (m < 2 * w + 1) return;

  std::vector<double> curvature(static_cast<std::size_t>(m), -1.0);  // -1: no valid window
  for (int i = w; i < m - w; ++i) {
    const Point3& p = pts[static_cast<std::size_t>(i)];
    const double range = p.norm();
    if (range <= 0.0) continue;
    const double gap = cfg.gap_ratio * range;
    bool valid = true;
    for (int j = i - w; j < i + w && valid; ++j) {
      valid = (pts[static_cast<std::size_t>(j + 1)] - pts[static_cast<std::size_t>(j)]).norm() <= gap;
    }
    if (!valid) continue;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (int j = i - w; j <= i + w; ++j) sum += pts[static_cast<std::size_t>(j)] - p;
    curvature[static_cast<std::size_t>(i)] = sum.norm() / (2.0 * w * range);
  }

  std::vector<char> picked(static_cast<std::size_t>(m), 0);
  const int sectors = std::max(cfg.sectors_per_ring, 1);
  const int span_len = m - 2 * w;
  for (int s = 0; s < sectors; ++s) {
    const int begin = w + span_len * s / sectors;
    const int end = w + span_len * (s + 1) / sectors;
    std::vector<int> order;
    for (int i = begin; i < end; ++i) {
      if (curvature[static_cast<std::size_t>(i)] >= 0.0) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return curvature[static_cast<std::size_t>(a)] > curvature[static_cast<std::size_t>(b)];
    });

    int edges = 0;
    for (int i : order) {
      if (edges >= cfg.max_edges_per_sector) break;
      if (curvature[static_cast<std::size_t>(i)] <= cfg.edge_curvature) break;
      if (picked[static_cast<std::size_t>(i)]) continue;
      out.edge_points.push_back(pts[static_cast<std::size_t>(i)]);
      ++edges;
      // suppress the neighbourhood so edges spread along the ring
      for (int j = std::max(i - w, 0); j <= std::min(i + w, m - 1); ++j) {
        picked[static_cast<std::size_t>(j)] = 1;
      }
      picked[static_cast<std::size_t>(i)] = 2;
    }

    std::vector<int> planar;
    for (int i = begin; i < end; ++i) {
      const double c = curvature[static_cast<std::size_t>(i)];
      if (c >= 0.0 && c < cfg.planar_curvature && picked[static_cast<std::size_t>(i)] != 2) {
        planar.push_back(i);
      }
    }
    const auto cap = static_cast<std::size_t>(cfg.max_planar_per_sector);
    if (cap == 0 || planar.size() <= cap) {
      for (int i : planar) out.planar_points.push_back(pts[static_cast<std::size_t>(i)]);
    } else {
      for (std::size_t k = 0; k < cap; ++k) {
        out.planar_points.push_back(pts[static_cast<std::size_t>(planar[k * planar.size() / cap])]);
      }
    }
  }
}

}  // namespace detail

/// Splits a scan into edge and planar feature points. Ring-organized scans use the
/// scan-line curvature c = |sum(p_j - p_i)| / (|window| |p_i|); unorganized clouds
/// classify by the surface variation of their k-NN neighbourhood.
inline FeatureCloud extract_features(const PointCloud& scan, const FeatureConfig& cfg = {}) {
  if (scan.empty()) throw Error(ErrorCode::kEmptyScan, "scan has no points");
  if (!scan.has_rings()) {
    if (!cfg.allow_unorganized) {
      throw Error(ErrorCode::kInvalidInput, "scan has no ring metadata and unorganized mode is off");
    }
    return detail::extract_unorganized(scan, cfg);
  }
  if (scan.ring.size() != scan.points.size()) {
    throw Error(ErrorCode::kInvalidInput, "ring metadata does not cover every point");
  }
  std::map<int, std::vector<Point3>> rings;
  for (std::size_t i = 0; i < scan.size(); ++i) rings[scan.ring[i]].push_back(scan.points[i]);
  FeatureCloud out;
  for (const auto& [ring, pts] : rings) detail::extract_ring(pts, cfg, out);
  return out;
}

/// Map-side search structures: edge lines are fitted against edge points and planes
/// against planar points.
struct FeatureMap {
  std::optional<SpatialIndex> edges;
  std::optional<SpatialIndex> planes;
};

inline FeatureMap build_feature_map(const FeatureCloud& map_features) {
  if (map_features.size() == 0) throw Error(ErrorCode::kEmptyMap, "map has no features");
  FeatureMap out;
  if (!map_features.edge_points.empty()) out.edges.emplace(map_features.edge_points);
  if (!map_features.planar_points.empty()) out.planes.emplace(map_features.planar_points);
  return out;
}

inline FeatureMap build_feature_map(const PointCloud& map, const FeatureConfig& cfg) {
  if (map.empty()) throw Error(ErrorCode::kEmptyMap, "map cloud is empty");
  PointCloud unorganized;
  unorganized.points = map.points;
  return build_feature_map(detail::extract_unorganized(unorganized, cfg));
}

/// Edge correspondences first (in feature order), then planar ones.
inline std::vector<Correspondence> find_correspondences(const FeatureCloud& features,
                                                        const FeatureMap& map, const Pose6D& pose,
                                                        const FeatureConfig& cfg = {}) {
  std::vector<Correspondence> out;
  out.reserve(features.size());
  const Eigen::Matrix3d r = euler_to_rotation(pose);
  const double max_sq = cfg.max_corr_dist * cfg.max_corr_dist;
  std::vector<Point3> hood;

  const auto k_line = static_cast<std::size_t>(cfg.k_line);
  if (map.edges && map.edges->size() >= k_line) {
    hood.resize(k_line);
    for (std::size_t i = 0; i < features.edge_points.size(); ++i) {
      const Point3& p = features.edge_points[i];
      const Point3 pm = r * p + pose.translation;
      const auto nn = map.edges->knn(pm, k_line);
      if (nn.front().sq_dist > max_sq) continue;
      for (std::size_t j = 0; j < k_line; ++j) hood[j] = map.edges->point(nn[j].index);
      const auto line = fit_line(hood, cfg);
      if (!line) continue;
      const auto d = line_distance_direction(pm, line->anchor, line->direction);
      if (!d) continue;
      Correspondence c;
      c.kind = FeatureKind::kEdge;
      c.point = p;
      c.point_map = pm;
      c.anchor = line->anchor;
      c.direction = line->direction;
      c.distance_dir = *d;
      c.source_index = i;
      out.push_back(c);
    }
  }

  const auto k_plane = static_cast<std::size_t>(cfg.k_plane);
  if (map.planes && map.planes->size() >= k_plane) {
    hood.resize(k_plane);
    for (std::size_t i = 0; i < features.planar_points.size(); ++i) {
      const Point3& p = features.planar_points[i];
      const Point3 pm = r * p + pose.translation;
      const auto nn = map.planes->knn(pm, k_plane);
      if (nn.front().sq_dist > max_sq) continue;
      for (std::size_t j = 0; j < k_plane; ++j) hood[j] = map.planes->point(nn[j].index);
      const auto plane = fit_plane(hood, cfg);
      if (!plane) continue;
      Correspondence c;
      c.kind = FeatureKind::kPlanar;
      c.point = p;
      c.point_map = pm;
      c.anchor = plane->anchor;
      c.direction = plane->normal;
      c.source_index = i;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace lpicp
