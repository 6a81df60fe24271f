#pragma once

// Point-to-line and point-to-plane residuals with analytic Jacobians.
//
// Euler Jacobians follow R = Rz(yaw) Ry(pitch) Rx(roll). In the expanded
// products below, (sa, ca) are sin/cos of yaw, (sb, cb) of pitch and (sg, cg) of
// roll; the three components are the derivatives with respect to the rotations
// about x, y and z, matching the state order (roll, pitch, yaw). The z component
// carries no w_z term because the third row of R does not depend on yaw.

#include "lpicp/core.hpp"
#include "lpicp/features.hpp"

#include <span>
#include <vector>

namespace lpicp {

enum class JacobianType { kEuler, kLie };

struct ResidualEval {
  FeatureKind kind = FeatureKind::kPlanar;
  double value = 0.0;
  Eigen::RowVector3d jac_rot = Eigen::RowVector3d::Zero();    // d f / d(roll, pitch, yaw)
  Eigen::RowVector3d jac_trans = Eigen::RowVector3d::Zero();  // d f / d t

  RowVector6d jacobian() const {
    RowVector6d j;
    j << jac_rot, jac_trans;
    return j;
  }
};

inline double residual_line(const Pose6D& pose, const Correspondence& c) {
  return (transform_point(pose, c.point) - c.anchor).cross(c.direction).norm();
}

inline double residual_plane(const Pose6D& pose, const Correspondence& c) {
  return (transform_point(pose, c.point) - c.anchor).dot(c.direction);
}

inline double residual(const Pose6D& pose, const Correspondence& c) {
  return c.kind == FeatureKind::kEdge ? residual_line(pose, c) : residual_plane(pose, c);
}

inline Eigen::RowVector3d jacobian_line_translation(const Correspondence& c) {
  return c.distance_dir.transpose();
}

inline Eigen::RowVector3d jacobian_plane_translation(const Correspondence& c) {
  return c.direction.transpose();
}

/// w^T d(R p)/d(roll, pitch, yaw) for a map-frame weight vector w (d or n).
inline Eigen::RowVector3d euler_rotation_jacobian(const Eigen::Vector3d& rpy, const Point3& p,
                                                  const Eigen::Vector3d& w) {
  const double sg = std::sin(rpy.x()), cg = std::cos(rpy.x());
  const double sb = std::sin(rpy.y()), cb = std::cos(rpy.y());
  const double sa = std::sin(rpy.z()), ca = std::cos(rpy.z());
  const double px = p.x(), py = p.y(), pz = p.z();
  const double wx = w.x(), wy = w.y(), wz = w.z();

  const double jx = ((sa * sg + ca * sb * cg) * py + (sa * cg - ca * sb * sg) * pz) * wx +
                    ((-ca * sg + sa * sb * cg) * py + (-ca * cg - sa * sb * sg) * pz) * wy +
                    (cb * cg * py - cb * sg * pz) * wz;
  const double jy = (-ca * sb * px + (ca * cb * sg) * py + (ca * cb * cg) * pz) * wx +
                    (-sa * sb * px + (sa * cb * sg) * py + (sa * cb * cg) * pz) * wy +
                    (-cb * px - sb * sg * py - sb * cg * pz) * wz;
  const double jz = (-sa * cb * px + (-ca * cg - sa * sb * sg) * py +
                     (ca * sg - sa * sb * cg) * pz) * wx +
                    (ca * cb * px + (-sa * cg + ca * sb * sg) * py +
                     (sa * sg + ca * sb * cg) * pz) * wy;
  return {jx, jy, jz};
}

inline Eigen::RowVector3d jacobian_line_rotation_euler(const Pose6D& pose, const Correspondence& c) {
  return euler_rotation_jacobian(pose.rotation, c.point, c.distance_dir);
}

inline Eigen::RowVector3d jacobian_plane_rotation_euler(const Pose6D& pose, const Correspondence& c) {
  return euler_rotation_jacobian(pose.rotation, c.point, c.direction);
}

/// (p^L x w^L)^T with w^L = R^T w^M: the derivative under a right perturbation
/// R exp([delta]x).
inline Eigen::RowVector3d lie_rotation_jacobian(const Pose6D& pose, const Point3& p,
                                                const Eigen::Vector3d& w_map) {
  const Eigen::Vector3d w_scan = euler_to_rotation(pose).transpose() * w_map;
  return p.cross(w_scan).transpose();
}

inline Eigen::RowVector3d jacobian_line_rotation_lie(const Pose6D& pose, const Correspondence& c) {
  return lie_rotation_jacobian(pose, c.point, c.distance_dir);
}

inline Eigen::RowVector3d jacobian_plane_rotation_lie(const Pose6D& pose, const Correspondence& c) {
  return lie_rotation_jacobian(pose, c.point, c.direction);
}

/// Scales rows longer than 1 to unit length; shorter rows are returned unchanged.
inline Eigen::RowVector3d normalize_rotation_jacobian(const Eigen::RowVector3d& j) {
  const double n = j.norm();
  return n > 1.0 ? Eigen::RowVector3d(j / n) : j;
}

/// Re-evaluates an edge correspondence's point and distance direction at a new
/// pose. Returns false when the point falls onto its line.
inline bool refresh(Correspondence& c, const Pose6D& pose) {
  c.point_map = transform_point(pose, c.point);
  if (c.kind != FeatureKind::kEdge) return true;
  auto d = line_distance_direction(c.point_map, c.anchor, c.direction);
  if (!d) return false;
  c.distance_dir = *d;
  return true;
}

/// Residual value and Jacobian rows of one correspondence at `pose`. Edge
/// distance directions are recomputed from the pose; an edge point lying exactly on
/// its line yields a zero row.
inline ResidualEval evaluate(const Pose6D& pose, const Correspondence& corr,
                             JacobianType type = JacobianType::kEuler) {
  Correspondence c = corr;
  ResidualEval e;
  e.kind = c.kind;
  if (!refresh(c, pose)) return e;
  const Eigen::Vector3d& w = c.kind == FeatureKind::kEdge ? c.distance_dir : c.direction;
  e.value = c.kind == FeatureKind::kEdge ? (c.point_map - c.anchor).cross(c.direction).norm()
                                         : (c.point_map - c.anchor).dot(c.direction);
  e.jac_trans = w.transpose();
  e.jac_rot = type == JacobianType::kEuler ? euler_rotation_jacobian(pose.rotation, c.point, w)
                                           : lie_rotation_jacobian(pose, c.point, w);
  return e;
}

inline std::vector<ResidualEval> evaluate_all(const Pose6D& pose,
                                              std::span<const Correspondence> corrs,
                                              JacobianType type = JacobianType::kEuler) {
  std::vector<ResidualEval> out;
  out.reserve(corrs.size());
  for (const auto& c : corrs) out.push_back(evaluate(pose, c, type));
  return out;
}

inline double sum_squared_residuals(const Pose6D& pose, std::span<const Correspondence> corrs) {
  double sum = 0.0;
  for (const auto& c : corrs) {
    const double f = residual(pose, c);
    sum += f * f;
  }
  return sum;
}

}  // namespace lpicp
