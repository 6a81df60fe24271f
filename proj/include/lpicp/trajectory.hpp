#pragma once

// Timestamped trajectories and absolute trajectory error.

#include "lpicp/core.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <string>
#include <vector>

namespace lpicp {

struct Trajectory {
  std::vector<double> stamps;
  std::vector<Pose6D> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }

  void push_back(double t, const Pose6D& p) {
    if (!stamps.empty() && !(t > stamps.back())) {
      throw Error(ErrorCode::kInvalidInput, "trajectory timestamps must be strictly increasing");
    }
    stamps.push_back(t);
    poses.push_back(p);
  }

  void validate() const {
    if (stamps.size() != poses.size()) {
      throw Error(ErrorCode::kInvalidInput, "stamp and pose counts differ");
    }
    for (std::size_t i = 1; i < stamps.size(); ++i) {
      if (!(stamps[i] > stamps[i - 1])) {
        throw Error(ErrorCode::kInvalidInput, "trajectory timestamps must be strictly increasing");
      }
    }
  }
};

/// Index pairs (est, gt) whose timestamps differ by at most `tolerance`, matched
/// greedily in time order.
inline std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est,
                                                                  const Trajectory& gt,
                                                                  double tolerance = 1e-6) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t j = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    while (j < gt.size() && gt.stamps[j] < est.stamps[i] - tolerance) ++j;
    if (j == gt.size()) break;
    if (std::abs(gt.stamps[j] - est.stamps[i]) <= tolerance) pairs.emplace_back(i, j++);
  }
  return pairs;
}

struct AteResult {
  double rmse = 0.0;
  Eigen::Vector3d axis_rmse = Eigen::Vector3d::Zero();  // per map-frame component
  Eigen::Isometry3d alignment = Eigen::Isometry3d::Identity();  // applied to est
  std::vector<Eigen::Vector3d> errors;  // aligned est - gt translation per pair
  std::size_t pairs = 0;
};

/// Rigidly aligns the first `align_n` associated positions of est onto gt (closed-form
/// least squares, no scale) and reports the RMSE of the translational residuals over
/// all associated pairs. align_n = 0 compares without alignment.
inline AteResult evaluate_ate(const Trajectory& est, const Trajectory& gt, std::size_t align_n,
                              double tolerance = 1e-6) {
  est.validate();
  gt.validate();
  if (align_n > est.size()) {
    throw Error(ErrorCode::kInvalidInput, "align_n exceeds estimated trajectory length");
  }
  const auto pairs = associate(est, gt, tolerance);
  if (pairs.empty()) throw Error(ErrorCode::kInvalidInput, "no associated poses");
  AteResult out;
  out.pairs = pairs.size();

  const std::size_t n_align = std::min(align_n, pairs.size());
  if (n_align > 0) {
    Eigen::Matrix3Xd src(3, static_cast<Eigen::Index>(n_align));
    Eigen::Matrix3Xd dst(3, static_cast<Eigen::Index>(n_align));
    for (std::size_t k = 0; k < n_align; ++k) {
      src.col(static_cast<Eigen::Index>(k)) = est.poses[pairs[k].first].translation;
      dst.col(static_cast<Eigen::Index>(k)) = gt.poses[pairs[k].second].translation;
    }
    if (n_align == 1) {
      out.alignment.translation() = dst.col(0) - src.col(0);
    } else {
      out.alignment.matrix() = Eigen::umeyama(src, dst, false);
    }
  }

  double sum = 0.0;
  Eigen::Vector3d axis_sum = Eigen::Vector3d::Zero();
  for (const auto& [i, j] : pairs) {
    const Eigen::Vector3d e = out.alignment * est.poses[i].translation - gt.poses[j].translation;
    out.errors.push_back(e);
    sum += e.squaredNorm();
    axis_sum += e.cwiseAbs2();
  }
  const double n = static_cast<double>(pairs.size());
  out.rmse = std::sqrt(sum / n);
  out.axis_rmse = (axis_sum / n).cwiseSqrt();
  return out;
}

inline double ate_rmse(const Trajectory& est, const Trajectory& gt, std::size_t align_n,
                       double tolerance = 1e-6) {
  return evaluate_ate(est, gt, align_n, tolerance).rmse;
}

}  // namespace lpicp
