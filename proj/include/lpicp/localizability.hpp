#pragma once

// Localizability detection: rotation/translation Hessian blocks, their eigenbases,
// per-correspondence contributions along each eigenvector, noise filtering and
// the Full/Partial/None categorization. Also hosts the eigenvalue-threshold
// degeneracy baseline on the full 6x6 Hessian.

#include "lpicp/core.hpp"
#include "lpicp/residuals.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace lpicp {

enum class Category { kNone = 0, kPartial = 1, kFull = 2 };

inline const char* to_string(Category c) {
  switch (c) {
    case Category::kNone: return "None";
    case Category::kPartial: return "Partial";
    case Category::kFull: return "Full";
  }
  return "None";
}

enum class ContributionMetric { kSquared, kAbsolute };

/// Thresholds for one contribution metric. Defaults are for the squared metric.
struct DetectionConfig {
  double h_f = 0.03;
  double h_u = 0.4998;
  double t1 = 50.0;
  double t2 = 30.0;
  double t3 = 15.0;
  double t4 = 9.0;
  ContributionMetric metric = ContributionMetric::kSquared;
  JacobianType jacobian = JacobianType::kEuler;
  bool normalize_rotation = true;

  /// Absolute-metric defaults: contribution cut-offs at the square roots of the
  /// squared-metric ones so the same correspondences pass each filter.
  static DetectionConfig absolute_defaults() {
    DetectionConfig cfg;
    cfg.metric = ContributionMetric::kAbsolute;
    cfg.h_f = std::sqrt(0.03);
    cfg.h_u = std::sqrt(0.4998);
    return cfg;
  }

  void validate() const {
    if (!(0.0 <= h_f && h_f <= h_u)) throw Error(ErrorCode::kConfig, "require 0 <= h_f <= h_u");
    if (!(t3 <= t1)) throw Error(ErrorCode::kConfig, "require T3 <= T1");
    if (!(t4 <= t2)) throw Error(ErrorCode::kConfig, "require T4 <= T2");
  }
};

using ContributionMatrix = Eigen::Matrix<double, Eigen::Dynamic, 6>;
using Categories = std::array<Category, 6>;
using DirectionIndex = std::array<std::vector<std::size_t>, 6>;

struct SymmetricEigen3 {
  Eigen::Vector3d values;   // descending
  Eigen::Matrix3d vectors;  // columns, largest-magnitude component positive
};

/// Eigen-decomposition of a symmetric 3x3 matrix, eigenvalues sorted descending and
/// eigenvector signs canonicalized.
inline SymmetricEigen3 eigendecompose(const Eigen::Matrix3d& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(h);
  SymmetricEigen3 out;
  for (int j = 0; j < 3; ++j) {
    out.values[j] = es.eigenvalues()[2 - j];
    Eigen::Vector3d v = es.eigenvectors().col(2 - j);
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    if (v[k] < 0.0) v = -v;
    out.vectors.col(j) = v;
  }
  return out;
}

struct HessianBlocks {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d translation = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d coupling = Eigen::Matrix3d::Zero();  // diagnostic only
};

inline Eigen::RowVector3d detection_rotation_row(const ResidualEval& e, bool normalize) {
  return normalize ? normalize_rotation_jacobian(e.jac_rot) : e.jac_rot;
}

inline HessianBlocks build_hessian_blocks(std::span<const ResidualEval> evals,
                                          bool normalize_rotation = true) {
  if (evals.empty()) throw Error(ErrorCode::kEmptyConstraintSet, "no residuals to analyse");
  HessianBlocks h;
  for (const auto& e : evals) {
    const Eigen::RowVector3d jr = detection_rotation_row(e, normalize_rotation);
    h.rotation.noalias() += jr.transpose() * jr;
    h.translation.noalias() += e.jac_trans.transpose() * e.jac_trans;
    h.coupling.noalias() += jr.transpose() * e.jac_trans;
  }
  return h;
}

struct EigenBasis {
  SymmetricEigen3 rotation;
  SymmetricEigen3 translation;

  /// Direction j in 0..5 ordered (v_r1, v_r2, v_r3, v_t1, v_t2, v_t3).
  Eigen::Vector3d direction(int j) const {
    return j < 3 ? rotation.vectors.col(j) : translation.vectors.col(j - 3);
  }
  Vector6d eigenvalues() const {
    Vector6d v;
    v << rotation.values, translation.values;
    return v;
  }
};

inline double project(const Eigen::RowVector3d& j, const Eigen::Vector3d& v,
                      ContributionMetric metric) {
  const double s = j.dot(v.transpose());
  return metric == ContributionMetric::kSquared ? s * s : std::abs(s);
}

/// Contributions of one correspondence along the six eigen-directions.
inline RowVector6d contribution_vector(const ResidualEval& e, const EigenBasis& basis,
                                       ContributionMetric metric = ContributionMetric::kSquared,
                                       bool normalize_rotation = true) {
  const Eigen::RowVector3d jr = detection_rotation_row(e, normalize_rotation);
  RowVector6d f;
  for (int j = 0; j < 3; ++j) {
    f[j] = project(jr, basis.rotation.vectors.col(j), metric);
    f[j + 3] = project(e.jac_trans, basis.translation.vectors.col(j), metric);
  }
  return f;
}

struct FilteredContributions {
  ContributionMatrix moderate;  // entries >= h_f, others zeroed
  ContributionMatrix high;      // entries >= h_u, others zeroed
  Vector6d l_f = Vector6d::Zero();
  Vector6d l_u = Vector6d::Zero();
  DirectionIndex moderate_idx;
  DirectionIndex high_idx;
};

inline FilteredContributions filter_and_aggregate(const ContributionMatrix& f,
                                                  const DetectionConfig& cfg) {
  FilteredContributions out;
  const Eigen::Index n = f.rows();
  out.moderate = ContributionMatrix::Zero(n, 6);
  out.high = ContributionMatrix::Zero(n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < 6; ++j) {
      const double v = f(i, j);
      if (v >= cfg.h_f) {
        out.moderate(i, j) = v;
        out.l_f[j] += v;
        out.moderate_idx[static_cast<std::size_t>(j)].push_back(static_cast<std::size_t>(i));
      }
      if (v >= cfg.h_u) {
        out.high(i, j) = v;
        out.l_u[j] += v;
        out.high_idx[static_cast<std::size_t>(j)].push_back(static_cast<std::size_t>(i));
      }
    }
  }
  return out;
}

inline Category categorize_direction(double l_f, double l_u, const DetectionConfig& cfg) {
  if (l_f >= cfg.t1 || l_u >= cfg.t2) return Category::kFull;
  if (l_f >= cfg.t3 && l_u >= cfg.t4) return Category::kPartial;
  return Category::kNone;
}

inline Categories categorize(const Vector6d& l_f, const Vector6d& l_u, const DetectionConfig& cfg) {
  Categories out{};
  for (int j = 0; j < 6; ++j) out[static_cast<std::size_t>(j)] = categorize_direction(l_f[j], l_u[j], cfg);
  return out;
}

struct LocalizabilityReport {
  EigenBasis basis;
  Vector6d l_f = Vector6d::Zero();
  Vector6d l_u = Vector6d::Zero();
  Vector6d l_f_edge = Vector6d::Zero();  // share of l_f from point-to-line rows
  Vector6d l_u_edge = Vector6d::Zero();
  Categories categories{};
  DirectionIndex moderate_idx;
  DirectionIndex high_idx;
  DetectionConfig thresholds;
  double coupling_norm = 0.0;
  std::size_t num_edge = 0;
  std::size_t num_planar = 0;
};

/// Runs the full detection chain on one batch of residual evaluations.
inline LocalizabilityReport detect(std::span<const ResidualEval> evals,
                                   const DetectionConfig& cfg = {}) {
  cfg.validate();
  const HessianBlocks blocks = build_hessian_blocks(evals, cfg.normalize_rotation);
  LocalizabilityReport rep;
  rep.thresholds = cfg;
  rep.basis.rotation = eigendecompose(blocks.rotation);
  rep.basis.translation = eigendecompose(blocks.translation);
  rep.coupling_norm = blocks.coupling.norm();

  ContributionMatrix f(static_cast<Eigen::Index>(evals.size()), 6);
  for (std::size_t i = 0; i < evals.size(); ++i) {
    f.row(static_cast<Eigen::Index>(i)) =
        contribution_vector(evals[i], rep.basis, cfg.metric, cfg.normalize_rotation);
    (evals[i].kind == FeatureKind::kEdge ? rep.num_edge : rep.num_planar) += 1;
  }
  FilteredContributions filtered = filter_and_aggregate(f, cfg);
  for (std::size_t i = 0; i < evals.size(); ++i) {
    if (evals[i].kind != FeatureKind::kEdge) continue;
    rep.l_f_edge += filtered.moderate.row(static_cast<Eigen::Index>(i)).transpose();
    rep.l_u_edge += filtered.high.row(static_cast<Eigen::Index>(i)).transpose();
  }
  rep.l_f = filtered.l_f;
  rep.l_u = filtered.l_u;
  rep.moderate_idx = std::move(filtered.moderate_idx);
  rep.high_idx = std::move(filtered.high_idx);
  rep.categories = categorize(rep.l_f, rep.l_u, cfg);
  return rep;
}

/// Eigenvalue-threshold degeneracy test on the full 6x6 Hessian.
struct DegeneracyResult {
  Vector6d eigenvalues = Vector6d::Zero();           // descending
  Matrix6d eigenvectors = Matrix6d::Identity();      // columns
  std::array<bool, 6> degenerate{};

  int count() const {
    int n = 0;
    for (bool d : degenerate) n += d ? 1 : 0;
    return n;
  }
};

inline DegeneracyResult zhang_degeneracy(const Matrix6d& h, double threshold = 50.0) {
  Eigen::SelfAdjointEigenSolver<Matrix6d> es(h);
  DegeneracyResult out;
  for (int j = 0; j < 6; ++j) {
    out.eigenvalues[j] = es.eigenvalues()[5 - j];
    Vector6d v = es.eigenvectors().col(5 - j);
    Eigen::Index k = 0;
    v.cwiseAbs().maxCoeff(&k);
    if (v[k] < 0.0) v = -v;
    out.eigenvectors.col(j) = v;
    out.degenerate[static_cast<std::size_t>(j)] = out.eigenvalues[j] < threshold;
  }
  return out;
}

inline Matrix6d full_hessian(std::span<const ResidualEval> evals) {
  Matrix6d h = Matrix6d::Zero();
  for (const auto& e : evals) {
    const RowVector6d j = e.jacobian();
    h.noalias() += j.transpose() * j;
  }
  return h;
}

}  // namespace lpicp
