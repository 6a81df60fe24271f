#pragma once

// Constrained Gauss-Newton registration. Directions categorized Partial receive a
// weighted soft constraint toward a target obtained from a small block-restricted
// ICP over their moderate contributors; None directions are held fixed with
// equality constraints solved through the Lagrangian (KKT) system.

#include "lpicp/core.hpp"
#include "lpicp/features.hpp"
#include "lpicp/localizability.hpp"
#include "lpicp/residuals.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lpicp {

struct SolverConfig {
  double mu_low = 2.0;
  double mu_high = 5.0;
  double t5 = 15.0;
  int max_outer_iters = 30;
  double step_tol_rot = 1e-4;    // rad
  double step_tol_trans = 1e-4;  // m
  int local_icp_iters = 10;
  double local_rank_tol = 1e-8;  // stiffness along v_j relative to trace of the block Hessian
  double cond_guard = 1e10;
  int max_backtracks = 10;
  bool detect_every_iteration = false;

  void validate() const {
    if (!(mu_low <= mu_high)) throw Error(ErrorCode::kConfig, "require mu_low <= mu_high");
    if (!(step_tol_rot > 0.0 && step_tol_trans > 0.0)) {
      throw Error(ErrorCode::kConfig, "step tolerances must be positive");
    }
    if (max_outer_iters < 1) throw Error(ErrorCode::kConfig, "max_outer_iters must be >= 1");
  }
};

enum class Block { kRotation, kTranslation };

inline Vector6d lift(const Eigen::Vector3d& v, Block block) {
  Vector6d out = Vector6d::Zero();
  (block == Block::kRotation ? out.head<3>() : out.tail<3>()) = v;
  return out;
}

inline Vector6d lift_value(const Eigen::Vector3d& dx0, Block block) { return lift(dx0, block); }

inline Block block_of_direction(int j) { return j < 3 ? Block::kRotation : Block::kTranslation; }

struct LocalIcpResult {
  Eigen::Vector3d update = Eigen::Vector3d::Zero();
  bool rank_deficient = false;
  int iterations = 0;
};

/// Gauss-Newton over a single 3-DOF block (rotation or translation) of the pose,
/// starting from a zero update. Each step is the minimum-norm solution of the
/// block normal equations, so directions the subset does not observe stay at zero.
/// When `direction` is given and the subset carries no stiffness along it, the
/// result is flagged rank deficient and the update is zero.
inline LocalIcpResult local_icp(std::span<const Correspondence> subset, const Pose6D& pose,
                                Block block, const SolverConfig& cfg = {},
                                std::optional<Eigen::Vector3d> direction = std::nullopt) {
  LocalIcpResult out;
  if (subset.empty()) {
    out.rank_deficient = true;
    return out;
  }
  Pose6D current = pose;
  for (int it = 0; it < cfg.local_icp_iters; ++it) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (const auto& c : subset) {
      const ResidualEval e = evaluate(current, c);
      const Eigen::RowVector3d j = block == Block::kRotation ? e.jac_rot : e.jac_trans;
      h.noalias() += j.transpose() * j;
      g.noalias() -= j.transpose() * e.value;
    }
    if (it == 0 && direction) {
      const double trace = h.trace();
      if (!(trace > 0.0) || direction->dot(h * *direction) <= cfg.local_rank_tol * trace) {
        out.rank_deficient = true;
        return out;
      }
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix3d> cod;
    cod.setThreshold(1e-10);
    cod.compute(h);
    const Eigen::Vector3d step = cod.solve(g);
    out.update += step;
    (block == Block::kRotation ? current.rotation : current.translation) += step;
    out.iterations = it + 1;
    if (step.norm() < 1e-12) break;
  }
  return out;
}

/// mu * (v'^T dx - v'^T target)^2 on the cumulative update dx.
struct SoftConstraint {
  Vector6d direction = Vector6d::Zero();
  Vector6d target = Vector6d::Zero();
  double mu = 0.0;
  int source_direction = -1;  // 0..5, or -1 when not tied to a detection direction
};

using HardConstraintMatrix = Eigen::Matrix<double, Eigen::Dynamic, 6>;

struct ConstraintSet {
  std::vector<SoftConstraint> soft;
  HardConstraintMatrix hard = HardConstraintMatrix(0, 6);
  std::vector<int> hard_sources;  // detection direction per row, -1 for promoted rows
  std::vector<std::string> log;

  int k_n() const { return static_cast<int>(hard.rows()); }
  int k_p() const { return static_cast<int>(soft.size()); }

  void add_hard(const Vector6d& row, int source) {
    hard.conservativeResize(hard.rows() + 1, Eigen::NoChange);
    hard.row(hard.rows() - 1) = row.transpose();
    hard_sources.push_back(source);
  }
};

inline ConstraintSet assemble_constraints(const LocalizabilityReport& report,
                                          std::span<const Correspondence> correspondences,
                                          const Pose6D& pose, const SolverConfig& cfg = {}) {
  ConstraintSet out;
  for (int j = 0; j < 6; ++j) {
    const auto cat = report.categories[static_cast<std::size_t>(j)];
    if (cat == Category::kFull) continue;
    const Block block = block_of_direction(j);
    const Eigen::Vector3d v = report.basis.direction(j);
    if (cat == Category::kNone) {
      out.add_hard(lift(v, block), j);
      continue;
    }
    std::vector<Correspondence> subset;
    for (std::size_t i : report.moderate_idx[static_cast<std::size_t>(j)]) {
      if (i < correspondences.size()) subset.push_back(correspondences[i]);
    }
    const LocalIcpResult local = local_icp(subset, pose, block, cfg, v);
    if (local.rank_deficient) {
      out.log.push_back("direction " + std::to_string(j) +
                        ": local ICP rank deficient, using a hard constraint");
      out.add_hard(lift(v, block), j);
      continue;
    }
    SoftConstraint s;
    s.direction = lift(v, block);
    s.target = lift_value(local.update, block);
    s.mu = report.l_u[j] >= cfg.t5 ? cfg.mu_high : cfg.mu_low;
    s.source_direction = j;
    out.soft.push_back(s);
  }
  return out;
}

struct NormalEquations {
  Matrix6d h = Matrix6d::Zero();
  Vector6d b = Vector6d::Zero();
};

/// H' = 2 sum J^T J + 2 sum mu v' v'^T and
/// b = -2 sum J^T f + 2 sum mu v' v'^T (target - accumulated),
/// where `accumulated` is the update already applied since the soft targets were set.
inline NormalEquations build_normal_equations(std::span<const ResidualEval> evals,
                                              std::span<const SoftConstraint> soft = {},
                                              const Vector6d& accumulated = Vector6d::Zero()) {
  NormalEquations ne;
  for (const auto& e : evals) {
    const RowVector6d j = e.jacobian();
    ne.h.noalias() += 2.0 * j.transpose() * j;
    ne.b.noalias() -= 2.0 * j.transpose() * e.value;
  }
  for (const auto& s : soft) {
    const Matrix6d vv = s.direction * s.direction.transpose();
    ne.h += 2.0 * s.mu * vv;
    ne.b += 2.0 * s.mu * vv * (s.target - accumulated);
  }
  return ne;
}

struct KktSolution {
  Vector6d step = Vector6d::Zero();
  Eigen::VectorXd multipliers;
};

/// Solves [H D^T; D 0] [dx; lambda] = [b; 0] by column-pivoted Householder QR.
/// Throws kSingularKkt when the system is rank deficient.
inline KktSolution solve_kkt(const Matrix6d& h, const Vector6d& b, const HardConstraintMatrix& d) {
  const Eigen::Index k = d.rows();
  const Eigen::Index n = 6 + k;
  // Constraint rows are scaled to the magnitude of H to keep the QR well balanced.
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n, n);
  kkt.topLeftCorner<6, 6>() = h;
  if (k > 0) {
    kkt.topRightCorner(6, k) = scale * d.transpose();
    kkt.bottomLeftCorner(k, 6) = scale * d;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs.head<6>() = b;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(kkt);
  if (qr.rank() < n) {
    throw Error(ErrorCode::kSingularKkt, "KKT matrix has rank " + std::to_string(qr.rank()) +
                                             " < " + std::to_string(n));
  }
  const Eigen::VectorXd sol = qr.solve(rhs);
  KktSolution out;
  out.step = sol.head<6>();
  out.multipliers = scale * sol.tail(k);
  return out;
}

/// Plain Gauss-Newton step H dx = b, no constraint handling.
inline Vector6d solve_gauss_newton(const Matrix6d& h, const Vector6d& b) {
  return h.colPivHouseholderQr().solve(b);
}

/// Projects an update onto the eigenvectors of H that are not flagged degenerate.
/// Flags are indexed by descending eigenvalue.
inline Vector6d solution_remap(const Matrix6d& h, const Vector6d& dx,
                               const std::array<bool, 6>& degenerate) {
  const DegeneracyResult eig = zhang_degeneracy(h, 0.0);
  Matrix6d p = Matrix6d::Zero();
  for (int j = 0; j < 6; ++j) {
    if (degenerate[static_cast<std::size_t>(j)]) continue;
    p += eig.eigenvectors.col(j) * eig.eigenvectors.col(j).transpose();
  }
  return p * dx;
}

/// Adds, as extra orthonormal rows of D, the weak eigen-directions of H' that D does
/// not already span. Weak means eigenvalue below max eigenvalue / cond_guard.
inline int promote_weak_directions(const Matrix6d& h, ConstraintSet& cs, double cond_guard) {
  Eigen::SelfAdjointEigenSolver<Matrix6d> es(h);
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0)) return 0;
  int added = 0;
  for (int j = 0; j < 6; ++j) {
    if (es.eigenvalues()[j] * cond_guard >= top) continue;
    Vector6d r = es.eigenvectors().col(j);
    for (Eigen::Index i = 0; i < cs.hard.rows(); ++i) {
      const Vector6d row = cs.hard.row(i).transpose();
      r -= row.dot(r) * row;
    }
    if (r.norm() <= 1e-6) continue;
    cs.add_hard(r.normalized(), -1);
    cs.log.push_back("promoted weak direction (eigenvalue " + std::to_string(es.eigenvalues()[j]) +
                     ") to a hard constraint");
    ++added;
  }
  return added;
}

enum class Method { kLpIcp, kZhang, kXIcpMetric, kNone };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::kLpIcp: return "lpicp";
    case Method::kZhang: return "zhang";
    case Method::kXIcpMetric: return "xicp";
    case Method::kNone: return "none";
  }
  return "none";
}

inline Method parse_method(const std::string& s) {
  if (s == "lpicp") return Method::kLpIcp;
  if (s == "zhang") return Method::kZhang;
  if (s == "xicp") return Method::kXIcpMetric;
  if (s == "none") return Method::kNone;
  throw Error(ErrorCode::kConfig, "unknown method '" + s + "'");
}

struct RegistrationConfig {
  FeatureConfig features;
  DetectionConfig detection;                                           // squared metric
  DetectionConfig detection_absolute = DetectionConfig::absolute_defaults();  // xicp method
  SolverConfig solver;
  Method method = Method::kLpIcp;
  double zhang_threshold = 50.0;

  const DetectionConfig& active_detection() const {
    return method == Method::kXIcpMetric ? detection_absolute : detection;
  }
};

struct IterationTrace {
  int iteration = 0;
  std::size_t num_edge = 0;
  std::size_t num_planar = 0;
  double rms_residual = 0.0;
  double step_rot = 0.0;
  double step_trans = 0.0;
  double step_scale = 1.0;   // backtracking factor applied to the solved step
  double cost_before = 0.0;  // total constrained cost with this iteration's correspondences
  double cost_after = 0.0;
  std::optional<Categories> categories;
};

struct RegistrationResult {
  Pose6D pose;
  std::vector<IterationTrace> trace;
  bool converged = false;
  std::optional<ErrorCode> failure;
  std::string message;
  std::optional<LocalizabilityReport> report;
  std::optional<DegeneracyResult> degeneracy;
  ConstraintSet constraints;
  double hard_residual = 0.0;         // max |D (x - x0)|
  std::vector<double> soft_residuals;  // v'^T (x - x0) - v'^T target per soft constraint

  int k_n() const { return constraints.k_n(); }
  int k_p() const { return constraints.k_p(); }
  std::size_t iterations() const { return trace.size(); }
};

namespace detail {

inline double soft_cost(std::span<const SoftConstraint> soft, const Vector6d& accumulated) {
  double sum = 0.0;
  for (const auto& s : soft) {
    const double r = s.direction.dot(accumulated) - s.direction.dot(s.target);
    sum += s.mu * r * r;
  }
  return sum;
}

inline std::optional<Categories> categories_of(const RegistrationResult& r) {
  if (r.report) return r.report->categories;
  if (r.degeneracy) {
    Categories c{};
    for (int j = 0; j < 6; ++j) {
      c[static_cast<std::size_t>(j)] =
          r.degeneracy->degenerate[static_cast<std::size_t>(j)] ? Category::kNone : Category::kFull;
    }
    return c;
  }
  return std::nullopt;
}

}  // namespace detail

/// Scan-to-map registration from the initial estimate x0. Detection and constraint
/// assembly run on the first iteration and are reused afterwards (unless
/// detect_every_iteration is set); soft targets are absolute targets for the
/// cumulative update x - x0.
inline RegistrationResult register_scan(const FeatureCloud& scan, const FeatureMap& map,
                                        const Pose6D& x0, const RegistrationConfig& cfg = {}) {
  if (!x0.finite()) throw Error(ErrorCode::kInvalidInput, "initial pose is not finite");
  cfg.solver.validate();
  RegistrationResult result;
  result.pose = x0;
  Vector6d x = x0.vector();
  const Vector6d origin = x;
  Matrix6d remap = Matrix6d::Identity();

  for (int iter = 0; iter < cfg.solver.max_outer_iters; ++iter) {
    const Pose6D pose = Pose6D::from_vector(x);
    const std::vector<Correspondence> corrs = find_correspondences(scan, map, pose, cfg.features);
    if (corrs.empty()) {
      result.message = "no correspondences at iteration " + std::to_string(iter);
      if (iter == 0) {
        result.failure = ErrorCode::kNoCorrespondences;
        return result;
      }
      break;
    }
    const std::vector<ResidualEval> evals = evaluate_all(pose, corrs, JacobianType::kEuler);

    if (iter == 0 || cfg.solver.detect_every_iteration) {
      switch (cfg.method) {
        case Method::kLpIcp:
        case Method::kXIcpMetric: {
          const DetectionConfig& dcfg = cfg.active_detection();
          const auto det_evals = dcfg.jacobian == JacobianType::kEuler
                                     ? evals
                                     : evaluate_all(pose, corrs, dcfg.jacobian);
          result.report = detect(det_evals, dcfg);
          // Soft targets are relative to x0; shift them when re-detecting mid-run.
          result.constraints = assemble_constraints(*result.report, corrs, pose, cfg.solver);
          for (auto& s : result.constraints.soft) s.target += x - origin;
          break;
        }
        case Method::kZhang: {
          result.degeneracy = zhang_degeneracy(full_hessian(evals), cfg.zhang_threshold);
          remap.setZero();
          for (int j = 0; j < 6; ++j) {
            if (result.degeneracy->degenerate[static_cast<std::size_t>(j)]) continue;
            remap += result.degeneracy->eigenvectors.col(j) *
                     result.degeneracy->eigenvectors.col(j).transpose();
          }
          break;
        }
        case Method::kNone:
          break;
      }
    }

    const Vector6d accumulated = x - origin;
    const NormalEquations ne = build_normal_equations(evals, result.constraints.soft, accumulated);
    Vector6d step;
    try {
      switch (cfg.method) {
        case Method::kLpIcp:
        case Method::kXIcpMetric:
          promote_weak_directions(ne.h, result.constraints, cfg.solver.cond_guard);
          step = solve_kkt(ne.h, ne.b, result.constraints.hard).step;
          break;
        case Method::kZhang:
          step = remap * solve_gauss_newton(ne.h, ne.b);
          break;
        case Method::kNone:
          step = solve_gauss_newton(ne.h, ne.b);
          break;
      }
    } catch (const Error& e) {
      result.failure = e.code();
      result.message = e.what();
      result.pose = x0;
      result.converged = false;
      return result;
    }
    if (!step.allFinite()) {
      result.failure = ErrorCode::kSingularKkt;
      result.message = "non-finite update";
      result.pose = x0;
      return result;
    }

    // Backtrack on the constrained cost with this iteration's correspondences.
    const auto cost_at = [&](const Vector6d& xv) {
      return sum_squared_residuals(Pose6D::from_vector(xv), corrs) +
             detail::soft_cost(result.constraints.soft, xv - origin);
    };
    IterationTrace tr;
    tr.iteration = iter;
    for (const auto& c : corrs) (c.kind == FeatureKind::kEdge ? tr.num_edge : tr.num_planar) += 1;
    double sq = 0.0;
    for (const auto& e : evals) sq += e.value * e.value;
    tr.rms_residual = std::sqrt(sq / static_cast<double>(evals.size()));
    tr.cost_before = cost_at(x);
    double alpha = 1.0;
    double cost_new = cost_at(x + step);
    int backtracks = 0;
    while (cost_new > tr.cost_before && backtracks < cfg.solver.max_backtracks) {
      alpha *= 0.5;
      cost_new = cost_at(x + alpha * step);
      ++backtracks;
    }
    if (cost_new > tr.cost_before) {
      alpha = 0.0;
      cost_new = tr.cost_before;
    }
    const Vector6d applied = alpha * step;
    x += applied;
    tr.step_scale = alpha;
    tr.cost_after = cost_new;
    tr.step_rot = applied.head<3>().norm();
    tr.step_trans = applied.tail<3>().norm();
    result.pose = Pose6D::from_vector(x);
    tr.categories = detail::categories_of(result);
    result.trace.push_back(tr);

    if (tr.step_rot < cfg.solver.step_tol_rot && tr.step_trans < cfg.solver.step_tol_trans) {
      result.converged = true;
      break;
    }
  }

  const Vector6d total = x - origin;
  if (result.constraints.k_n() > 0) {
    result.hard_residual = (result.constraints.hard * total).cwiseAbs().maxCoeff();
  }
  for (const auto& s : result.constraints.soft) {
    result.soft_residuals.push_back(s.direction.dot(total) - s.direction.dot(s.target));
  }
  return result;
}

}  // namespace lpicp
