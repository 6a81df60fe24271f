#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace lpicp;
using lpicp::testing::random_edge;
using lpicp::testing::random_plane;
using lpicp::testing::random_pose;
using lpicp::testing::random_unit;

namespace {

ResidualEval planar_eval(const Eigen::RowVector3d& jr, const Eigen::RowVector3d& jt) {
  ResidualEval e;
  e.jac_rot = jr;
  e.jac_trans = jt;
  return e;
}

std::vector<ResidualEval> random_evals(Rng& rng, int n) {
  const Pose6D pose = random_pose(rng);
  std::vector<ResidualEval> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(evaluate(pose, i % 3 == 0 ? random_edge(rng, pose) : random_plane(rng, pose)));
  }
  return out;
}

EigenBasis basis_of(std::span<const ResidualEval> evals, bool normalize = true) {
  const HessianBlocks h = build_hessian_blocks(evals, normalize);
  return {eigendecompose(h.rotation), eigendecompose(h.translation)};
}

std::vector<ResidualEval> scene_evals(SceneKind kind, double density = 25.0) {
  SceneSpec spec;
  spec.kind = kind;
  spec.density = density;
  const Scene scene = generate_scene(spec);
  const FeatureConfig cfg = synthetic_scene_features();
  const FeatureCloud f = extract_features(simulate_scan(scene, scene.canonical_pose), cfg);
  const FeatureMap map = build_feature_map(scene.map, cfg);
  return evaluate_all(scene.canonical_pose, find_correspondences(f, map, scene.canonical_pose, cfg));
}

}  // namespace

TEST(HessianBlocks, SinglePlanarRow) {
  const std::vector<ResidualEval> e{planar_eval({0, 0, 0}, {0, 0, 1})};
  const HessianBlocks h = build_hessian_blocks(e);
  EXPECT_EQ(h.translation, Eigen::Vector3d(0, 0, 1).asDiagonal().toDenseMatrix());
  EXPECT_EQ(h.rotation, Eigen::Matrix3d::Zero());
}

TEST(HessianBlocks, MatchesExplicitSum) {
  Rng rng(41);
  const auto evals = random_evals(rng, 500);
  Eigen::Matrix3d ht = Eigen::Matrix3d::Zero(), hr = Eigen::Matrix3d::Zero();
  for (const auto& e : evals) {
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        ht(a, b) += e.jac_trans[a] * e.jac_trans[b];
        hr(a, b) += e.jac_rot[a] * e.jac_rot[b];
      }
  }
  const HessianBlocks h = build_hessian_blocks(evals, false);
  EXPECT_LT((h.translation - ht).cwiseAbs().maxCoeff(), 1e-12 * ht.norm());
  EXPECT_LT((h.rotation - hr).cwiseAbs().maxCoeff(), 1e-12 * hr.norm());
}

TEST(HessianBlocks, EmptyInputRejected) {
  try {
    build_hessian_blocks({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyConstraintSet);
  }
}

TEST(Eigendecompose, Diagonal) {
  const SymmetricEigen3 es = eigendecompose(Eigen::Vector3d(1, 3, 2).asDiagonal());
  EXPECT_EQ(es.values, Eigen::Vector3d(3, 2, 1));
  EXPECT_TRUE(es.vectors.cwiseAbs().isApprox(
      (Eigen::Matrix3d() << 0, 0, 1, 1, 0, 0, 0, 1, 0).finished(), 1e-12));
}

TEST(Eigendecompose, RankOne) {
  const Eigen::Vector3d n = Eigen::Vector3d(1, -2, 2).normalized();
  const SymmetricEigen3 es = eigendecompose(n * n.transpose());
  EXPECT_NEAR(es.values[0], 1.0, 1e-12);
  EXPECT_NEAR(es.values[1], 0.0, 1e-12);
  EXPECT_NEAR(es.values[2], 0.0, 1e-12);
  EXPECT_NEAR(std::abs(es.vectors.col(0).dot(n)), 1.0, 1e-12);
}

TEST(Eigendecompose, MatchesCubicRoots) {
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    Eigen::Matrix3d a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
    const Eigen::Matrix3d h = a * a.transpose();
    const SymmetricEigen3 es = eigendecompose(h);
    EXPECT_LT((es.values - lpicp::testing::cubic_eigenvalues(h)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_TRUE((es.vectors.transpose() * es.vectors).isApprox(Eigen::Matrix3d::Identity(), 1e-12));
    for (int j = 0; j < 3; ++j) {
      Eigen::Index k = 0;
      es.vectors.col(j).cwiseAbs().maxCoeff(&k);
      EXPECT_GT(es.vectors(k, j), 0.0);
    }
  }
}

TEST(Contribution, OwnBasisVector) {
  EigenBasis basis;
  basis.rotation = eigendecompose(Eigen::Vector3d(3, 2, 1).asDiagonal());
  basis.translation = basis.rotation;
  const RowVector6d f = contribution_vector(planar_eval({0, 0, 0}, basis.translation.vectors.col(0).transpose()), basis);
  EXPECT_NEAR(f[3], 1.0, 1e-15);
  EXPECT_NEAR(f[4], 0.0, 1e-15);
  EXPECT_NEAR(f[5], 0.0, 1e-15);
  EXPECT_EQ(contribution_vector(planar_eval({0, 0, 0}, {0, 0, 0}), basis), RowVector6d::Zero());
}

TEST(Contribution, ColumnSumsEqualEigenvalues) {
  Rng rng(43);
  for (int n : {10, 100, 1000}) {
    const auto evals = random_evals(rng, n);
    const EigenBasis basis = basis_of(evals);
    RowVector6d sum = RowVector6d::Zero();
    for (const auto& e : evals) sum += contribution_vector(e, basis);
    const Vector6d ev = basis.eigenvalues();
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(sum[j], ev[j], 1e-6 * std::abs(ev[j]));
  }
}

TEST(Contribution, SquaredMetricIgnoresSignFlips) {
  Rng rng(44);
  const auto evals = random_evals(rng, 50);
  const EigenBasis basis = basis_of(evals);
  for (const auto& e : evals) {
    ResidualEval flipped = e;
    flipped.jac_rot = -e.jac_rot;
    flipped.jac_trans = -e.jac_trans;
    EXPECT_LT((contribution_vector(e, basis) - contribution_vector(flipped, basis)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((contribution_vector(e, basis, ContributionMetric::kAbsolute) -
               contribution_vector(flipped, basis, ContributionMetric::kAbsolute))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
  }
}

TEST(FilterAggregate, AllBelowModerate) {
  const ContributionMatrix f = ContributionMatrix::Constant(4, 6, 0.01);
  const auto out = filter_and_aggregate(f, DetectionConfig{});
  EXPECT_EQ(out.l_f, Vector6d::Zero());
  EXPECT_EQ(out.l_u, Vector6d::Zero());
  for (const auto& idx : out.moderate_idx) EXPECT_TRUE(idx.empty());
  for (const auto& idx : out.high_idx) EXPECT_TRUE(idx.empty());
}

TEST(FilterAggregate, HighEntryCountsTwice) {
  ContributionMatrix f = ContributionMatrix::Zero(2, 6);
  f(1, 4) = 0.6;
  const auto out = filter_and_aggregate(f, DetectionConfig{});
  EXPECT_DOUBLE_EQ(out.l_f[4], 0.6);
  EXPECT_DOUBLE_EQ(out.l_u[4], 0.6);
  EXPECT_EQ(out.moderate_idx[4], std::vector<std::size_t>{1});
  EXPECT_EQ(out.high_idx[4], std::vector<std::size_t>{1});
}

TEST(FilterAggregate, HandSummation) {
  ContributionMatrix f = ContributionMatrix::Zero(3, 6);
  f(0, 2) = 0.02;
  f(1, 2) = 0.1;
  f(2, 2) = 0.5;
  const auto out = filter_and_aggregate(f, DetectionConfig{});
  EXPECT_NEAR(out.l_f[2], 0.6, 1e-15);
  EXPECT_NEAR(out.l_u[2], 0.5, 1e-15);
  EXPECT_EQ(out.moderate_idx[2], (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(out.high_idx[2], std::vector<std::size_t>{2});
  EXPECT_EQ(out.moderate(0, 2), 0.0);
  EXPECT_EQ(out.high(1, 2), 0.0);
}

TEST(Categorize, Examples) {
  const DetectionConfig cfg;
  EXPECT_EQ(categorize_direction(60, 0, cfg), Category::kFull);
  EXPECT_EQ(categorize_direction(20, 10, cfg), Category::kPartial);
  EXPECT_EQ(categorize_direction(20, 5, cfg), Category::kNone);
  EXPECT_EQ(categorize_direction(0, 30, cfg), Category::kFull);
}

TEST(Config, Validation) {
  DetectionConfig cfg;
  cfg.h_f = 0.6;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.t3 = 60;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.t4 = 40;
  EXPECT_THROW(cfg.validate(), Error);
  const DetectionConfig abs = DetectionConfig::absolute_defaults();
  EXPECT_NEAR(abs.h_f * abs.h_f, 0.03, 1e-15);
  EXPECT_NEAR(abs.h_u * abs.h_u, 0.4998, 1e-15);
}

TEST(Detect, SinglePlaneTranslation) {
  // 200 correspondences on z = 0 seen from above: the normal is the only observed
  // translation, and in-plane rows are exactly zero.
  std::vector<ResidualEval> evals;
  Rng rng(45);
  for (int i = 0; i < 200; ++i) {
    const Point3 p(rng.uniform(-5, 5), rng.uniform(-5, 5), -1.5);
    evals.push_back(evaluate(Pose6D::identity(), make_planar(p, Point3(0, 0, -1.5), Eigen::Vector3d::UnitZ())));
  }
  const LocalizabilityReport r = detect(evals);
  EXPECT_NEAR(std::abs(r.basis.translation.vectors(2, 0)), 1.0, 1e-12);
  EXPECT_EQ(r.categories[3], Category::kFull);
  EXPECT_EQ(r.categories[4], Category::kNone);
  EXPECT_EQ(r.categories[5], Category::kNone);
  // yaw is unobservable from a single plane
  EXPECT_EQ(r.categories[2], Category::kNone);
  EXPECT_NEAR(std::abs(r.basis.rotation.vectors(2, 2)), 1.0, 1e-9);
  EXPECT_EQ(r.num_planar, 200u);
  EXPECT_EQ(r.num_edge, 0u);
}

TEST(Detect, CubeRoomIsFullyConstrained) {
  const auto evals = scene_evals(SceneKind::kCubeRoom, 100);
  const LocalizabilityReport r = detect(evals);
  for (auto c : r.categories) EXPECT_EQ(c, Category::kFull);
  // the aggregated sums cannot exceed the eigenvalues they partition
  const Vector6d ev = r.basis.eigenvalues();
  for (int j = 0; j < 6; ++j) EXPECT_LE(r.l_f[j], ev[j] * (1 + 1e-12));
}

TEST(Detect, EdgeShareIsAccounted) {
  Rng rng(46);
  const auto evals = random_evals(rng, 300);
  const LocalizabilityReport r = detect(evals);
  ContributionMatrix f(300, 6);
  for (int i = 0; i < 300; ++i) f.row(i) = contribution_vector(evals[static_cast<std::size_t>(i)], r.basis);
  Vector6d edge = Vector6d::Zero();
  for (int i = 0; i < 300; ++i) {
    if (evals[static_cast<std::size_t>(i)].kind != FeatureKind::kEdge) continue;
    for (int j = 0; j < 6; ++j) edge[j] += f(i, j) >= r.thresholds.h_f ? f(i, j) : 0.0;
  }
  EXPECT_LT((edge - r.l_f_edge).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(r.num_edge, 100u);
}

TEST(Detect, EmptyInputRejected) {
  EXPECT_THROW(detect({}), Error);
}

TEST(Zhang, ScaledIdentityIsNotDegenerate) {
  EXPECT_EQ(zhang_degeneracy(100.0 * Matrix6d::Identity(), 50.0).count(), 0);
}

TEST(Zhang, ZeroEigenvalueIsFlagged) {
  Rng rng(47);
  const Matrix6d q = lpicp::testing::random_orthonormal_rows(rng, 6);
  Vector6d lambda;
  lambda << 900, 700, 500, 300, 100, 0;
  const Matrix6d h = q.transpose() * lambda.asDiagonal() * q;
  const DegeneracyResult d = zhang_degeneracy(h, 50.0);
  EXPECT_EQ(d.count(), 1);
  EXPECT_TRUE(d.degenerate[5]);
  EXPECT_NEAR(std::abs(d.eigenvectors.col(5).dot(q.row(5).transpose())), 1.0, 1e-9);
}

TEST(Zhang, PlaneSceneHasThreeDegenerateDirections) {
  const auto evals = scene_evals(SceneKind::kPlane);
  const DegeneracyResult d = zhang_degeneracy(full_hessian(evals), 50.0);
  ASSERT_EQ(d.count(), 3);
  // flagged eigenvectors span yaw, tx, ty
  for (int j = 0; j < 6; ++j) {
    if (!d.degenerate[static_cast<std::size_t>(j)]) continue;
    const Vector6d v = d.eigenvectors.col(j);
    EXPECT_NEAR(v[2] * v[2] + v[3] * v[3] + v[4] * v[4], 1.0, 1e-9);
  }
}
