#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace lpicp;
using lpicp::testing::null_space_solve;
using lpicp::testing::random_orthonormal_rows;
using lpicp::testing::random_spd;

namespace {

// Scan-frame points on the plane z = 0 seen through `pose`, matched to that plane.
std::vector<Correspondence> plane_correspondences(const Pose6D& pose, double offset) {
  std::vector<Correspondence> out;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) {
      const Point3 world(0.7 * i, 0.5 * j, offset);
      const Point3 p = transform_point(invert(pose), world);
      out.push_back(make_planar(p, Point3::Zero(), Eigen::Vector3d::UnitZ(), pose));
    }
  return out;
}

struct SceneFixture {
  Scene scene;
  FeatureMap map;
  FeatureConfig features = synthetic_scene_features();

  SceneFixture(SceneKind kind, double density) {
    SceneSpec spec;
    spec.kind = kind;
    spec.density = density;
    scene = generate_scene(spec);
    map = build_feature_map(scene.map, features);
  }

  FeatureCloud scan(const Pose6D& at) const { return extract_features(simulate_scan(scene, at), features); }
};

}  // namespace

TEST(LocalIcp, ConvergedSubsetGivesZeroUpdate) {
  const auto corrs = plane_correspondences(Pose6D::identity(), 0.0);
  const LocalIcpResult r = local_icp(corrs, Pose6D::identity(), Block::kTranslation);
  EXPECT_FALSE(r.rank_deficient);
  EXPECT_LT(r.update.norm(), 1e-9);
}

TEST(LocalIcp, PlaneOffsetAlongNormal) {
  const auto corrs = plane_correspondences(Pose6D::identity(), 0.2);
  const LocalIcpResult r = local_icp(corrs, Pose6D::identity(), Block::kTranslation, {},
                                     Eigen::Vector3d::UnitZ());
  EXPECT_FALSE(r.rank_deficient);
  EXPECT_NEAR(r.update.dot(Eigen::Vector3d::UnitZ()), -0.2, 1e-6);
  // in-plane translation is unobserved and stays at zero
  EXPECT_LT(r.update.head<2>().norm(), 1e-12);
}

TEST(LocalIcp, YawFromSingleWall) {
  // points on the wall y = 1 at z = 0; the scan is the map yawed by 0.05 rad
  const Eigen::Matrix3d rz = rotation_from_euler({0, 0, 0.05});
  std::vector<Correspondence> corrs;
  for (int i = -10; i <= 10; ++i) {
    const Point3 world(0.2 * i, 1.0, 0.0);
    corrs.push_back(make_planar(rz * world, Point3(0, 1, 0), Eigen::Vector3d::UnitY()));
  }
  const LocalIcpResult r = local_icp(corrs, Pose6D::identity(), Block::kRotation, {},
                                     Eigen::Vector3d::UnitZ());
  EXPECT_FALSE(r.rank_deficient);
  EXPECT_NEAR(r.update.z(), -0.05, 1e-4);
}

TEST(LocalIcp, RankDeficiency) {
  EXPECT_TRUE(local_icp({}, Pose6D::identity(), Block::kTranslation).rank_deficient);
  const auto corrs = plane_correspondences(Pose6D::identity(), 0.2);
  const LocalIcpResult r =
      local_icp(corrs, Pose6D::identity(), Block::kTranslation, {}, Eigen::Vector3d::UnitX());
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_EQ(r.update, Eigen::Vector3d::Zero());
}

TEST(Lift, Blocks) {
  Vector6d a, b;
  a << 1, 0, 0, 0, 0, 0;
  b << 0, 0, 0, 0, 0, 1;
  EXPECT_EQ(lift({1, 0, 0}, Block::kRotation), a);
  EXPECT_EQ(lift({0, 0, 1}, Block::kTranslation), b);
  EXPECT_EQ(lift_value({0, 0, 1}, Block::kTranslation), b);
}

TEST(AssembleConstraints, AllFullIsEmpty) {
  LocalizabilityReport r;
  r.categories.fill(Category::kFull);
  const ConstraintSet cs = assemble_constraints(r, {}, Pose6D::identity());
  EXPECT_EQ(cs.k_n(), 0);
  EXPECT_EQ(cs.k_p(), 0);
}

TEST(AssembleConstraints, NoneBecomesHardRow) {
  LocalizabilityReport r;
  r.basis.rotation = eigendecompose(Eigen::Matrix3d::Identity());
  r.basis.translation = eigendecompose(Eigen::Vector3d(5, 3, 1).asDiagonal());
  r.categories.fill(Category::kFull);
  r.categories[5] = Category::kNone;
  const ConstraintSet cs = assemble_constraints(r, {}, Pose6D::identity());
  ASSERT_EQ(cs.k_n(), 1);
  EXPECT_EQ(Vector6d(cs.hard.row(0).transpose()), lift(r.basis.direction(5), Block::kTranslation));
  EXPECT_EQ(cs.hard_sources[0], 5);
  EXPECT_EQ(cs.k_p(), 0);
}

TEST(AssembleConstraints, PartialWeightFollowsHighContributions) {
  const auto corrs = plane_correspondences(Pose6D::identity(), 0.2);
  LocalizabilityReport r;
  r.basis.rotation = eigendecompose(Eigen::Matrix3d::Identity());
  r.basis.translation = eigendecompose(Eigen::Vector3d(1, 2, 3).asDiagonal());  // v_t1 = z
  r.categories.fill(Category::kFull);
  r.categories[3] = Category::kPartial;
  for (std::size_t i = 0; i < corrs.size(); ++i) r.moderate_idx[3].push_back(i);

  r.l_u[3] = 20.0;
  ConstraintSet cs = assemble_constraints(r, corrs, Pose6D::identity());
  ASSERT_EQ(cs.k_p(), 1);
  EXPECT_EQ(cs.soft[0].mu, 5.0);
  EXPECT_NEAR(cs.soft[0].direction.dot(cs.soft[0].target), -0.2, 1e-6);
  EXPECT_EQ(cs.soft[0].source_direction, 3);

  r.l_u[3] = 10.0;
  cs = assemble_constraints(r, corrs, Pose6D::identity());
  ASSERT_EQ(cs.k_p(), 1);
  EXPECT_EQ(cs.soft[0].mu, 2.0);
}

TEST(AssembleConstraints, RankDeficientPartialFallsBackToHard) {
  LocalizabilityReport r;
  r.basis.rotation = eigendecompose(Eigen::Matrix3d::Identity());
  r.basis.translation = eigendecompose(Eigen::Vector3d(1, 2, 3).asDiagonal());
  r.categories.fill(Category::kFull);
  r.categories[4] = Category::kPartial;  // no contributors listed
  const ConstraintSet cs = assemble_constraints(r, {}, Pose6D::identity());
  EXPECT_EQ(cs.k_n(), 1);
  EXPECT_EQ(cs.k_p(), 0);
  EXPECT_EQ(cs.log.size(), 1u);
}

TEST(SolveKkt, DiagonalWithoutConstraints) {
  const KktSolution s = solve_kkt(2.0 * Matrix6d::Identity(), Vector6d::Constant(2.0), HardConstraintMatrix(0, 6));
  EXPECT_LT((s.step - Vector6d::Ones()).norm(), 1e-15);
  EXPECT_EQ(s.multipliers.size(), 0);
}

TEST(SolveKkt, ConstraintSuppressesOnlyGradient) {
  HardConstraintMatrix d(1, 6);
  d << 1, 0, 0, 0, 0, 0;
  Vector6d b = Vector6d::Zero();
  b[0] = 2.0;
  const KktSolution s = solve_kkt(2.0 * Matrix6d::Identity(), b, d);
  EXPECT_LT(s.step.norm(), 1e-15);
  // stationarity: H dx + D^T lambda = b
  EXPECT_NEAR(s.multipliers[0], 2.0, 1e-12);
}

TEST(SolveKkt, MatchesNullSpaceSolution) {
  Rng rng(51);
  for (int t = 0; t < 200; ++t) {
    const Matrix6d h = random_spd(rng);
    Vector6d b;
    for (int i = 0; i < 6; ++i) b[i] = rng.normal();
    const int k = 1 + t % 5;
    const HardConstraintMatrix d = random_orthonormal_rows(rng, k);
    const KktSolution s = solve_kkt(h, b, d);
    EXPECT_LT((d * s.step).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((s.step - null_space_solve(h, b, d)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((h * s.step + d.transpose() * s.multipliers - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(SolveKkt, RankDeficientSystemThrows) {
  HardConstraintMatrix d(2, 6);
  d << 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0;
  try {
    solve_kkt(Matrix6d::Identity(), Vector6d::Ones(), d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularKkt);
  }
}

TEST(SolutionRemap, Flags) {
  Rng rng(52);
  const Matrix6d h = random_spd(rng);
  Vector6d dx;
  for (int i = 0; i < 6; ++i) dx[i] = rng.normal();
  std::array<bool, 6> none{}, all{};
  all.fill(true);
  EXPECT_LT((solution_remap(h, dx, none) - dx).norm(), 1e-12);
  EXPECT_LT(solution_remap(h, dx, all).norm(), 1e-15);
  std::array<bool, 6> one{};
  one[4] = true;
  const DegeneracyResult eig = zhang_degeneracy(h, 0.0);
  EXPECT_LT(std::abs(solution_remap(h, dx, one).dot(eig.eigenvectors.col(4))), 1e-9);
}

TEST(NormalEquations, SoftTermOnly) {
  // data term removed: the other five directions are pinned, the soft direction
  // lands exactly on its target
  Vector6d v = Vector6d::Zero();
  v[4] = 1.0;
  SoftConstraint s{v, 0.3 * v, 2.0, 4};
  const NormalEquations ne = build_normal_equations({}, std::span<const SoftConstraint>(&s, 1));
  HardConstraintMatrix d(5, 6);
  int r = 0;
  for (int i = 0; i < 6; ++i) {
    if (i == 4) continue;
    d.row(r++) = Vector6d::Unit(i).transpose();
  }
  const Vector6d dx = solve_kkt(ne.h, ne.b, d).step;
  EXPECT_NEAR(v.dot(dx), 0.3, 1e-12);
}

TEST(PromoteWeak, AddsOrthogonalRows) {
  Vector6d lambda;
  lambda << 1e4, 1e4, 1e4, 1e4, 1e-9, 1e4;
  ConstraintSet cs;
  EXPECT_EQ(promote_weak_directions(lambda.asDiagonal(), cs, 1e10), 1);
  ASSERT_EQ(cs.k_n(), 1);
  EXPECT_NEAR(std::abs(cs.hard(0, 4)), 1.0, 1e-12);
  EXPECT_EQ(cs.hard_sources[0], -1);
  // already spanned: nothing more to add
  EXPECT_EQ(promote_weak_directions(lambda.asDiagonal(), cs, 1e10), 0);
}

TEST(Register, FixedPointAtGroundTruth) {
  SceneFixture f(SceneKind::kCubeRoom, 100);
  FeatureCloud scan;
  // an exact subsample of the map planar features, in the sensor frame of a pose;
  // points near an edge of the room get plane fits that straddle two faces
  const Pose6D gt = f.scene.canonical_pose;
  const Pose6D inv = invert(gt);
  const auto interior = [&](const Point3& p) {
    int near = 0;
    for (const auto& s : f.scene.surfaces) {
      const auto& r = std::get<Rectangle>(s);
      if (std::abs(r.normal().dot(p - r.center)) < 0.5) ++near;
    }
    return near == 1;
  };
  for (std::size_t i = 0; i < f.map.planes->size(); i += 20) {
    if (interior(f.map.planes->point(i))) scan.planar_points.push_back(transform_point(inv, f.map.planes->point(i)));
  }
  ASSERT_GT(scan.planar_points.size(), 100u);
  const RegistrationResult r = register_scan(scan, f.map, gt, synthetic_registration_config());
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations(), 1u);
  EXPECT_LT((r.pose.vector() - gt.vector()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_FALSE(r.failure);
}

TEST(Register, CubeRoomRecovery) {
  SceneFixture f(SceneKind::kCubeRoom, 100);
  const Pose6D gt = f.scene.canonical_pose;
  const FeatureCloud scan = f.scan(gt);
  Rng rng(53);
  for (int t = 0; t < 5; ++t) {
    Vector6d x0 = gt.vector();
    x0.head<3>() += 0.05 * lpicp::testing::random_unit(rng);
    x0.tail<3>() += 0.1 * lpicp::testing::random_unit(rng);
    const RegistrationResult r = register_scan(scan, f.map, Pose6D::from_vector(x0), synthetic_registration_config());
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.pose.rotation - gt.rotation).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LT((r.pose.translation - gt.translation).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_EQ(r.k_n(), 0);
  }
}

TEST(Register, CorridorAxisIsHeld) {
  SceneFixture f(SceneKind::kCorridor, 100);
  const Pose6D gt = f.scene.canonical_pose;
  const FeatureCloud scan = f.scan(gt);
  Pose6D x0 = gt;
  x0.translation.x() += 0.3;
  const RegistrationResult r = register_scan(scan, f.map, x0, synthetic_registration_config());
  ASSERT_FALSE(r.failure);
  ASSERT_TRUE(r.report);
  ASSERT_GE(r.k_n(), 1);
  const Vector6d dx = r.pose.vector() - x0.vector();
  // the constrained direction is the corridor axis
  const Vector6d axis = r.constraints.hard.row(0).transpose();
  EXPECT_GT(std::abs(axis[3]), 0.999);
  EXPECT_LT(std::abs(axis.dot(dx)), 1e-9);
  EXPECT_LT(std::abs(r.pose.translation.y() - gt.translation.y()), 1e-2);
  EXPECT_LT(std::abs(r.pose.translation.z() - gt.translation.z()), 1e-2);
  EXPECT_LT(r.hard_residual, 1e-9);
}

TEST(Register, BaselineMethodsRun) {
  SceneFixture f(SceneKind::kCorridor, 50);
  const Pose6D gt = f.scene.canonical_pose;
  const FeatureCloud scan = f.scan(gt);
  for (Method m : {Method::kZhang, Method::kXIcpMetric, Method::kNone}) {
    RegistrationConfig cfg = synthetic_registration_config();
    cfg.method = m;
    const RegistrationResult r = register_scan(scan, f.map, gt, cfg);
    EXPECT_FALSE(r.failure) << to_string(m);
    EXPECT_LT((r.pose.translation - gt.translation).tail<2>().norm(), 1e-2) << to_string(m);
    if (m == Method::kZhang) {
      ASSERT_TRUE(r.degeneracy);
      EXPECT_GE(r.degeneracy->count(), 1);
    }
  }
}

TEST(Register, NoCorrespondencesReturnsInitialPose) {
  SceneFixture f(SceneKind::kCubeRoom, 25);
  const FeatureCloud scan = f.scan(f.scene.canonical_pose);
  Pose6D far = f.scene.canonical_pose;
  far.translation.x() += 100.0;
  const RegistrationResult r = register_scan(scan, f.map, far, synthetic_registration_config());
  ASSERT_TRUE(r.failure);
  EXPECT_EQ(*r.failure, ErrorCode::kNoCorrespondences);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.pose.vector(), far.vector());
}

TEST(Register, NonFiniteInitialPoseRejected) {
  SceneFixture f(SceneKind::kCubeRoom, 25);
  Pose6D bad = f.scene.canonical_pose;
  bad.translation.x() = std::nan("");
  EXPECT_THROW(register_scan(FeatureCloud{}, f.map, bad), Error);
}

TEST(Method, NamesRoundTrip) {
  for (Method m : {Method::kLpIcp, Method::kZhang, Method::kXIcpMetric, Method::kNone}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("bogus"), Error);
}
