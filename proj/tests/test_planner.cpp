#include "blockasm/calibration.hpp"
#include "blockasm/io.hpp"
#include "blockasm/planner.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace blockasm;

namespace {

constexpr double kPi = std::numbers::pi;

const BlockLibrary& library() {
  static const BlockLibrary lib(standard_library());
  return lib;
}

// Flush rotation with object axis `down` on the plane, then yawed.
Mat3 flush(int axis, int sign, double yaw) {
  Vec3 d = Vec3::Zero();
  d[axis] = sign;
  // Smallest rotation taking d onto -z, from an independent construction.
  const Vec3 target = -Vec3::UnitZ();
  Mat3 tilt;
  if ((d - target).norm() < 1e-12) {
    tilt = Mat3::Identity();
  } else if ((d + target).norm() < 1e-12) {
    tilt = oracle::rotation_about(Vec3::UnitX(), kPi);
  } else {
    tilt = Eigen::Quaterniond::FromTwoVectors(d, target).toRotationMatrix();
  }
  return oracle::rotation_about(Vec3::UnitZ(), yaw) * tilt;
}

Mat3 random_flush(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> face(0, 5);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  const int f = face(rng);
  return flush(f % 3, f < 3 ? 1 : -1, yaw(rng));
}

// Orientation bookkeeping written from the action definitions: placements set
// the orientation, turns and yaw alignments left-multiply base rotations.
Mat3 oracle_replay(const Mat3& start, const std::vector<PrimitiveAction>& actions) {
  Mat3 r = start;
  for (const auto& a : actions) {
    const Vec3 axis = a.rotation_axis == Axis::X ? Vec3::UnitX() : Vec3::UnitY();
    switch (a.kind) {
      case ActionKind::PickPlace:
      case ActionKind::Insert: r = a.result.rotation; break;
      case ActionKind::RotateHorizontal: r = oracle::rotation_about(axis, a.angle) * r; break;
      case ActionKind::YawAlign: r = oracle::rotation_about(Vec3::UnitZ(), a.angle) * r; break;
      case ActionKind::Calibrate: break;
    }
  }
  return r;
}

int count(const std::vector<PrimitiveAction>& actions, ActionKind k) {
  return static_cast<int>(
      std::count_if(actions.begin(), actions.end(), [&](const auto& a) { return a.kind == k; }));
}

StructurePlan load(int i) {
  return plan_from_json(read_json(std::string(BLOCKASM_DATA_DIR) + "/structures/structure" +
                                  std::to_string(i) + ".json"));
}

PlannerConfig config_for(const StructurePlan& plan) {
  PlannerConfig c;
  c.anchor = anchor_on_plane(plan, library(), 0.45, 0.0, 0.0, 0.0);
  return c;
}

Pose flat_at(const std::string& id, double x, double y, const Mat3& r) {
  return {r, Vec3(x, y, library().at(id).resting_height(r))};
}

std::vector<std::optional<Pose>> perfect(const std::vector<BlockInstance>& scene) {
  std::vector<std::optional<Pose>> out;
  for (const auto& b : scene) out.push_back(b.pose);
  return out;
}

}  // namespace

TEST(RotationsNeeded, Cases) {
  const Pose target = Pose::Identity();
  EXPECT_EQ(rotations_needed(target, target), 0);
  // Lying on its side: object +z is horizontal, target wants it up.
  EXPECT_EQ(rotations_needed(Pose::FromRotation(flush(1, 1, 0.3)), target), 1);
  EXPECT_EQ(rotations_needed(Pose::FromRotation(flush(0, -1, -1.0)), target), 1);
  // Upside down: object +z points down.
  EXPECT_EQ(rotations_needed(Pose::FromRotation(flush(2, 1, 0.7)), target), 2);
}

TEST(CanonicalTarget, TrivialGroupKeepsTarget) {
  BlockModel m = make_cuboid("m", Vec3(0.03, 0.02, 0.01), 0.005, 7);
  m.symmetry = SymmetryGroup{};
  const Pose target{flush(2, -1, 0.4), Vec3(0.4, 0, 0.01)};
  const Pose est{flush(2, -1, -2.0), Vec3(0, 0, 0.01)};
  const Pose c = choose_canonical_target(m, est, target, {});
  EXPECT_EQ(c.rotation, target.rotation);
}

TEST(CanonicalTarget, HalfTurnSymmetryPicksSmallerYaw) {
  const BlockModel& m = library().at("05");  // generic box: half turns only
  const Pose target{Mat3::Identity(), Vec3(0.45, 0, 0.015)};
  const Pose est{rot_z(170.0 * kPi / 180.0), Vec3(0, 0, 0.015)};
  const Pose c = choose_canonical_target(m, est, target, {});
  // The equivalent turned by pi about z sits 10 degrees from the estimate.
  EXPECT_LT((c.rotation - rot_z(kPi)).norm(), 1e-12);
  EXPECT_NEAR(geodesic_angle(c.rotation, est.rotation), 10.0 * kPi / 180.0, 1e-9);
  const auto actions = plan_reorientation(m, est, c, {});
  EXPECT_NEAR(residual_yaw(actions), 10.0 * kPi / 180.0, 1e-9);
}

TEST(CanonicalTarget, FourFoldSymmetryBoundsResidualYaw) {
  const BlockModel& m = library().at("04");  // square about z
  const Pose target{Mat3::Identity(), Vec3(0.45, 0, 0.015)};
  for (int i = 0; i <= 720; ++i) {
    const double yaw = -kPi + i * kPi / 360.0;
    const Pose est{rot_z(yaw), Vec3(0, 0, 0.015)};
    const Pose c = choose_canonical_target(m, est, target, {});
    EXPECT_LE(std::abs(residual_yaw(plan_reorientation(m, est, c, {}))), kPi / 4 + 1e-9);
  }
}

TEST(CanonicalTarget, AlwaysASymmetryEquivalent) {
  std::mt19937_64 rng(2);
  for (const auto& m : library().models()) {
    for (int i = 0; i < 50; ++i) {
      const Pose target{random_flush(rng), Vec3(0.45, 0, 0.05)};
      const Pose est{random_flush(rng), Vec3(0.1, 0.1, 0.05)};
      const Pose c = choose_canonical_target(m, est, target, {});
      const auto eq = symmetry_equivalents(target, m.symmetry);
      EXPECT_TRUE(std::any_of(eq.begin(), eq.end(), [&](const Pose& p) {
        return (p.rotation - c.rotation).norm() < 1e-12;
      }));
    }
  }
}

TEST(Reorientation, AlignedNeedsOnlyYaw) {
  const BlockModel& m = library().at("08");
  const Pose target{Mat3::Identity(), Vec3(0.45, 0, 0.02)};
  const auto same = plan_reorientation(m, target, target, {});
  ASSERT_EQ(same.size(), 1u);
  EXPECT_EQ(same[0].kind, ActionKind::YawAlign);
  EXPECT_NEAR(same[0].angle, 0.0, 1e-12);
  const Pose yawed{rot_z(0.5), Vec3(0.1, 0.1, 0.02)};
  const auto a = plan_reorientation(m, yawed, target, {});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_NEAR(a[0].angle, -0.5, 1e-12);
}

TEST(Reorientation, OrthogonalCaseUsesOneTurn) {
  const BlockModel& m = library().at("08");
  const Pose target{Mat3::Identity(), Vec3(0.45, 0, 0.02)};
  const Pose side{flush(1, 1, 0.8), Vec3(0.1, 0.0, 0.03)};
  const auto a = plan_reorientation(m, side, target, {});
  EXPECT_EQ(count(a, ActionKind::RotateHorizontal), 1);
  EXPECT_EQ(a.back().kind, ActionKind::YawAlign);
  EXPECT_LT((oracle_replay(side.rotation, a) - target.rotation).norm(), 1e-9);
}

TEST(Reorientation, AntiParallelUsesOneFlipOrTwoTurns) {
  const BlockModel& m = library().at("08");
  const Pose target{Mat3::Identity(), Vec3(0.45, 0, 0.02)};
  const Pose upside{flush(2, 1, -0.3), Vec3(0.1, 0.0, 0.02)};
  ReorientationOptions flip;
  const auto one = plan_reorientation(m, upside, target, flip);
  EXPECT_EQ(count(one, ActionKind::RotateHorizontal), 1);
  EXPECT_NEAR(std::abs(std::find_if(one.begin(), one.end(), [](const auto& a) {
                         return a.kind == ActionKind::RotateHorizontal;
                       })->angle),
              kPi, 1e-12);
  ReorientationOptions two;
  two.allow_single_flip = false;
  const auto pair = plan_reorientation(m, upside, target, two);
  EXPECT_EQ(count(pair, ActionKind::RotateHorizontal), 2);
  for (const auto* plan : {&one, &pair}) {
    EXPECT_LT((oracle_replay(upside.rotation, *plan) - target.rotation).norm(), 1e-9);
  }
}

TEST(Reorientation, RandomInstancesReachCanonicalTarget) {
  std::mt19937_64 rng(17);
  const auto& models = library().models();
  std::uniform_int_distribution<std::size_t> pick(0, models.size() - 1);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 2000; ++i) {
    const BlockModel& m = models[pick(rng)];
    const Pose current{random_flush(rng), Vec3(0.1, -0.1, 0.0)};
    const Pose target{random_flush(rng), Vec3(0.45, 0.0, 0.05)};
    ReorientationOptions opt;
    opt.allow_single_flip = coin(rng);
    const Pose canonical = choose_canonical_target(m, current, target, opt);
    const auto actions = plan_reorientation(m, current, canonical, opt);
    EXPECT_LE(count(actions, ActionKind::RotateHorizontal), 2);
    for (const auto& a : actions) {
      if (a.kind != ActionKind::RotateHorizontal) continue;
      const double q = std::abs(a.angle) / (kPi / 2);
      EXPECT_NEAR(q, std::round(q), 1e-12);
      EXPECT_TRUE(std::round(q) == 1.0 || std::round(q) == 2.0);
    }
    EXPECT_LT((oracle_replay(current.rotation, actions) - canonical.rotation).norm(), 1e-9);
    EXPECT_LT((replay_orientation(current.rotation, actions) - canonical.rotation).norm(), 1e-9);
  }
}

TEST(Compile, BlockAlreadyAtTarget) {
  StructurePlan plan;
  plan.entries.push_back({"01", Pose::Identity()});
  plan.sequence = {0};
  const PlannerConfig cfg = config_for(plan);
  const std::vector<BlockInstance> scene{{"01", cfg.anchor}};
  const auto steps = compile_assembly(plan, library(), scene, {cfg.anchor}, cfg);
  ASSERT_EQ(steps.size(), 1u);
  ASSERT_EQ(steps[0].actions.size(), 2u);
  EXPECT_EQ(steps[0].actions[0].kind, ActionKind::Calibrate);
  EXPECT_EQ(steps[0].actions[1].kind, ActionKind::Insert);
  EXPECT_LT((steps[0].actions[0].result.translation - cfg.anchor.translation).norm(), 1e-12);
}

TEST(Compile, FlatTowerNeedsNoTurns) {
  const StructurePlan plan = load(1);
  const PlannerConfig cfg = config_for(plan);
  std::vector<BlockInstance> scene;
  std::vector<Pose> est;
  double x = -0.2;
  for (const auto& e : plan.entries) {
    scene.push_back({e.model_id, flat_at(e.model_id, x, 0.1, rot_z(x * 3.0))});
    est.push_back(scene.back().pose);
    x += 0.13;
  }
  const auto steps = compile_assembly(plan, library(), scene, est, cfg);
  ASSERT_EQ(steps.size(), 4u);
  for (const auto& s : steps) {
    EXPECT_EQ(s.rotation_count(), 0);
    EXPECT_EQ(s.actions.back().kind, ActionKind::Insert);
    EXPECT_EQ(s.actions[s.actions.size() - 2].kind, ActionKind::Calibrate);
  }
}

TEST(Compile, SideFacingEntryNeedsATurn) {
  const StructurePlan plan = load(4);
  const PlannerConfig cfg = config_for(plan);
  std::vector<BlockInstance> scene;
  double x = -0.45;
  for (const auto& e : plan.entries) {
    scene.push_back({e.model_id, flat_at(e.model_id, x, -0.15, Mat3::Identity())});
    x += 0.13;
  }
  std::vector<Pose> est;
  for (const auto& b : scene) est.push_back(b.pose);
  const auto steps = compile_assembly(plan, library(), scene, est, cfg);
  ASSERT_EQ(steps.size(), 8u);
  for (const auto& s : steps) {
    EXPECT_LE(s.rotation_count(), 2);
    if (s.model_id == "08") {
      EXPECT_GE(s.rotation_count(), 1);
    } else {
      EXPECT_EQ(s.rotation_count(), 0) << s.model_id;
    }
  }
}

TEST(Compile, NoCalibrationDropsCalibrate) {
  const StructurePlan plan = load(1);
  PlannerConfig cfg = config_for(plan);
  cfg.calibration_enabled = false;
  std::vector<BlockInstance> scene;
  std::vector<Pose> est;
  double x = -0.2;
  for (const auto& e : plan.entries) {
    scene.push_back({e.model_id, flat_at(e.model_id, x, 0.1, Mat3::Identity())});
    est.push_back(scene.back().pose);
    x += 0.13;
  }
  for (const auto& s : compile_assembly(plan, library(), scene, est, cfg)) {
    EXPECT_FALSE(s.has_calibration());
  }
}

TEST(Compile, InsertionBlockedByEarlierBlock) {
  StructurePlan plan;
  plan.name = "bad order";
  plan.entries = {{"05", Pose::Identity()},
                  {"03", Pose::FromTranslation(Vec3(0, 0, 0.07))},
                  {"01", Pose::FromTranslation(Vec3(0, 0, 0.035))}};
  plan.sequence = {0, 1, 2};
  const PlannerConfig cfg = config_for(plan);
  const std::vector<BlockInstance> scene{{"05", flat_at("05", -0.2, 0, Mat3::Identity())},
                                         {"03", flat_at("03", 0.0, 0.1, Mat3::Identity())},
                                         {"01", flat_at("01", 0.1, -0.1, Mat3::Identity())}};
  std::vector<Pose> est;
  for (const auto& b : scene) est.push_back(b.pose);
  try {
    compile_assembly(plan, library(), scene, est, cfg);
    FAIL() << "expected a blocked insertion";
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.kind(), PlanningError::Kind::BlockedInsertion);
    EXPECT_EQ(e.entry(), 2);
    EXPECT_NE(std::string(e.what()).find("'01'"), std::string::npos);
  }
}

TEST(Compile, BoxedInBlockIsUngraspable) {
  StructurePlan plan;
  plan.entries = {{"01", Pose::Identity()}};
  plan.sequence = {0};
  const PlannerConfig cfg = config_for(plan);
  std::vector<BlockInstance> scene{{"01", flat_at("01", 0, 0, Mat3::Identity())}};
  for (const Eigen::Vector2d& c : {Eigen::Vector2d(0.05, 0), Eigen::Vector2d(-0.05, 0),
                                   Eigen::Vector2d(0, 0.05), Eigen::Vector2d(0, -0.05)}) {
    scene.push_back({"06", flat_at("06", c.x() + 0.01 * c.x() / 0.05, c.y() + 0.01 * c.y() / 0.05,
                                   Mat3::Identity())});
  }
  std::vector<Pose> est;
  for (const auto& b : scene) est.push_back(b.pose);
  try {
    compile_assembly(plan, library(), scene, est, cfg);
    FAIL() << "expected ungraspable";
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.kind(), PlanningError::Kind::Ungraspable);
  }
}

TEST(Compile, MissingModelIsUnassignable) {
  StructurePlan plan;
  plan.entries = {{"01", Pose::Identity()}};
  plan.sequence = {0};
  const PlannerConfig cfg = config_for(plan);
  const std::vector<BlockInstance> scene{{"02", flat_at("02", 0, 0, Mat3::Identity())}};
  try {
    compile_assembly(plan, library(), scene, {scene[0].pose}, cfg);
    FAIL() << "expected unassignable";
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.kind(), PlanningError::Kind::Unassignable);
  }
}

TEST(Compile, GreedyNearestAssignment) {
  StructurePlan plan;
  plan.entries = {{"01", Pose::Identity()}};
  plan.sequence = {0};
  const PlannerConfig cfg = config_for(plan);  // target near x = 0.45
  const std::vector<BlockInstance> scene{{"01", flat_at("01", -0.2, 0, Mat3::Identity())},
                                         {"01", flat_at("01", 0.2, 0, Mat3::Identity())}};
  AssemblyCompiler c(plan, library(), scene, perfect(scene), cfg);
  EXPECT_EQ(c.assignment(0), 1);
}

TEST(Compile, StepStructureAndDeterminism) {
  std::mt19937_64 rng(5);
  for (int s = 1; s <= 4; ++s) {
    const StructurePlan plan = load(s);
    const PlannerConfig cfg = config_for(plan);
    std::vector<BlockInstance> scene;
    double x = -0.45;
    for (const auto& e : plan.entries) {
      scene.push_back({e.model_id, flat_at(e.model_id, x, -0.15, random_flush(rng))});
      x += 0.13;
    }
    std::vector<Pose> est;
    for (const auto& b : scene) est.push_back(b.pose);
    const auto a = compile_assembly(plan, library(), scene, est, cfg);
    const auto b = compile_assembly(plan, library(), scene, est, cfg);
    EXPECT_EQ(trace_to_json(plan, a).dump(), trace_to_json(plan, b).dump());
    const auto targets = resolve_world_poses(plan, cfg.anchor);
    for (const auto& step : a) {
      EXPECT_LE(step.rotation_count(), 2);
      ASSERT_GE(step.actions.size(), 2u);
      const auto& insert = step.actions.back();
      EXPECT_EQ(insert.kind, ActionKind::Insert);
      EXPECT_EQ(step.actions[step.actions.size() - 2].kind, ActionKind::Calibrate);
      // Insert lands on a symmetry equivalent of the entry's target.
      const auto eq = symmetry_equivalents(targets[step.entry], library().at(step.model_id).symmetry);
      EXPECT_TRUE(std::any_of(eq.begin(), eq.end(), [&](const Pose& p) {
        return (p.rotation - insert.result.rotation).norm() < 1e-9 &&
               (p.translation - insert.result.translation).norm() < 1e-12;
      }));
    }
  }
}
