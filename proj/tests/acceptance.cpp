// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include "blockasm/calibration.hpp"
#include "blockasm/collision.hpp"
#include "blockasm/grasp.hpp"
#include "blockasm/io.hpp"
#include "blockasm/metrics.hpp"
#include "blockasm/planner.hpp"
#include "blockasm/simulation.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <tuple>

#include <unistd.h>

using namespace blockasm;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

const BlockLibrary& lib() {
  static const BlockLibrary l(standard_library());
  return l;
}

StructurePlan structure(int k) {
  return plan_from_json(read_json(std::string(BLOCKASM_DATA_DIR) + "/structures/structure" +
                                  std::to_string(k) + ".json"));
}

std::vector<StructurePlan> all_structures() {
  return {structure(1), structure(2), structure(3), structure(4)};
}

struct Outcome {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Flush orientation: shortest turn taking the lowest object axis onto -z.
Mat3 oracle_flush(const Mat3& r) {
  int best = 0;
  double lowest = 2.0;
  Vec3 d;
  for (int i = 0; i < 3; ++i) {
    for (int s : {1, -1}) {
      Vec3 v = Vec3::Zero();
      v[i] = s;
      const double z = (r * v).z();
      if (z < lowest) {
        lowest = z;
        d = v;
        best = i;
      }
    }
  }
  (void)best;
  const Vec3 down = r * d;
  if ((down + Vec3::UnitZ()).norm() < 1e-15) return r;
  return Eigen::Quaterniond::FromTwoVectors(down, -Vec3::UnitZ()).toRotationMatrix() * r;
}

Mat3 oracle_replay(const Mat3& start, const std::vector<PrimitiveAction>& actions) {
  Mat3 r = start;
  for (const auto& a : actions) {
    const Vec3 axis = a.rotation_axis == Axis::X ? Vec3::UnitX() : Vec3::UnitY();
    switch (a.kind) {
      case ActionKind::PickPlace:
      case ActionKind::Insert: r = a.result.rotation; break;
      case ActionKind::RotateHorizontal: r = oracle::rotation_about(axis, a.angle) * r; break;
      case ActionKind::YawAlign:
        r = oracle::rotation_about(Vec3::UnitZ(), a.angle) * oracle_flush(r);
        break;
      case ActionKind::Calibrate: break;
    }
  }
  return r;
}

Mat3 random_flush(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> face(0, 5);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  const int f = face(rng);
  Vec3 d = Vec3::Zero();
  d[f % 3] = f < 3 ? 1 : -1;
  const Mat3 tilt = (d + Vec3::UnitZ()).norm() < 1e-12
                        ? Mat3::Identity()
                        : (d - Vec3::UnitZ()).norm() < 1e-12
                              ? oracle::rotation_about(Vec3::UnitX(), kPi)
                              : Eigen::Quaterniond::FromTwoVectors(d, -Vec3::UnitZ())
                                    .toRotationMatrix();
  return oracle::rotation_about(Vec3::UnitZ(), yaw(rng)) * tilt;
}

// ---- criteria --------------------------------------------------------------

Outcome reference_axis_check() {
  Outcome o;
  std::mt19937_64 rng(101);
  for (int i = 0; i < 10000; ++i) {
    const Mat3 r = oracle::random_rotation(rng);
    const SignedAxis got = reference_axis(r);
    const double got_z = (r * got.vector()).z();
    for (const auto& a : signed_axes()) {
      if ((r * a.vector()).z() > got_z) o.fail("axis " + got.name() + " not maximal");
    }
    const auto [axis, sign] = oracle::reference_axis(r);
    if (axis != got.index() || sign != got.sign) o.fail("differs from priority scan");
    if (got_z < 1.0 / std::sqrt(3.0) - 1e-15) o.fail(fmt("vertical component %.6f", got_z));
  }
  return o;
}

Outcome two_rotation_check() {
  Outcome o;
  std::mt19937_64 rng(202);
  const auto& models = lib().models();
  std::uniform_int_distribution<std::size_t> pick(0, models.size());
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> small(-0.15, 0.15);
  int max_turns = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = pick(rng);
    static const BlockModel trivial = [] {
      BlockModel t = make_cuboid("t", Vec3(0.045, 0.03, 0.02));
      t.symmetry = SymmetryGroup{};
      return t;
    }();
    const BlockModel* m = k == models.size() ? &trivial : &models[k];
    Mat3 cur = random_flush(rng);
    if (coin(rng)) {
      // Perceived orientations are rarely exactly flush.
      cur = oracle::rotation_about(Vec3::UnitX(), small(rng)) *
            oracle::rotation_about(Vec3::UnitY(), small(rng)) * cur;
    }
    const Pose current{cur, Vec3(0.1, -0.1, 0.03)};
    const Pose target{random_flush(rng), Vec3(0.45, 0.0, 0.05)};
    ReorientationOptions opt;
    opt.allow_single_flip = coin(rng);
    const Pose canonical = choose_canonical_target(*m, current, target, opt);
    const auto actions = plan_reorientation(*m, current, canonical, opt);
    int turns = 0;
    for (const auto& a : actions) turns += a.kind == ActionKind::RotateHorizontal;
    max_turns = std::max(max_turns, turns);
    if (turns > 2) o.fail("more than two rotations");
    const double err = (oracle_replay(cur, actions) - canonical.rotation).norm();
    if (err > 1e-9) o.fail(fmt("replay misses canonical target by %.3g", err));
  }
  if (o.ok) o.detail = "max rotations " + std::to_string(max_turns);
  return o;
}

Outcome grasp_structure_check() {
  Outcome o;
  for (const auto& m : lib().models()) {
    const auto cands = enumerate_candidates(m);
    if (cands.size() != 36) o.fail(m.id + ": " + std::to_string(cands.size()) + " candidates");
    std::map<std::tuple<int, int, int, int>, int> seen;
    for (const auto& c : cands) {
      ++seen[{c.approach.index(), c.approach.sign, c.closure_plane, c.offset_index}];
      const Mat3& r = c.gripper_pose_obj.rotation;
      if ((r.transpose() * r - Mat3::Identity()).norm() > 1e-12 || r.determinant() < 0)
        o.fail(m.id + ": gripper frame not a rotation");
      if ((r.col(2) + c.approach.vector()).norm() > 1e-12) o.fail(m.id + ": approach mismatch");
      const int closure = static_cast<int>(c.closure_axis());
      const int free = static_cast<int>(c.free_axis());
      if (closure == c.approach.index() || free == c.approach.index() || closure == free)
        o.fail(m.id + ": axes not distinct");
      if (std::abs(std::abs(r.col(0)[closure]) - 1.0) > 1e-12) o.fail(m.id + ": closure axis");
      const Vec3 expected_origin =
          m.bounds_center() + Vec3::Unit(free) * (r.col(1)[free] * c.offset_index * 0.25 *
                                                  m.extent(static_cast<Axis>(free)));
      if ((c.gripper_pose_obj.translation - expected_origin).norm() > 1e-12)
        o.fail(m.id + ": offset position");
    }
    if (seen.size() != 36) o.fail(m.id + ": duplicate candidates");
  }
  return o;
}

Outcome collision_oracle_check() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> h(0.005, 0.04);
  int compared = 0, skipped = 0;
  for (int i = 0; i < 1000; ++i) {
    const Obb a{oracle::random_vector(rng, 0.05), Vec3(h(rng), h(rng), h(rng)),
                oracle::random_rotation(rng)};
    const Obb b{oracle::random_vector(rng, 0.05), Vec3(h(rng), h(rng), h(rng)),
                oracle::random_rotation(rng)};
    const double sep = sat_separation(a, b);
    if (std::abs(sep) < 0.001) {
      ++skipped;
      continue;
    }
    ++compared;
    const auto s = oracle::sampled_contact({a.center, a.half_extents, a.orientation},
                                           {b.center, b.half_extents, b.orientation}, 0.001);
    if (obb_intersect(a, b, 0.0) != s.intersect) o.fail("verdict differs on pair " + std::to_string(i));
  }
  if (o.ok) o.detail = std::to_string(compared) + " compared, " + std::to_string(skipped) + " within 1 mm";
  return o;
}

Outcome calibration_check() {
  Outcome o;
  const BlockModel& m = lib().at("08");
  const SqueezeSettings exact{0.140, 0.0};
  const double capture = 0.5 * (0.140 - m.extent(Axis::X));
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> yaw(-kPi, kPi), xy(-0.2, 0.2), unit(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose est{oracle::rotation_about(Vec3::UnitZ(), yaw(rng)), Vec3(xy(rng), xy(rng), 0.02)};
    // Tilt components sum below 0.2 rad; in-plane offset inside the capture range.
    const Mat3 err = oracle::rotation_about(Vec3::UnitZ(), 0.6 * unit(rng)) *
                     oracle::rotation_about(Vec3::UnitY(), 0.09 * unit(rng)) *
                     oracle::rotation_about(Vec3::UnitX(), 0.09 * unit(rng));
    const Vec3 off(0.9 * capture * unit(rng), 0.9 * capture * unit(rng), 0.003 * unit(rng));
    const Pose truth = compose(est, Pose{err, off});
    const Pose out = calibrate(truth, est, m, 0.0, exact);
    const Pose reference = plane_settle(est, 0.0, m);
    worst = std::max(worst, decompose_error(reference, out).max_abs());

    const Pose settled = plane_settle(truth, 0.0, m);
    if (settled.translation.x() != truth.translation.x() ||
        settled.translation.y() != truth.translation.y())
      o.fail("plane settle moved x/y");
    if (std::abs(wrap_angle(flush_yaw(settled.rotation) - flush_yaw(truth.rotation))) > 1e-12)
      o.fail("plane settle changed yaw");
    const Pose squeezed = orthogonal_squeeze(settled, reference, m, exact);
    if (squeezed.translation.z() != settled.translation.z()) o.fail("squeeze moved z");
    if (!(down_axis(squeezed.rotation) == down_axis(settled.rotation)))
      o.fail("squeeze changed resting face");
    const Pose twice = calibrate(out, est, m, 0.0, exact);
    if (twice.translation != out.translation || (twice.rotation - out.rotation).norm() > 1e-15)
      o.fail("not idempotent");
  }
  if (worst > 1e-9) o.fail(fmt("residual %.3g", worst));
  if (o.ok) o.detail = fmt("max residual %.2g", worst);
  return o;
}

Outcome metrics_check() {
  Outcome o;
  std::mt19937_64 rng(606);
  const BlockModel& m4 = lib().at("04");
  for (int i = 0; i < 1000; ++i) {
    const Pose gt{oracle::random_rotation(rng), oracle::random_vector(rng, 0.3)};
    const Pose est{oracle::random_rotation(rng), gt.translation + oracle::random_vector(rng, 0.02)};
    if (adds_error(est, gt, m4.surface_points) > add_error(est, gt, m4.surface_points) + 1e-15)
      o.fail("ADD-S above ADD");
    const Vec3 t = oracle::random_vector(rng, 0.05);
    const Pose shifted{gt.rotation, gt.translation + t};
    if (std::abs(add_error(shifted, gt, m4.surface_points) - t.norm()) > 1e-12)
      o.fail("translation ADD differs from offset norm");
  }
  for (const auto& m : lib().models()) {
    const Pose gt{oracle::rotation_about(Vec3(1, 2, 3).normalized(), 0.7), Vec3(0.1, 0.2, 0.0)};
    for (const auto& s : m.symmetry.elements) {
      const Pose flipped{gt.rotation * s, gt.translation};
      if (adds_error(flipped, gt, m.surface_points) > 2.0 * kDefaultSamplingSpacing)
        o.fail(m.id + ": symmetric flip ADD-S too large");
    }
  }
  const auto records = synthesize_records(lib(), NoiseModel::fitted(), 2000, 607);
  RecallThresholds tight, loose;
  loose.deg = 10;
  loose.cm = 10;
  loose.translation_cm = 4;
  const auto a = build_recall_table(records, lib(), tight);
  const auto b = build_recall_table(records, lib(), loose);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& r = a.rows[i];
    if (!(r.add[0] <= r.add[1] && r.add[1] <= r.add[2])) o.fail("ADD recall not monotone");
    if (b.rows[i].deg_cm < r.deg_cm || b.rows[i].translation < r.translation)
      o.fail("recall not monotone in thresholds");
  }
  return o;
}

NoiseModel g_fitted;  // criterion 7 result, reused by 8 and 9

Outcome noise_check() {
  Outcome o;
  g_fitted = calibrate_noise(lib(), NoiseModel::fitted(), {}, 10000, 11);
  const auto r = perception_recall(lib(), g_fitted, 10000, 11);
  const auto fresh = perception_recall(lib(), g_fitted, 10000, 7007);
  for (const auto& x : {r, fresh}) {
    if (std::abs(x.translation_2cm - 0.907) > 0.02) o.fail(fmt("2cm recall %.4f", x.translation_2cm));
    if (std::abs(x.deg5_cm5 - 0.776) > 0.03) o.fail(fmt("5deg5cm recall %.4f", x.deg5_cm5));
  }
  if (o.ok)
    o.detail = fmt("depth_sigma %.4f rot_sigma %.4f -> 2cm %.4f, 5deg5cm %.4f", g_fitted.depth_sigma,
                   g_fitted.rot_sigma, r.translation_2cm, r.deg5_cm5);
  return o;
}

Outcome structure_rates_check() {
  Outcome o;
  const auto s = run_batch(all_structures(), lib(), 200, g_fitted, {}, 1, 8);
  const double mean = 100.0 * s.mean.trial_success_rate;
  if (std::abs(mean - 86.7) > 15.0) o.fail(fmt("mean trial success %.1f%%", mean));
  for (const auto& row : s.rows) {
    if (row.detection_rate != 1.0) o.fail(row.structure + " detection below 100%");
  }
  if (o.ok) {
    o.detail = fmt("mean trial success %.1f%% (", mean);
    for (const auto& row : s.rows) o.detail += fmt("%.1f ", 100.0 * row.trial_success_rate);
    o.detail.back() = ')';
  }
  return o;
}

Outcome ablation_check() {
  Outcome o;
  const std::vector<StructurePlan> four{structure(1)};
  SimulationConfig off;
  off.planner.calibration_enabled = false;
  const auto without = run_batch(four, lib(), 500, g_fitted, off, 1, 8);
  const auto with = run_batch(four, lib(), 500, g_fitted, {}, 1, 8);
  const double a = 100.0 * without.mean.trial_success_rate;
  const double b = 100.0 * with.mean.trial_success_rate;
  if (a > 20.0) o.fail(fmt("without calibration %.1f%%", a));
  if (b - a < 30.0) o.fail(fmt("gap %.1f pp", b - a));
  if (o.ok) o.detail = fmt("without %.1f%%, with %.1f%%", a, b);
  return o;
}

Outcome zero_noise_check() {
  Outcome o;
  SimulationConfig cfg;
  cfg.actuation_noise = 0.0;
  const auto s = run_batch(all_structures(), lib(), 15, NoiseModel::zero(), cfg, 1, 4);
  double worst = 0.0;
  for (const auto& r : s.reports) {
    if (!r.success) o.fail(r.structure + " failed at seed " + std::to_string(r.seed));
    for (const auto& st : r.steps) worst = std::max(worst, st.final_error);
  }
  if (worst >= 1e-6) o.fail(fmt("final error %.3g m", worst));
  if (o.ok) o.detail = fmt("%.0f trials, max final error %.2g m", s.trial_count, worst);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism_check() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("blockasm_accept_" + std::to_string(::getpid()));
  std::string plans;
  for (int k = 1; k <= 4; ++k)
    plans += " \"" + std::string(BLOCKASM_DATA_DIR) + "/structures/structure" + std::to_string(k) + ".json\"";
  std::vector<std::string> csv;
  int run = 0;
  for (const char* jobs : {"1", "1", "4"}) {
    const fs::path out = root / std::to_string(run++);
    const std::string cmd = std::string("\"") + BLOCKASM_CLI + "\" simulate" + plans +
                            " --trials 15 --seed 7 --jobs " + jobs + " --out \"" + out.string() +
                            "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) {
      o.fail("simulate exited nonzero");
      break;
    }
    csv.push_back(slurp(out / "report.csv"));
  }
  fs::remove_all(root);
  if (o.ok) {
    if (csv[0].empty()) o.fail("empty report");
    if (csv[0] != csv[1]) o.fail("repeated run differs");
    if (csv[0] != csv[2]) o.fail("run with 4 jobs differs");
  }
  if (o.ok) o.detail = std::to_string(csv[0].size()) + " identical bytes x3";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "reference axis", 1.0, reference_axis_check},
      {2, "two-rotation sufficiency", 10.0, two_rotation_check},
      {3, "grasp enumeration", 0.0, grasp_structure_check},
      {4, "collision oracle equivalence", 30.0, collision_oracle_check},
      {5, "calibration elimination", 5.0, calibration_check},
      {6, "metric identities", 30.0, metrics_check},
      {7, "noise calibration", 60.0, noise_check},
      {8, "structure success rates", 120.0, structure_rates_check},
      {9, "calibration ablation", 60.0, ablation_check},
      {10, "zero-noise assembly", 10.0, zero_noise_check},
      {11, "determinism", 0.0, determinism_check},
  };
  (void)lib();  // sampling is shared setup, not part of any timed check
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && s > c.limit_s) o.fail(fmt("took %.1f s, limit %.0f s", s, c.limit_s));
    failures += !o.ok;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.ok ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
