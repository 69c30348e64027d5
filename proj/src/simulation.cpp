#include "blockasm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace blockasm {

namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return std::mt19937_64(seq);
}

Vec3 footprint_half(const BlockModel& model, const Mat3& r) {
  Vec3 half = Vec3::Zero();
  for (const auto& o : model.local_obbs()) {
    for (const auto& c : o.corners()) half = half.cwiseMax((r * c).cwiseAbs());
  }
  return half;
}

Pose random_flush_pose(const BlockModel& model, const SceneBounds& bounds, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> face(0, 5);
  std::uniform_real_distribution<double> yaw(-kPi, kPi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Mat3 r = rot_z(yaw(rng)) * flush_basis(signed_axes()[face(rng)]);
  const Vec3 half = footprint_half(model, r);
  Pose p;
  p.rotation = r;
  for (int k = 0; k < 2; ++k) {
    const double lo = bounds.min[k] + half[k];
    const double hi = bounds.max[k] - half[k];
    if (lo > hi) throw SceneError("scene bounds smaller than block '" + model.id + "'");
    p.translation[k] = lo + (hi - lo) * unit(rng);
  }
  p.translation.z() = bounds.plane_height + model.resting_height(r);
  return p;
}

double corner_deviation(const BlockModel& model, const Pose& actual, const Pose& target,
                        const std::optional<Vec3>& drop_axis) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& eq : symmetry_equivalents(target, model.symmetry)) {
    double worst = 0.0;
    for (const auto& o : model.local_obbs()) {
      for (const auto& c : o.corners()) {
        Vec3 d = actual * c - eq * c;
        if (drop_axis) d -= d.dot(*drop_axis) * *drop_axis;
        worst = std::max(worst, d.norm());
      }
    }
    best = std::min(best, worst);
  }
  return best;
}

}  // namespace

bool NoiseModel::valid() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  return rot_sigma >= 0.0 && trans_sigma >= 0.0 && depth_sigma >= 0.0 &&
         gross_offset_max >= 0.0 && prob(gross_error_prob) && prob(detection_prob);
}

NoiseModel NoiseModel::fitted() {
  NoiseModel n;
  n.trans_sigma = 0.0015;
  n.gross_error_prob = 0.025;
  n.gross_offset_max = 0.05;
  n.detection_prob = 1.0;
  // calibrate_noise(standard_library(), fitted(), {}, 10000, 11), rounded
  n.rot_sigma = 0.0685;
  n.depth_sigma = 0.0111;
  return n;
}

std::string to_string(StepOutcome o) {
  switch (o) {
    case StepOutcome::Success: return "success";
    case StepOutcome::Undetected: return "undetected";
    case StepOutcome::Unassignable: return "unassignable";
    case StepOutcome::Ungraspable: return "ungraspable";
    case StepOutcome::GraspFailed: return "grasp_failed";
    case StepOutcome::CalibrationFailed: return "calibration_failed";
    case StepOutcome::BlockedInsertion: return "blocked_insertion";
    case StepOutcome::Misaligned: return "misaligned";
    case StepOutcome::Wrecked: return "wrecked";
  }
  return "unknown";
}

std::vector<BlockInstance> generate_scene(const BlockLibrary& library,
                                          const std::vector<std::string>& model_ids,
                                          const SceneBounds& bounds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<BlockInstance> scene;
  std::vector<Obb> occupied;
  for (const auto& id : model_ids) {
    const BlockModel& model = library.at(id);
    bool placed = false;
    for (int attempt = 0; attempt < bounds.max_attempts && !placed; ++attempt) {
      const Pose p = random_flush_pose(model, bounds, rng);
      const auto boxes = model.obbs(p);
      if (scene_collides(boxes, occupied, bounds.clearance)) continue;
      scene.push_back({id, p});
      occupied.insert(occupied.end(), boxes.begin(), boxes.end());
      placed = true;
    }
    if (!placed) throw SceneError("scene too crowded");
  }
  return scene;
}

Pose perturb_pose(const Pose& truth, const NoiseModel& noise, const Vec3& depth_axis,
                  std::mt19937_64& rng, bool* detected) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double u_detect = unit(rng);
  const double u_gross = unit(rng);
  const Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
  const double angle = gauss(rng) * noise.rot_sigma;
  const Vec3 iso(gauss(rng), gauss(rng), gauss(rng));
  const double depth = gauss(rng) * noise.depth_sigma;
  const Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  const Vec3 gross_dir(gauss(rng), gauss(rng), gauss(rng));
  const double gross_mag = unit(rng) * noise.gross_offset_max;

  if (detected) *detected = u_detect < noise.detection_prob;
  Pose est = truth;
  if (u_gross < noise.gross_error_prob) {
    const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
    est.rotation = quat.normalized().toRotationMatrix();
    est.translation += gross_mag * gross_dir.normalized();
  } else {
    if (angle != 0.0) est.rotation = truth.rotation * axis_angle(axis, angle);
    est.translation += noise.trans_sigma * iso + depth * depth_axis;
  }
  return est;
}

std::vector<Perception> perceive(const std::vector<BlockInstance>& scene, const NoiseModel& noise,
                                 std::mt19937_64& rng, const Extrinsics& extrinsics) {
  const Pose base_cam = extrinsics.base_cam();
  const Pose cam_base = invert(base_cam);
  const Vec3 depth_axis = base_cam.rotation.col(2);
  std::vector<Perception> out;
  out.reserve(scene.size());
  for (const auto& b : scene) {
    bool detected = false;
    const Pose world = perturb_pose(b.pose, noise, depth_axis, rng, &detected);
    const Pose cam_obj = compose(cam_base, world);
    Perception p;
    p.detected = detected;
    p.estimate = compose(extrinsics.base_flange, compose(extrinsics.flange_cam, cam_obj));
    out.push_back(p);
  }
  return out;
}

TrialReport execute_trial(const StructurePlan& plan, const BlockLibrary& library,
                          const std::vector<BlockInstance>& scene,
                          const std::vector<Perception>& perception,
                          const SimulationConfig& config, std::uint64_t seed) {
  if (perception.size() != scene.size()) {
    throw std::invalid_argument("one perception result per scene block is required");
  }
  TrialReport report;
  report.structure = plan.name;
  report.seed = seed;
  report.blocks = static_cast<int>(scene.size());

  std::vector<std::optional<Pose>> estimates;
  for (const auto& p : perception) {
    estimates.push_back(p.detected ? std::optional<Pose>(p.estimate) : std::nullopt);
    report.detected += p.detected ? 1 : 0;
  }

  std::mt19937_64 actuation = stream(seed, 3);
  const double plane = config.planner.reorientation.plane_height;
  const SqueezeSettings squeeze{config.planner.reorientation.grasp.gripper.max_opening,
                                config.actuation_noise};
  PlannerConfig planner = config.planner;
  planner.anchor = anchor_on_plane(plan, library, config.anchor_xy.x(), config.anchor_xy.y(),
                                   config.anchor_yaw, plane);
  AssemblyCompiler compiler(plan, library, scene, estimates, planner);
  std::vector<Obb> placed;
  bool wrecked = false;

  for (std::size_t k = 0; k < compiler.step_count(); ++k) {
    StepRecord rec;
    rec.entry = plan.sequence[k];
    rec.block_id = plan.entries[rec.entry].model_id;
    auto finish = [&](StepOutcome o) {
      rec.outcome = o;
      rec.success = o == StepOutcome::Success;
      report.steps.push_back(rec);
    };
    if (wrecked) {
      finish(StepOutcome::Wrecked);
      continue;
    }

    auto planned = compiler.plan_step(k);
    if (auto* err = std::get_if<PlanningError>(&planned)) {
      switch (err->kind()) {
        case PlanningError::Kind::Ungraspable: finish(StepOutcome::Ungraspable); break;
        case PlanningError::Kind::BlockedInsertion: finish(StepOutcome::BlockedInsertion); break;
        case PlanningError::Kind::Unassignable: {
          const bool missed = std::any_of(scene.begin(), scene.end(), [&](const auto& b) {
            const auto i = static_cast<std::size_t>(&b - scene.data());
            return b.model_id == rec.block_id && !perception[i].detected;
          });
          finish(missed ? StepOutcome::Undetected : StepOutcome::Unassignable);
          break;
        }
      }
      continue;
    }
    const BlockStepPlan& step = std::get<BlockStepPlan>(planned);
    const BlockModel& model = library.at(step.model_id);
    rec.rotations = step.rotation_count();
    Pose belief = *compiler.estimate(step.scene_index);
    Pose truth = scene[step.scene_index].pose;

    const Vec3 pick_error = belief.translation - truth.translation;
    if (pick_error.head<2>().norm() > config.capture_fraction * model.diameter) {
      finish(StepOutcome::GraspFailed);
      continue;
    }
    rec.grasped = true;

    bool calibration_failed = false;
    for (const auto& a : step.actions) {
      if (a.kind == ActionKind::Calibrate) {
        try {
          truth = calibrate(truth, a.result, model, plane, squeeze, &actuation);
          rec.calibrated = true;
        } catch (const CalibrationError&) {
          calibration_failed = true;
          break;
        }
      } else {
        // The gripper moves the believed pose; the true pose follows rigidly.
        const Pose motion = compose(a.result, invert(belief));
        truth = compose(motion, truth);
      }
      belief = a.result;
    }
    if (calibration_failed) {
      finish(StepOutcome::CalibrationFailed);
      continue;
    }

    const PrimitiveAction& insert = step.actions.back();
    rec.insert_attempted = true;
    rec.insertion_gap =
        corner_deviation(model, truth, step.canonical_target, insert.approach_direction);
    rec.final_error = corner_deviation(model, truth, step.canonical_target, std::nullopt);
    const auto boxes = model.obbs(truth);
    double depth = 0.0;
    for (const auto& b : boxes) {
      for (const auto& c : b.corners()) depth = std::max(depth, plane - c.z());
      for (const auto& o : placed) depth = std::max(depth, penetration_depth(b, o));
    }
    rec.collision_depth = depth;
    placed.insert(placed.end(), boxes.begin(), boxes.end());

    if (rec.insertion_gap < config.gap_tolerance && depth < config.gap_tolerance) {
      finish(StepOutcome::Success);
    } else {
      if (depth > config.wreck_depth) wrecked = true;
      finish(StepOutcome::Misaligned);
    }
  }

  report.success = !report.steps.empty() &&
                   std::all_of(report.steps.begin(), report.steps.end(),
                               [](const StepRecord& s) { return s.success; });
  return report;
}

TrialReport run_trial(const StructurePlan& plan, const BlockLibrary& library,
                      const std::vector<BlockInstance>& scene, const NoiseModel& noise,
                      const SimulationConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng = stream(seed, 2);
  const auto perception = perceive(scene, noise, rng, config.extrinsics);
  return execute_trial(plan, library, scene, perception, config, seed);
}

TrialReport run_trial(const StructurePlan& plan, const BlockLibrary& library,
                      const NoiseModel& noise, const SimulationConfig& config,
                      std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& e : plan.entries) ids.push_back(e.model_id);
  std::mt19937_64 scene_rng = stream(seed, 1);
  const auto scene = generate_scene(library, ids, config.scene, scene_rng());
  return run_trial(plan, library, scene, noise, config, seed);
}

StructureStats summarize(const std::string& name, int blocks,
                         const std::vector<TrialReport>& reports) {
  StructureStats s;
  s.structure = name;
  s.blocks = blocks;
  s.trials = static_cast<int>(reports.size());
  long detected = 0, total = 0, steps = 0, good_steps = 0;
  for (const auto& r : reports) {
    detected += r.detected;
    total += r.blocks;
    steps += static_cast<long>(r.steps.size());
    for (const auto& st : r.steps) good_steps += st.success ? 1 : 0;
    s.successful_trials += r.success ? 1 : 0;
  }
  s.detection_rate = total ? static_cast<double>(detected) / total : 0.0;
  s.step_success_rate = steps ? static_cast<double>(good_steps) / steps : 0.0;
  s.trial_success_rate = s.trials ? static_cast<double>(s.successful_trials) / s.trials : 0.0;
  return s;
}

BatchStats run_batch(const std::vector<StructurePlan>& plans, const BlockLibrary& library,
                     int n_trials, const NoiseModel& noise, const SimulationConfig& config,
                     std::uint64_t base_seed, int jobs) {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
  const std::size_t total = plans.size() * static_cast<std::size_t>(n_trials);
  std::vector<TrialReport> reports(total);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < total; i += stride) {
      const std::size_t p = i / n_trials;
      const std::uint64_t seed = base_seed + i % n_trials;
      reports[i] = run_trial(plans[p], library, noise, config, seed);
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }

  BatchStats stats;
  stats.trial_count = static_cast<int>(total);
  for (std::size_t p = 0; p < plans.size(); ++p) {
    std::vector<TrialReport> mine(reports.begin() + p * n_trials,
                                  reports.begin() + (p + 1) * n_trials);
    stats.rows.push_back(summarize(plans[p].name, static_cast<int>(plans[p].entries.size()), mine));
  }
  stats.mean.structure = "Mean";
  const double n = static_cast<double>(stats.rows.size());
  for (const auto& r : stats.rows) {
    stats.mean.blocks += r.blocks;
    stats.mean.trials += r.trials;
    stats.mean.successful_trials += r.successful_trials;
    stats.mean.detection_rate += r.detection_rate / n;
    stats.mean.step_success_rate += r.step_success_rate / n;
    stats.mean.trial_success_rate += r.trial_success_rate / n;
  }
  stats.reports = std::move(reports);
  return stats;
}

std::string BatchStats::to_csv() const {
  std::ostringstream os;
  os << "structure,blocks,detection_rate,step_success_rate,trial_success_rate,"
        "successful_trials,trials\n";
  char buf[256];
  auto line = [&](const StructureStats& s, bool mean_row) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.1f,%.1f,%.1f,%d,%d\n", s.structure.c_str(),
                  mean_row ? "" : std::to_string(s.blocks).c_str(), 100.0 * s.detection_rate,
                  100.0 * s.step_success_rate, 100.0 * s.trial_success_rate,
                  s.successful_trials, s.trials);
    os << buf;
  };
  for (const auto& r : rows) line(r, false);
  line(mean, true);
  return os.str();
}

std::vector<PoseRecord> synthesize_records(const BlockLibrary& library, const NoiseModel& noise,
                                           std::size_t count, std::uint64_t seed,
                                           const SceneBounds& bounds) {
  if (library.size() == 0) throw std::invalid_argument("empty block library");
  std::mt19937_64 rng(seed);
  std::vector<PoseRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const BlockModel& m = library.models()[i % library.size()];
    PoseRecord r;
    r.object_id = m.id;
    r.ground_truth = random_flush_pose(m, bounds, rng);
    r.estimated = perturb_pose(r.ground_truth, noise, Vec3::UnitZ(), rng);
    out.push_back(r);
  }
  return out;
}

PerceptionRecall perception_recall(const BlockLibrary& library, const NoiseModel& noise,
                                   std::size_t samples, std::uint64_t seed) {
  const auto records = synthesize_records(library, noise, samples, seed);
  std::size_t trans = 0, degcm = 0;
  for (const auto& r : records) {
    const BlockModel& m = library.at(r.object_id);
    if (translation_error(r.estimated, r.ground_truth, m.symmetry) <= 0.02) ++trans;
    if (ncm_ndeg(r.estimated, r.ground_truth, m.symmetry, 5.0, 5.0)) ++degcm;
  }
  const double n = static_cast<double>(records.size());
  return {trans / n, degcm / n};
}

NoiseModel calibrate_noise(const BlockLibrary& library, const NoiseModel& base,
                           const NoiseTargets& targets, std::size_t samples, std::uint64_t seed) {
  NoiseModel noise = base;
  // Both recalls fall monotonically as their sigma grows (shared draws).
  auto bisect = [&](double NoiseModel::*field, double hi, auto recall_of, double target) {
    double lo = 0.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      noise.*field = mid;
      if (recall_of(perception_recall(library, noise, samples, seed)) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    noise.*field = 0.5 * (lo + hi);
  };
  for (int round = 0; round < 2; ++round) {
    bisect(&NoiseModel::depth_sigma, 0.1,
           [](const PerceptionRecall& r) { return r.translation_2cm; }, targets.translation_2cm);
    bisect(&NoiseModel::rot_sigma, 0.5,
           [](const PerceptionRecall& r) { return r.deg5_cm5; }, targets.deg5_cm5);
  }
  return noise;
}

}  // namespace blockasm
