#pragma once

#include "blockasm/blocks.hpp"
#include "blockasm/calibration.hpp"
#include "blockasm/metrics.hpp"
#include "blockasm/planner.hpp"
#include "blockasm/structure.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace blockasm {

/// Perception stub. Rotation noise: random axis, N(0, rot_sigma) angle.
/// Translation noise: isotropic N(0, trans_sigma) plus N(0, depth_sigma) along
/// the camera viewing axis. Gross errors replace the pose with a uniformly
/// random orientation and an offset of up to gross_offset_max.
struct NoiseModel {
  double rot_sigma = 0.0;
  double trans_sigma = 0.0;
  double depth_sigma = 0.0;
  double gross_error_prob = 0.0;
  double gross_offset_max = 0.05;
  double detection_prob = 1.0;

  bool valid() const;
  /// Sigma pair found by calibrate_noise against the validation-set recall.
  static NoiseModel fitted();
  static NoiseModel zero() { return {}; }
};

struct Extrinsics {
  Pose base_flange;
  Pose flange_cam;

  Pose base_cam() const { return compose(base_flange, flange_cam); }
};

struct SceneBounds {
  Eigen::Vector2d min{-0.35, -0.35};
  Eigen::Vector2d max{0.35, 0.35};
  double plane_height = 0.0;
  double clearance = 0.002;
  int max_attempts = 1000;
};

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Random stable face, uniform yaw and position; pairwise clearance enforced
/// by rejection. Throws SceneError("scene too crowded").
std::vector<BlockInstance> generate_scene(const BlockLibrary& library,
                                          const std::vector<std::string>& model_ids,
                                          const SceneBounds& bounds, std::uint64_t seed);

struct Perception {
  bool detected = false;
  Pose estimate;  // base frame, via base <- flange <- camera
};

/// Always consumes the same number of variates per block, so two noise models
/// evaluated with one seed share their underlying draws.
Pose perturb_pose(const Pose& truth, const NoiseModel& noise, const Vec3& depth_axis,
                  std::mt19937_64& rng, bool* detected = nullptr);

std::vector<Perception> perceive(const std::vector<BlockInstance>& scene, const NoiseModel& noise,
                                 std::mt19937_64& rng, const Extrinsics& extrinsics = {});

struct SimulationConfig {
  PlannerConfig planner;  // planner.anchor is replaced per plan, see anchor_xy
  Eigen::Vector2d anchor_xy{0.45, 0.0};  // entry 0 rests on the plane here
  double anchor_yaw = 0.0;
  SceneBounds scene;
  Extrinsics extrinsics;
  double capture_fraction = 0.10;  // of the block diameter, in-plane error at pick
  double gap_tolerance = 0.001;
  double wreck_depth = 0.001;
  double actuation_noise = 0.00005;
};

enum class StepOutcome {
  Success,
  Undetected,
  Unassignable,
  Ungraspable,
  GraspFailed,
  CalibrationFailed,
  BlockedInsertion,
  Misaligned,
  Wrecked,
};

std::string to_string(StepOutcome o);

struct StepRecord {
  int entry = 0;
  std::string block_id;
  StepOutcome outcome = StepOutcome::Success;
  bool grasped = false;
  int rotations = 0;
  bool calibrated = false;
  bool insert_attempted = false;
  double insertion_gap = 0.0;
  double collision_depth = 0.0;
  double final_error = 0.0;
  bool success = false;
};

struct TrialReport {
  std::string structure;
  std::uint64_t seed = 0;
  int blocks = 0;
  int detected = 0;
  std::vector<StepRecord> steps;
  bool success = false;
};

/// Executes the compiled steps on simulated true state using the given
/// perception results.
TrialReport execute_trial(const StructurePlan& plan, const BlockLibrary& library,
                          const std::vector<BlockInstance>& scene,
                          const std::vector<Perception>& perception,
                          const SimulationConfig& config, std::uint64_t seed);

/// Perceives `scene` then executes.
TrialReport run_trial(const StructurePlan& plan, const BlockLibrary& library,
                      const std::vector<BlockInstance>& scene, const NoiseModel& noise,
                      const SimulationConfig& config, std::uint64_t seed);

/// Generates the scene from the plan's blocks, then run_trial.
TrialReport run_trial(const StructurePlan& plan, const BlockLibrary& library,
                      const NoiseModel& noise, const SimulationConfig& config,
                      std::uint64_t seed);

struct StructureStats {
  std::string structure;
  int blocks = 0;
  int trials = 0;
  int successful_trials = 0;
  double detection_rate = 0.0;
  double step_success_rate = 0.0;
  double trial_success_rate = 0.0;
};

struct BatchStats {
  std::vector<StructureStats> rows;
  StructureStats mean;  // arithmetic mean of the rows
  int trial_count = 0;
  std::vector<TrialReport> reports;

  std::string to_csv() const;
};

StructureStats summarize(const std::string& name, int blocks,
                         const std::vector<TrialReport>& reports);

/// Trials use seeds base_seed .. base_seed + n_trials - 1 for every plan.
/// Results do not depend on `jobs`.
BatchStats run_batch(const std::vector<StructurePlan>& plans, const BlockLibrary& library,
                     int n_trials, const NoiseModel& noise, const SimulationConfig& config,
                     std::uint64_t base_seed, int jobs = 1);

/// Synthetic (estimate, ground truth) records for every library block.
std::vector<PoseRecord> synthesize_records(const BlockLibrary& library, const NoiseModel& noise,
                                           std::size_t count, std::uint64_t seed,
                                           const SceneBounds& bounds = {});

struct PerceptionRecall {
  double translation_2cm = 0.0;
  double deg5_cm5 = 0.0;
};

PerceptionRecall perception_recall(const BlockLibrary& library, const NoiseModel& noise,
                                   std::size_t samples, std::uint64_t seed);

struct NoiseTargets {
  double translation_2cm = 0.9071;
  double deg5_cm5 = 0.7763;
};

/// Bisection on depth_sigma (2 cm recall) and rot_sigma (5 deg 5 cm recall)
/// with common random numbers; other fields of `base` stay fixed.
NoiseModel calibrate_noise(const BlockLibrary& library, const NoiseModel& base,
                           const NoiseTargets& targets, std::size_t samples, std::uint64_t seed);

}  // namespace blockasm
