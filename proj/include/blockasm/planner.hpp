#pragma once

#include "blockasm/blocks.hpp"
#include "blockasm/grasp.hpp"
#include "blockasm/structure.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace blockasm {

enum class ActionKind { PickPlace, RotateHorizontal, YawAlign, Insert, Calibrate };

std::string to_string(ActionKind kind);

/// `result` is the block pose the robot expects once the action completes.
struct PrimitiveAction {
  ActionKind kind = ActionKind::PickPlace;
  std::optional<GraspCandidate> grasp;
  Axis rotation_axis = Axis::Y;  // RotateHorizontal: base X or Y
  double angle = 0.0;            // RotateHorizontal / YawAlign, radians
  Pose result;
  Vec3 approach_direction = Vec3::UnitZ();  // Insert
  double approach_distance = 0.0;           // Insert
};

struct BlockStepPlan {
  int entry = 0;        // structure entry index
  int scene_index = 0;  // block instance index in the scene
  std::string model_id;
  Pose canonical_target;
  std::vector<PrimitiveAction> actions;

  int rotation_count() const;
  bool has_calibration() const;
};

struct ReorientationOptions {
  Pose workspace = Pose::FromTranslation(Vec3(0.0, -0.45, 0.0));  // x, y on the plane
  double plane_height = 0.0;
  bool allow_single_flip = true;
  GraspSettings grasp;
};

/// 0 when the reference axes agree in the object frame, 1 when orthogonal,
/// 2 when anti-parallel.
int rotations_needed(const Pose& current, const Pose& target);

/// Up to two horizontal rotations at the workspace followed by one YawAlign.
/// The target must be flush (one object axis vertical).
std::vector<PrimitiveAction> plan_reorientation(const BlockModel& model, const Pose& current,
                                                const Pose& canonical_target,
                                                const ReorientationOptions& options);

/// Noise-free replay of the orientation effects of `actions`.
Mat3 replay_orientation(const Mat3& start, const std::vector<PrimitiveAction>& actions);

/// Yaw left for the final YawAlign of a reorientation plan.
double residual_yaw(const std::vector<PrimitiveAction>& actions);

/// Lexicographic cost over symmetry equivalents: (rotations, |yaw|, geodesic).
Pose choose_canonical_target(const BlockModel& model, const Pose& estimated, const Pose& target,
                             const ReorientationOptions& options);

class PlanningError : public std::runtime_error {
 public:
  enum class Kind { Ungraspable, BlockedInsertion, Unassignable };
  PlanningError(Kind kind, int entry, const std::string& what)
      : std::runtime_error(what), kind_(kind), entry_(entry) {}
  Kind kind() const { return kind_; }
  int entry() const { return entry_; }

 private:
  Kind kind_;
  int entry_;
};

struct PlannerConfig {
  ReorientationOptions reorientation;
  ReachPredicate reach = ReachVolume{};
  Pose anchor;  // world pose of structure entry 0
  bool calibration_enabled = true;
  double approach_distance = 0.05;
  double approach_step = 0.002;
  double contact_tolerance = 1e-6;
  // Scene blocks lie on the work plane, so the estimated height is replaced
  // by the resting height of the estimated orientation.
  bool snap_to_plane = true;
};

/// `p` lowered or raised until its lowest corner touches the plane.
Pose rest_on_plane(const BlockModel& model, const Pose& p, double plane_height);

/// Compiles one step at a time while threading placement state; a failed step
/// leaves the state untouched so later steps can still be attempted.
class AssemblyCompiler {
 public:
  /// `estimates[i]` is empty for blocks that were not detected.
  AssemblyCompiler(const StructurePlan& plan, const BlockLibrary& library,
                   std::vector<BlockInstance> scene, std::vector<std::optional<Pose>> estimates,
                   PlannerConfig config);

  std::size_t step_count() const { return plan_.sequence.size(); }
  const std::vector<Pose>& targets() const { return targets_; }
  /// Scene index assigned to structure entry `entry`, or -1.
  int assignment(int entry) const { return assignment_[entry]; }
  /// Estimate the planner works from (after plane snapping).
  const std::optional<Pose>& estimate(std::size_t scene_index) const {
    return estimates_[scene_index];
  }

  /// Plans sequence position `step`; on success the block counts as placed.
  std::variant<BlockStepPlan, PlanningError> plan_step(std::size_t step);

 private:
  std::vector<Obb> obstacles_excluding(int scene_index) const;
  std::optional<GraspCandidate> insertion_grasp(const BlockModel& model, const Pose& target) const;

  StructurePlan plan_;
  const BlockLibrary& library_;
  std::vector<BlockInstance> scene_;
  std::vector<std::optional<Pose>> estimates_;
  PlannerConfig config_;
  std::vector<Pose> targets_;
  std::vector<int> assignment_;
  std::vector<bool> moved_;
  std::vector<Obb> placed_;
};

/// All steps in sequence order; throws PlanningError on the first failure.
std::vector<BlockStepPlan> compile_assembly(const StructurePlan& plan, const BlockLibrary& library,
                                            const std::vector<BlockInstance>& scene,
                                            const std::vector<Pose>& estimates,
                                            const PlannerConfig& config);

}  // namespace blockasm
