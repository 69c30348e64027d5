#pragma once

#include "blockasm/blocks.hpp"
#include "blockasm/collision.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace blockasm {

/// One of the 36 per-block gripper placements, expressed in the object frame.
struct GraspCandidate {
  SignedAxis approach;    // object-frame side the gripper comes from
  int closure_plane = 0;  // 0: closes along the next axis (cyclic), 1: the one after
  int offset_index = 0;   // -1, 0, +1
  Pose gripper_pose_obj;

  Axis closure_axis() const;
  Axis free_axis() const;
  Pose world_pose(const Pose& object_pose) const {
    return compose(object_pose, gripper_pose_obj);
  }
};

inline constexpr double kDefaultOffsetFraction = 0.25;

/// 6 approach sides x 2 closure planes x 3 positions. Without an explicit
/// offset distance each model uses offset_fraction x its extent along the free axis.
std::vector<GraspCandidate> enumerate_candidates(const BlockModel& model,
                                                 std::optional<double> offset_distance = {},
                                                 double offset_fraction = kDefaultOffsetFraction);

using ReachPredicate = std::function<bool(const Pose& gripper_world)>;

struct ReachVolume {
  Vec3 min{-0.5, -0.8, -0.1};
  Vec3 max{0.9, 0.5, 0.7};
  double max_tilt = 100.0 * 3.14159265358979323846 / 180.0;  // from straight down

  bool operator()(const Pose& gripper_world) const;
};

/// Angle between the gripper approach axis and straight down.
double approach_tilt(const Pose& gripper_world);

struct GraspSettings {
  GripperModel gripper;
  double clearance = 0.004;  // opening beyond the block width before closing
  double margin = 0.0005;
  double offset_fraction = kDefaultOffsetFraction;
};

double grasp_opening(const BlockModel& model, const GraspCandidate& c, double clearance);

std::array<Obb, 2> candidate_fingers(const BlockModel& model, const GraspCandidate& c,
                                     const Pose& object_pose, const GraspSettings& s);

/// Keeps collision-free, reachable candidates in their input order.
std::vector<GraspCandidate> filter_feasible(std::span<const GraspCandidate> candidates,
                                            const BlockModel& model, const Pose& object_pose,
                                            std::span<const Obb> obstacles,
                                            const GraspSettings& settings,
                                            const ReachPredicate& reach);

/// Stable sort: centre grasps first, then the most horizontal closure axis.
void sort_by_preference(std::vector<GraspCandidate>& candidates, const Pose& object_pose);

/// Descending grasp along the reference axis; nullopt means "ungraspable".
std::optional<GraspCandidate> select_pick_grasp(const BlockModel& model,
                                                const Pose& object_pose,
                                                std::span<const Obb> obstacles,
                                                const GraspSettings& settings,
                                                const ReachPredicate& reach);

}  // namespace blockasm
