#pragma once

#include "blockasm/geometry.hpp"

#include <array>
#include <span>

namespace blockasm {

struct Obb {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
  Mat3 orientation = Mat3::Identity();

  bool valid() const;
  std::array<Vec3, 8> corners() const;
  /// Point containment with an outward tolerance.
  bool contains(const Vec3& p, double tol = 0.0) const;
  Obb transformed(const Pose& p) const;
  Obb inflated(double amount) const;
};

/// Largest gap over the 15 separating-axis candidates. Positive: the boxes are
/// apart by at least that much. Negative: they overlap and the magnitude is
/// the penetration depth.
double sat_separation(const Obb& a, const Obb& b);

/// max(0, -sat_separation(a, b)).
double penetration_depth(const Obb& a, const Obb& b);

/// Closed-box overlap test with each box inflated by margin / 2.
bool obb_intersect(const Obb& a, const Obb& b, double margin = 0.0);

/// Pairs within one list are not tested.
bool scene_collides(std::span<const Obb> moving, std::span<const Obb> obstacles,
                    double margin);

/// Two-finger parallel gripper. Grasp frame: x = closure axis, z = approach
/// axis pointing from the gripper toward the object, origin at the fingertip
/// centre. Fingers extend back along -z; `opening` is the gap between pads.
struct GripperModel {
  Vec3 finger_half_extents{0.0075, 0.0125, 0.025};
  double max_opening = 0.140;

  double finger_thickness() const { return 2.0 * finger_half_extents.x(); }
};

std::array<Obb, 2> gripper_obbs(const GripperModel& g, const Pose& grasp_pose,
                                double opening);

}  // namespace blockasm
