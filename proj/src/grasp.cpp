#include "blockasm/grasp.hpp"

#include <algorithm>
#include <cmath>

namespace blockasm {

Axis GraspCandidate::closure_axis() const {
  return static_cast<Axis>((approach.index() + 1 + closure_plane) % 3);
}

Axis GraspCandidate::free_axis() const {
  return static_cast<Axis>((approach.index() + 2 - closure_plane) % 3);
}

std::vector<GraspCandidate> enumerate_candidates(const BlockModel& model,
                                                 std::optional<double> offset_distance,
                                                 double offset_fraction) {
  const Vec3 center = model.bounds_center();
  std::vector<GraspCandidate> out;
  out.reserve(36);
  for (const auto& approach : signed_axes()) {
    for (int plane = 0; plane < 2; ++plane) {
      GraspCandidate proto;
      proto.approach = approach;
      proto.closure_plane = plane;
      const Vec3 z = -approach.vector();
      Vec3 x = Vec3::Zero();
      x[static_cast<int>(proto.closure_axis())] = 1.0;
      const Vec3 y = z.cross(x);
      Mat3 r;
      r << x, y, z;
      const double offset = offset_distance.value_or(
          offset_fraction * model.extent(proto.free_axis()));
      for (int k = -1; k <= 1; ++k) {
        GraspCandidate c = proto;
        c.offset_index = k;
        c.gripper_pose_obj = {r, center + k * offset * y};
        out.push_back(c);
      }
    }
  }
  return out;
}

double approach_tilt(const Pose& gripper_world) {
  const double c = -gripper_world.rotation(2, 2);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

bool ReachVolume::operator()(const Pose& g) const {
  const Vec3& t = g.translation;
  return (t.array() >= min.array()).all() && (t.array() <= max.array()).all() &&
         approach_tilt(g) <= max_tilt + 1e-12;
}

double grasp_opening(const BlockModel& model, const GraspCandidate& c, double clearance) {
  return model.extent(c.closure_axis()) + clearance;
}

std::array<Obb, 2> candidate_fingers(const BlockModel& model, const GraspCandidate& c,
                                     const Pose& object_pose, const GraspSettings& s) {
  const double opening = std::min(grasp_opening(model, c, s.clearance), s.gripper.max_opening);
  return gripper_obbs(s.gripper, c.world_pose(object_pose), opening);
}

std::vector<GraspCandidate> filter_feasible(std::span<const GraspCandidate> candidates,
                                            const BlockModel& model, const Pose& object_pose,
                                            std::span<const Obb> obstacles,
                                            const GraspSettings& settings,
                                            const ReachPredicate& reach) {
  std::vector<GraspCandidate> out;
  for (const auto& c : candidates) {
    if (grasp_opening(model, c, settings.clearance) > settings.gripper.max_opening) continue;
    if (reach && !reach(c.world_pose(object_pose))) continue;
    const auto fingers = candidate_fingers(model, c, object_pose, settings);
    if (scene_collides(fingers, obstacles, settings.margin)) continue;
    out.push_back(c);
  }
  return out;
}

void sort_by_preference(std::vector<GraspCandidate>& candidates, const Pose& object_pose) {
  auto verticality = [&](const GraspCandidate& c) {
    const Vec3 closure = c.world_pose(object_pose).rotation.col(0);
    return std::abs(closure.z());
  };
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const GraspCandidate& a, const GraspCandidate& b) {
                     const bool ca = a.offset_index == 0, cb = b.offset_index == 0;
                     if (ca != cb) return ca;
                     return verticality(a) < verticality(b) - 1e-9;
                   });
}

std::optional<GraspCandidate> select_pick_grasp(const BlockModel& model,
                                                const Pose& object_pose,
                                                std::span<const Obb> obstacles,
                                                const GraspSettings& settings,
                                                const ReachPredicate& reach) {
  const SignedAxis up = reference_axis(object_pose);
  std::vector<GraspCandidate> descending;
  for (const auto& c : enumerate_candidates(model, {}, settings.offset_fraction)) {
    if (c.approach == up) descending.push_back(c);
  }
  auto feasible = filter_feasible(descending, model, object_pose, obstacles, settings, reach);
  if (feasible.empty()) return std::nullopt;
  sort_by_preference(feasible, object_pose);
  return feasible.front();
}

}  // namespace blockasm
