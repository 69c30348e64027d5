#include "blockasm/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace blockasm {

namespace {

constexpr double kParallelEdgeTolerance = 1e-9;

double projected_radius(const Obb& box, const Vec3& axis) {
  double r = 0.0;
  for (int i = 0; i < 3; ++i) {
    r += box.half_extents[i] * std::abs(box.orientation.col(i).dot(axis));
  }
  return r;
}

}  // namespace

bool Obb::valid() const {
  return center.allFinite() && (half_extents.array() > 0.0).all() &&
         is_rotation(orientation);
}

std::array<Vec3, 8> Obb::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[i] = center + orientation * s.cwiseProduct(half_extents);
  }
  return out;
}

bool Obb::contains(const Vec3& p, double tol) const {
  const Vec3 local = orientation.transpose() * (p - center);
  return (local.cwiseAbs().array() <= half_extents.array() + tol).all();
}

Obb Obb::transformed(const Pose& p) const {
  return {p * center, half_extents, p.rotation * orientation};
}

Obb Obb::inflated(double amount) const {
  return {center, half_extents.array() + amount, orientation};
}

double sat_separation(const Obb& a, const Obb& b) {
  const Vec3 d = b.center - a.center;
  double best = -std::numeric_limits<double>::infinity();
  auto test = [&](const Vec3& axis) {
    const double gap = std::abs(d.dot(axis)) - projected_radius(a, axis) -
                       projected_radius(b, axis);
    best = std::max(best, gap);
  };
  for (int i = 0; i < 3; ++i) test(a.orientation.col(i));
  for (int i = 0; i < 3; ++i) test(b.orientation.col(i));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec3 c = a.orientation.col(i).cross(b.orientation.col(j));
      const double n = c.norm();
      if (n < kParallelEdgeTolerance) continue;
      test(c / n);
    }
  }
  return best;
}

double penetration_depth(const Obb& a, const Obb& b) {
  return std::max(0.0, -sat_separation(a, b));
}

bool obb_intersect(const Obb& a, const Obb& b, double margin) {
  const double half = 0.5 * margin;
  return sat_separation(a.inflated(half), b.inflated(half)) <= 0.0;
}

bool scene_collides(std::span<const Obb> moving, std::span<const Obb> obstacles,
                    double margin) {
  for (const auto& m : moving) {
    for (const auto& o : obstacles) {
      if (obb_intersect(m, o, margin)) return true;
    }
  }
  return false;
}

std::array<Obb, 2> gripper_obbs(const GripperModel& g, const Pose& grasp_pose,
                                double opening) {
  if (!(opening >= 0.0) || opening > g.max_opening) {
    throw std::invalid_argument("gripper opening out of range: " +
                                std::to_string(opening));
  }
  const double x = 0.5 * opening + g.finger_half_extents.x();
  const double z = -g.finger_half_extents.z();
  std::array<Obb, 2> fingers;
  for (int k = 0; k < 2; ++k) {
    const Vec3 local(k == 0 ? -x : x, 0.0, z);
    fingers[k] = {grasp_pose * local, g.finger_half_extents, grasp_pose.rotation};
  }
  return fingers;
}

}  // namespace blockasm
