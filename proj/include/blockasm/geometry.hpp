#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <string>
#include <vector>

namespace blockasm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform (object -> parent frame). Rotation stored as a 3x3 matrix.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose Identity() { return {}; }
  static Pose FromTranslation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static Pose FromRotation(const Mat3& r) { return {r, Vec3::Zero()}; }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Eigen::Matrix4d matrix() const;

  /// True when the rotation is orthonormal with det +1 within `tol`.
  bool valid(double tol = 1e-9) const;
};

Pose compose(const Pose& outer, const Pose& inner);
Pose invert(const Pose& p);

/// Nearest rotation in the Frobenius sense (polar factor).
Mat3 orthonormalize(const Mat3& r);

bool is_rotation(const Mat3& r, double tol = 1e-9);

enum class Axis { X = 0, Y = 1, Z = 2 };

struct SignedAxis {
  Axis axis = Axis::Z;
  int sign = 1;

  Vec3 vector() const;
  int index() const { return static_cast<int>(axis); }
  SignedAxis negated() const { return {axis, -sign}; }
  bool operator==(const SignedAxis&) const = default;
  std::string name() const;  // "+Z", "-X", ...
};

/// Signed axes in tie-break priority order: +Z, +X, +Y, -X, -Y, -Z.
const std::array<SignedAxis, 6>& signed_axes();

/// Object-frame axis whose image under `p.rotation` is closest to the
/// vertical of the parent frame. Exact ties resolve by signed_axes() order.
SignedAxis reference_axis(const Pose& p);
SignedAxis reference_axis(const Mat3& r);

struct SymmetryGroup {
  std::vector<Mat3> elements{Mat3::Identity()};

  std::size_t size() const { return elements.size(); }
  /// Contains identity, all elements are rotations, closed under products.
  bool valid(double tol = 1e-9) const;
};

std::vector<Pose> symmetry_equivalents(const Pose& p, const SymmetryGroup& g);

/// Angle of a^T b, in [0, pi].
double geodesic_angle(const Mat3& a, const Mat3& b);

Mat3 axis_angle(const Vec3& axis, double angle);
Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

/// The 24 proper rotations that permute the coordinate axes (with signs).
const std::vector<Mat3>& cube_rotations();

/// Twist angle about world z of `r` (swing-twist split), in (-pi, pi].
double twist_about_z(const Mat3& r);

double wrap_angle(double a);

}  // namespace blockasm
