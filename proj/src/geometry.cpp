#include "blockasm/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace blockasm {

namespace {

constexpr double kDriftTolerance = 1e-12;

double orthonormality_drift(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose::valid(double tol) const {
  return is_rotation(rotation, tol) && translation.allFinite();
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  return orthonormality_drift(r) < tol && std::abs(r.determinant() - 1.0) < tol;
}

Mat3 orthonormalize(const Mat3& r) {
  // R (R^T R)^{-1/2}
  Eigen::SelfAdjointEigenSolver<Mat3> eig(r.transpose() * r);
  const Vec3 inv_sqrt = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  return r * eig.eigenvectors() * inv_sqrt.asDiagonal() *
         eig.eigenvectors().transpose();
}

Pose compose(const Pose& outer, const Pose& inner) {
  Pose out;
  out.rotation = outer.rotation * inner.rotation;
  out.translation = outer.rotation * inner.translation + outer.translation;
  if (orthonormality_drift(out.rotation) > kDriftTolerance) {
    out.rotation = orthonormalize(out.rotation);
  }
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Vec3 SignedAxis::vector() const {
  Vec3 v = Vec3::Zero();
  v[index()] = sign > 0 ? 1.0 : -1.0;
  return v;
}

std::string SignedAxis::name() const {
  static const char* kNames = "XYZ";
  return std::string(sign > 0 ? "+" : "-") + kNames[index()];
}

const std::array<SignedAxis, 6>& signed_axes() {
  static const std::array<SignedAxis, 6> kAxes{{
      {Axis::Z, 1},
      {Axis::X, 1},
      {Axis::Y, 1},
      {Axis::X, -1},
      {Axis::Y, -1},
      {Axis::Z, -1},
  }};
  return kAxes;
}

SignedAxis reference_axis(const Mat3& r) {
  // <e_z, R v> is the signed z-component of the column picked by v.
  SignedAxis best = signed_axes()[0];
  double best_score = -2.0;
  for (const auto& v : signed_axes()) {
    const double score = v.sign * r(2, v.index());
    if (score > best_score) {
      best_score = score;
      best = v;
    }
  }
  return best;
}

SignedAxis reference_axis(const Pose& p) { return reference_axis(p.rotation); }

bool SymmetryGroup::valid(double tol) const {
  if (elements.empty()) return false;
  bool has_identity = false;
  for (const auto& s : elements) {
    if (!is_rotation(s, tol)) return false;
    if ((s - Mat3::Identity()).cwiseAbs().maxCoeff() < tol) has_identity = true;
  }
  if (!has_identity) return false;
  for (const auto& a : elements) {
    for (const auto& b : elements) {
      const Mat3 ab = a * b;
      const bool found = std::any_of(elements.begin(), elements.end(), [&](const Mat3& c) {
        return (c - ab).cwiseAbs().maxCoeff() < tol;
      });
      if (!found) return false;
    }
  }
  return true;
}

std::vector<Pose> symmetry_equivalents(const Pose& p, const SymmetryGroup& g) {
  std::vector<Pose> out;
  out.reserve(g.size());
  for (const auto& s : g.elements) {
    out.push_back({p.rotation * s, p.translation});
  }
  return out;
}

double geodesic_angle(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// Written out so the fixed axis row and column stay exact.
Mat3 rot_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rot_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

const std::vector<Mat3>& cube_rotations() {
  static const std::vector<Mat3> kRotations = [] {
    std::vector<Mat3> out;
    std::array<int, 3> perm{0, 1, 2};
    do {
      for (int signs = 0; signs < 8; ++signs) {
        Mat3 m = Mat3::Zero();
        for (int row = 0; row < 3; ++row) {
          m(row, perm[row]) = (signs >> row) & 1 ? -1.0 : 1.0;
        }
        if (m.determinant() > 0) out.push_back(m);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  }();
  return kRotations;
}

double twist_about_z(const Mat3& r) {
  return std::atan2(r(1, 0) - r(0, 1), r(0, 0) + r(1, 1));
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

}  // namespace blockasm
