#include "blockasm/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace blockasm {

PoseError decompose_error(const Pose& estimated, const Pose& truth) {
  const Pose rel = compose(invert(estimated), truth);
  const Mat3& r = rel.rotation;
  PoseError e;
  e.rot_xyz.x() = std::atan2(r(2, 1), r(2, 2));
  e.rot_xyz.y() = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  e.rot_xyz.z() = std::atan2(r(1, 0), r(0, 0));
  e.trans_xyz = rel.translation;
  return e;
}

Pose recompose(const Pose& estimated, const PoseError& error) {
  const Mat3 r = rot_z(error.rot_xyz.z()) * rot_y(error.rot_xyz.y()) * rot_x(error.rot_xyz.x());
  return compose(estimated, Pose{r, error.trans_xyz});
}

SignedAxis down_axis(const Mat3& r) { return reference_axis(r).negated(); }

double tilt_from_plane(const Mat3& r) {
  const SignedAxis d = down_axis(r);
  const double c = -(r * d.vector()).z();
  return std::acos(std::clamp(c, -1.0, 1.0));
}

const Mat3& flush_basis(const SignedAxis& down) {
  static const std::array<Mat3, 6> kBases = [] {
    std::array<Mat3, 6> out;
    for (int i = 0; i < 6; ++i) {
      const Vec3 d = signed_axes()[i].vector();
      for (const auto& c : cube_rotations()) {
        if ((c * d - Vec3(0, 0, -1)).cwiseAbs().maxCoeff() < 1e-12) {
          out[i] = c;
          break;
        }
      }
    }
    return out;
  }();
  for (int i = 0; i < 6; ++i) {
    if (signed_axes()[i] == down) return kBases[i];
  }
  return kBases[0];
}

double flush_yaw(const Mat3& r) {
  return twist_about_z(r * flush_basis(down_axis(r)).transpose());
}

Mat3 flush_rotation(const Mat3& r) {
  const Mat3& c = flush_basis(down_axis(r));
  return rot_z(twist_about_z(r * c.transpose())) * c;
}

Pose plane_settle(const Pose& true_pose, double plane_height, const BlockModel& model,
                  double max_tilt) {
  if (tilt_from_plane(true_pose.rotation) >= max_tilt) {
    throw CalibrationError(CalibrationError::Kind::UnstableSettle, "unstable settle");
  }
  Pose out;
  out.rotation = flush_rotation(true_pose.rotation);
  out.translation = true_pose.translation;
  out.translation.z() = plane_height + model.resting_height(out.rotation);
  return out;
}

Pose orthogonal_squeeze(const Pose& true_pose, const Pose& estimated, const BlockModel& model,
                        const SqueezeSettings& settings, std::mt19937_64* rng) {
  const SignedAxis down = down_axis(estimated.rotation);
  if (!(down_axis(true_pose.rotation) == down)) {
    throw CalibrationError(CalibrationError::Kind::SqueezeMissed,
                           "squeeze missed: block rests on a different face");
  }
  const double yaw_error = wrap_angle(flush_yaw(true_pose.rotation) - flush_yaw(estimated.rotation));
  if (std::abs(yaw_error) > std::numbers::pi / 4.0) {
    throw CalibrationError(CalibrationError::Kind::SqueezeMissed,
                           "squeeze missed: yaw error beyond face alignment");
  }

  // The two horizontal object axes of the estimate are the squeeze axes.
  const Vec3 delta = true_pose.translation - estimated.translation;
  std::array<Vec3, 2> dirs;
  int k = 0;
  for (int axis = 0; axis < 3; ++axis) {
    if (axis == down.index()) continue;
    dirs[k] = estimated.rotation.col(axis);
    const double width = model.extent(static_cast<Axis>(axis));
    const double capture = 0.5 * (settings.max_opening - width);
    if (std::abs(delta.dot(dirs[k])) > capture) {
      throw CalibrationError(CalibrationError::Kind::SqueezeMissed,
                             "squeeze missed: in-plane error beyond capture range");
    }
    ++k;
  }

  Vec3 residual = Vec3::Zero();
  double yaw_residual = 0.0;
  const double a = settings.actuation_noise;
  if (a > 0.0) {
    if (!rng) throw std::invalid_argument("actuation noise requires a random generator");
    std::uniform_real_distribution<double> u01(0.0, 1.0), sym(-1.0, 1.0);
    const double r = a * std::sqrt(u01(*rng));
    const double theta = 2.0 * std::numbers::pi * u01(*rng);
    residual = r * std::cos(theta) * dirs[0] + r * std::sin(theta) * dirs[1];
    residual.z() = 0.0;
    yaw_residual = a * sym(*rng);
  }

  Pose out;
  out.rotation = rot_z(yaw_residual) * estimated.rotation;
  out.translation = estimated.translation + residual;
  out.translation.z() = true_pose.translation.z();
  return out;
}

Pose calibrate(const Pose& true_pose, const Pose& estimated, const BlockModel& model,
               double plane_height, const SqueezeSettings& settings, std::mt19937_64* rng) {
  const Pose settled = plane_settle(true_pose, plane_height, model);
  const Pose projected = plane_settle(estimated, plane_height, model);
  return orthogonal_squeeze(settled, projected, model, settings, rng);
}

}  // namespace blockasm
