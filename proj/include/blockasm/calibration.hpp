#pragma once

#include "blockasm/blocks.hpp"
#include "blockasm/geometry.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace blockasm {

/// ZYX split of invert(estimated) * true: rot_xyz = (roll, pitch, yaw) about
/// the estimated object axes, trans_xyz in the estimated object frame.
struct PoseError {
  Vec3 rot_xyz = Vec3::Zero();
  Vec3 trans_xyz = Vec3::Zero();

  double max_abs() const {
    return std::max(rot_xyz.cwiseAbs().maxCoeff(), trans_xyz.cwiseAbs().maxCoeff());
  }
};

PoseError decompose_error(const Pose& estimated, const Pose& truth);
Pose recompose(const Pose& estimated, const PoseError& error);

class CalibrationError : public std::runtime_error {
 public:
  enum class Kind { UnstableSettle, SqueezeMissed };
  CalibrationError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr double kMaxSettleTilt = 0.2;  // rad

/// Object axis pointing most nearly straight down.
SignedAxis down_axis(const Mat3& r);

/// Angle between the down axis and -e_z.
double tilt_from_plane(const Mat3& r);

/// Fixed cube rotation C with C * down = -e_z; flush rotations are Rz(yaw) * C.
const Mat3& flush_basis(const SignedAxis& down);

/// Yaw of `r` about world z relative to the flush basis of its down axis.
double flush_yaw(const Mat3& r);

/// Rotation with the down face flush and the twist about z preserved.
Mat3 flush_rotation(const Mat3& r);

/// Roll/pitch/height eliminated by the plane; x, y and yaw preserved.
Pose plane_settle(const Pose& true_pose, double plane_height, const BlockModel& model,
                  double max_tilt = kMaxSettleTilt);

struct SqueezeSettings {
  double max_opening = 0.140;
  double actuation_noise = 0.0;  // metres (radians for the yaw residual)
};

/// Two orthogonal squeezes along the estimate's horizontal object axes. Moves
/// the flush true pose onto the flush estimate in x, y and yaw.
Pose orthogonal_squeeze(const Pose& true_pose, const Pose& estimated, const BlockModel& model,
                        const SqueezeSettings& settings, std::mt19937_64* rng = nullptr);

/// plane_settle of both poses, then orthogonal_squeeze.
Pose calibrate(const Pose& true_pose, const Pose& estimated, const BlockModel& model,
               double plane_height, const SqueezeSettings& settings,
               std::mt19937_64* rng = nullptr);

}  // namespace blockasm
