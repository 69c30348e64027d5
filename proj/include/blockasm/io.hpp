#pragma once

#include "blockasm/blocks.hpp"
#include "blockasm/metrics.hpp"
#include "blockasm/planner.hpp"
#include "blockasm/simulation.hpp"
#include "blockasm/structure.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blockasm {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Malformed or unreadable input; the CLI maps it to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Pose: {"rotation": 9 numbers row-major, "translation": 3 numbers}
json pose_to_json(const Pose& p);
Pose pose_from_json(const json& j);

json plan_to_json(const StructurePlan& plan);
StructurePlan plan_from_json(const json& j);

struct SceneFile {
  std::vector<BlockInstance> blocks;
  std::vector<std::optional<Pose>> estimates;  // same length as blocks
};

json scene_to_json(const std::vector<BlockInstance>& blocks,
                   const std::vector<std::optional<Pose>>& estimates = {});
SceneFile scene_from_json(const json& j);

json library_to_json(const BlockLibrary& library, std::uint64_t seed = kDefaultSamplingSeed);
/// Surface points are resampled; symmetry comes from the file when present.
BlockLibrary library_from_json(const json& j, double spacing = kDefaultSamplingSpacing);

json records_to_json(const std::vector<PoseRecord>& records);
std::vector<PoseRecord> records_from_json(const json& j);

json trace_to_json(const StructurePlan& plan, const std::vector<BlockStepPlan>& steps);
json batch_to_json(const BatchStats& stats);

/// Every tunable in one flat object. Omitted keys keep their defaults.
struct Config {
  Vec3 finger_half_extents{0.0075, 0.0125, 0.025};
  double max_opening = 0.140;
  double grasp_clearance = 0.004;
  double grasp_margin = 0.0005;
  double grasp_offset_fraction = kDefaultOffsetFraction;

  Vec3 reach_min{-0.5, -0.8, -0.1};
  Vec3 reach_max{0.9, 0.5, 0.7};
  double reach_max_tilt_deg = 100.0;

  double plane_height = 0.0;
  Eigen::Vector2d workspace_xy{0.0, -0.45};
  Eigen::Vector2d anchor_xy{0.45, 0.0};
  double anchor_yaw = 0.0;
  bool allow_single_flip = true;
  bool calibration_enabled = true;
  double approach_distance = 0.05;
  double approach_step = 0.002;
  double contact_tolerance = 1e-6;

  NoiseModel noise = NoiseModel::fitted();
  Eigen::Vector2d scene_min{-0.35, -0.35};
  Eigen::Vector2d scene_max{0.35, 0.35};
  double scene_clearance = 0.002;
  int scene_max_attempts = 1000;
  Pose base_flange;
  Pose flange_cam;

  double capture_fraction = 0.10;
  double gap_tolerance = 0.001;
  double wreck_depth = 0.001;
  double actuation_noise = 0.00005;

  double sampling_spacing = kDefaultSamplingSpacing;
  std::uint64_t sampling_seed = kDefaultSamplingSeed;
  std::uint64_t seed = 1;
  int trials = 15;

  SimulationConfig simulation() const;
};

/// Rejects unknown keys and values of the wrong type.
Config config_from_json(const json& j);
json config_to_json(const Config& c);

}  // namespace blockasm
