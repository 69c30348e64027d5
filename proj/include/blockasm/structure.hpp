#pragma once

#include "blockasm/blocks.hpp"
#include "blockasm/geometry.hpp"

#include <string>
#include <vector>

namespace blockasm {

struct PlanEntry {
  std::string model_id;
  Pose relative_pose;  // w.r.t. the anchor block (entry 0)
};

/// A designed architecture: relative block poses plus the assembly order.
struct StructurePlan {
  std::string name;
  std::vector<PlanEntry> entries;
  std::vector<int> sequence;  // permutation of entry indices
};

/// pose_i = anchor * relative_i
std::vector<Pose> resolve_world_poses(const StructurePlan& plan, const Pose& anchor);

enum class FindingKind { UnknownModel, Interpenetration, Unsupported, SequenceDefect, AnchorNotIdentity };

std::string to_string(FindingKind kind);

struct Finding {
  FindingKind kind;
  std::vector<int> entries;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
  std::string to_text() const;
};

struct ValidationTolerances {
  double contact = 1e-6;  // allowed interpenetration
  double support = 1e-4;  // face-contact distance for support
};

/// True when `sequence` is a permutation of 0..n-1.
bool is_permutation_of(const std::vector<int>& sequence, std::size_t n);

ValidationReport validate_plan(const StructurePlan& plan, const BlockLibrary& library,
                               const ValidationTolerances& tol = {});

/// Anchor pose at (x, y) with the given yaw, resting on a plane at `plane_height`.
Pose anchor_on_plane(const StructurePlan& plan, const BlockLibrary& library, double x,
                     double y, double yaw, double plane_height);

}  // namespace blockasm
