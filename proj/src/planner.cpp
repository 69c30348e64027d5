#include "blockasm/planner.hpp"

#include "blockasm/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace blockasm {

namespace {

constexpr double kPi = std::numbers::pi;

Pose at_workspace(const BlockModel& model, const Mat3& r, const ReorientationOptions& o) {
  return {r, Vec3(o.workspace.translation.x(), o.workspace.translation.y(),
                  o.plane_height + model.resting_height(r))};
}

Pose flush_in_place(const BlockModel& model, const Pose& p, double plane_height) {
  return plane_settle(p, plane_height, model, std::numeric_limits<double>::infinity());
}

Mat3 base_rotation(Axis axis, double angle) {
  return axis == Axis::X ? rot_x(angle) : rot_y(angle);
}

/// Side grasp whose approach runs along base +y, used for horizontal rotations.
std::optional<GraspCandidate> rotation_grasp(const BlockModel& model, const Pose& at,
                                             const GraspSettings& s) {
  std::vector<GraspCandidate> side;
  for (const auto& c : enumerate_candidates(model, {}, s.offset_fraction)) {
    const Vec3 z = c.world_pose(at).rotation.col(2);
    if (z.y() > 1.0 - 1e-9 &&
        grasp_opening(model, c, s.clearance) <= s.gripper.max_opening) {
      side.push_back(c);
    }
  }
  if (side.empty()) return std::nullopt;
  sort_by_preference(side, at);
  return side.front();
}

}  // namespace

std::string to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::PickPlace: return "PickPlace";
    case ActionKind::RotateHorizontal: return "RotateHorizontal";
    case ActionKind::YawAlign: return "YawAlign";
    case ActionKind::Insert: return "Insert";
    case ActionKind::Calibrate: return "Calibrate";
  }
  return "Unknown";
}

int BlockStepPlan::rotation_count() const {
  return static_cast<int>(std::count_if(actions.begin(), actions.end(), [](const auto& a) {
    return a.kind == ActionKind::RotateHorizontal;
  }));
}

bool BlockStepPlan::has_calibration() const {
  return std::any_of(actions.begin(), actions.end(),
                     [](const auto& a) { return a.kind == ActionKind::Calibrate; });
}

int rotations_needed(const Pose& current, const Pose& target) {
  const double d = reference_axis(current).vector().dot(reference_axis(target).vector());
  if (d > 0.5) return 0;
  if (d < -0.5) return 2;
  return 1;
}

std::vector<PrimitiveAction> plan_reorientation(const BlockModel& model, const Pose& current,
                                                const Pose& canonical_target,
                                                const ReorientationOptions& options) {
  std::vector<PrimitiveAction> actions;
  const SignedAxis up_now = reference_axis(current);
  const SignedAxis up_target = reference_axis(canonical_target);
  const int needed = rotations_needed(current, canonical_target);
  const double target_yaw = flush_yaw(canonical_target.rotation);

  Pose belief = current;
  if (needed > 0) {
    const Mat3& basis = flush_basis(up_now.negated());
    std::vector<double> turns;
    double yaw;
    if (needed == 1) {
      // Put the target up-axis along base +x so a -90 deg turn about y raises it.
      const Vec3 h = basis * up_target.vector();
      yaw = -std::atan2(h.y(), h.x());
      turns = {-kPi / 2.0};
    } else {
      // Object axes aligned with the base so turns about y stay flush. Of the
      // four such yaws, the one nearest the current yaw that admits the turn
      // grasps; a single flip is preferred when allowed.
      const double now = flush_yaw(current.rotation);
      std::array<double, 4> yaws;
      for (int k = 0; k < 4; ++k) yaws[k] = (k - 1) * kPi / 2.0;
      std::stable_sort(yaws.begin(), yaws.end(), [&](double a, double b) {
        return std::abs(wrap_angle(a - now)) < std::abs(wrap_angle(b - now)) - 1e-12;
      });
      auto grasps_ok = [&](double y, const std::vector<double>& seq) {
        Pose p = at_workspace(model, rot_z(y) * basis, options);
        for (double angle : seq) {
          if (!rotation_grasp(model, p, options.grasp)) return false;
          p = at_workspace(model, flush_rotation(base_rotation(Axis::Y, angle) * p.rotation),
                           options);
        }
        return true;
      };
      std::vector<std::vector<double>> choices;
      if (options.allow_single_flip) choices.push_back({kPi});
      choices.push_back({kPi / 2.0, kPi / 2.0});
      yaw = yaws[0];
      turns = choices.back();
      bool found = false;
      for (const auto& seq : choices) {
        for (double y : yaws) {
          if (grasps_ok(y, seq)) {
            yaw = y;
            turns = seq;
            found = true;
            break;
          }
        }
        if (found) break;
      }
    }
    PrimitiveAction move;
    move.kind = ActionKind::PickPlace;
    move.result = at_workspace(model, rot_z(yaw) * basis, options);
    actions.push_back(move);
    belief = move.result;
    for (double angle : turns) {
      PrimitiveAction turn;
      turn.kind = ActionKind::RotateHorizontal;
      turn.rotation_axis = Axis::Y;
      turn.angle = angle;
      turn.grasp = rotation_grasp(model, belief, options.grasp);
      const Mat3 r = flush_rotation(base_rotation(Axis::Y, angle) * belief.rotation);
      turn.result = at_workspace(model, r, options);
      actions.push_back(turn);
      belief = turn.result;
    }
  }

  const Pose flat = flush_in_place(model, belief, options.plane_height);
  PrimitiveAction yaw;
  yaw.kind = ActionKind::YawAlign;
  yaw.angle = wrap_angle(target_yaw - flush_yaw(flat.rotation));
  yaw.result = flat;
  yaw.result.rotation = rot_z(yaw.angle) * flat.rotation;
  actions.push_back(yaw);
  return actions;
}

Mat3 replay_orientation(const Mat3& start, const std::vector<PrimitiveAction>& actions) {
  Mat3 r = start;
  for (const auto& a : actions) {
    switch (a.kind) {
      case ActionKind::PickPlace:
      case ActionKind::Insert:
        r = a.result.rotation;
        break;
      case ActionKind::RotateHorizontal:
        r = flush_rotation(base_rotation(a.rotation_axis, a.angle) * r);
        break;
      case ActionKind::YawAlign:
        r = rot_z(a.angle) * flush_rotation(r);
        break;
      case ActionKind::Calibrate:
        break;
    }
  }
  return r;
}

double residual_yaw(const std::vector<PrimitiveAction>& actions) {
  for (auto it = actions.rbegin(); it != actions.rend(); ++it) {
    if (it->kind == ActionKind::YawAlign) return it->angle;
  }
  return 0.0;
}

Pose choose_canonical_target(const BlockModel& model, const Pose& estimated, const Pose& target,
                             const ReorientationOptions& options) {
  constexpr double kTie = 1e-9;
  const auto equivalents = symmetry_equivalents(target, model.symmetry);
  std::size_t best = 0;
  int best_rot = std::numeric_limits<int>::max();
  double best_yaw = 0.0, best_geo = 0.0;
  for (std::size_t i = 0; i < equivalents.size(); ++i) {
    const Pose& eq = equivalents[i];
    const int rot = rotations_needed(estimated, eq);
    const double yaw = std::abs(residual_yaw(plan_reorientation(model, estimated, eq, options)));
    const double geo = geodesic_angle(estimated.rotation, eq.rotation);
    bool better;
    if (rot != best_rot) {
      better = rot < best_rot;
    } else if (std::abs(yaw - best_yaw) > kTie) {
      better = yaw < best_yaw;
    } else {
      better = geo < best_geo - kTie;
    }
    if (better) {
      best = i;
      best_rot = rot;
      best_yaw = yaw;
      best_geo = geo;
    }
  }
  return equivalents[best];
}

AssemblyCompiler::AssemblyCompiler(const StructurePlan& plan, const BlockLibrary& library,
                                   std::vector<BlockInstance> scene,
                                   std::vector<std::optional<Pose>> estimates,
                                   PlannerConfig config)
    : plan_(plan),
      library_(library),
      scene_(std::move(scene)),
      estimates_(std::move(estimates)),
      config_(std::move(config)) {
  if (estimates_.size() != scene_.size()) {
    throw std::invalid_argument("one estimate slot per scene block is required");
  }
  if (!is_permutation_of(plan_.sequence, plan_.entries.size())) {
    throw std::invalid_argument("plan sequence is not a permutation");
  }
  if (config_.snap_to_plane) {
    for (std::size_t i = 0; i < scene_.size(); ++i) {
      if (!estimates_[i]) continue;
      estimates_[i] = rest_on_plane(library_.at(scene_[i].model_id), *estimates_[i],
                                    config_.reorientation.plane_height);
    }
  }
  targets_ = resolve_world_poses(plan_, config_.anchor);
  assignment_.assign(plan_.entries.size(), -1);
  moved_.assign(scene_.size(), false);

  std::vector<bool> taken(scene_.size(), false);
  for (int entry : plan_.sequence) {
    const auto& id = plan_.entries[entry].model_id;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scene_.size(); ++i) {
      if (taken[i] || scene_[i].model_id != id || !estimates_[i]) continue;
      const double d = (estimates_[i]->translation - targets_[entry].translation).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) taken[best] = true;
    assignment_[entry] = best;
  }
}

Pose rest_on_plane(const BlockModel& model, const Pose& p, double plane_height) {
  Pose out = p;
  out.translation.z() = plane_height + model.resting_height(p.rotation);
  return out;
}

std::vector<Obb> AssemblyCompiler::obstacles_excluding(int scene_index) const {
  std::vector<Obb> out = placed_;
  for (std::size_t i = 0; i < scene_.size(); ++i) {
    if (static_cast<int>(i) == scene_index || moved_[i] || !estimates_[i]) continue;
    const auto boxes = library_.at(scene_[i].model_id).obbs(*estimates_[i]);
    out.insert(out.end(), boxes.begin(), boxes.end());
  }
  return out;
}

std::optional<GraspCandidate> AssemblyCompiler::insertion_grasp(const BlockModel& model,
                                                                const Pose& target) const {
  const Vec3 dir = target.rotation * reference_axis(target).vector();
  std::vector<double> offsets;
  for (double s = config_.approach_distance; s > 0.0; s -= config_.approach_step) {
    offsets.push_back(s);
  }
  offsets.push_back(0.0);

  for (double s : offsets) {
    const Pose shifted{target.rotation, target.translation + s * dir};
    for (const auto& a : model.obbs(shifted)) {
      for (const auto& b : placed_) {
        if (penetration_depth(a, b) > config_.contact_tolerance) return std::nullopt;
      }
    }
  }

  const SignedAxis up = reference_axis(target);
  std::vector<GraspCandidate> descending;
  for (const auto& c : enumerate_candidates(model, {}, config_.reorientation.grasp.offset_fraction)) {
    if (c.approach == up) descending.push_back(c);
  }
  sort_by_preference(descending, target);
  const GraspSettings& gs = config_.reorientation.grasp;
  for (const auto& c : descending) {
    if (grasp_opening(model, c, gs.clearance) > gs.gripper.max_opening) continue;
    if (config_.reach && !config_.reach(c.world_pose(target))) continue;
    bool clear = true;
    for (double s : offsets) {
      const Pose shifted{target.rotation, target.translation + s * dir};
      const auto fingers = candidate_fingers(model, c, shifted, gs);
      if (scene_collides(fingers, placed_, gs.margin)) {
        clear = false;
        break;
      }
    }
    if (clear) return c;
  }
  return std::nullopt;
}

std::variant<BlockStepPlan, PlanningError> AssemblyCompiler::plan_step(std::size_t step) {
  const int entry = plan_.sequence.at(step);
  const std::string& id = plan_.entries[entry].model_id;
  const int index = assignment_[entry];
  if (index < 0) {
    return PlanningError(PlanningError::Kind::Unassignable, entry,
                         "no detected '" + id + "' block for entry " + std::to_string(entry));
  }
  const BlockModel& model = library_.at(id);
  const Pose& estimate = *estimates_[index];
  const double plane = config_.reorientation.plane_height;

  BlockStepPlan out;
  out.entry = entry;
  out.scene_index = index;
  out.model_id = id;
  out.canonical_target =
      choose_canonical_target(model, estimate, targets_[entry], config_.reorientation);

  const auto obstacles = obstacles_excluding(index);
  const auto pick = select_pick_grasp(model, estimate, obstacles, config_.reorientation.grasp,
                                      config_.reach);
  if (!pick) {
    return PlanningError(PlanningError::Kind::Ungraspable, entry,
                         "ungraspable: block '" + id + "' (entry " + std::to_string(entry) + ")");
  }

  auto actions = plan_reorientation(model, estimate, out.canonical_target, config_.reorientation);
  actions.front().grasp = pick;
  Pose belief = estimate;
  for (const auto& a : actions) {
    const bool idle = a.kind == ActionKind::YawAlign && std::abs(a.angle) < 1e-12 &&
                      (a.result.translation - belief.translation).norm() < 1e-12 &&
                      geodesic_angle(a.result.rotation, belief.rotation) < 1e-12;
    if (idle) continue;
    out.actions.push_back(a);
    belief = a.result;
  }

  if (config_.calibration_enabled) {
    PrimitiveAction cal;
    cal.kind = ActionKind::Calibrate;
    cal.result = flush_in_place(model, belief, plane);
    out.actions.push_back(cal);
    belief = cal.result;
  }

  const auto insert_grasp = insertion_grasp(model, out.canonical_target);
  if (!insert_grasp) {
    return PlanningError(PlanningError::Kind::BlockedInsertion, entry,
                         "blocked insertion: block '" + id + "' (entry " +
                             std::to_string(entry) + ")");
  }
  PrimitiveAction insert;
  insert.kind = ActionKind::Insert;
  insert.grasp = insert_grasp;
  insert.result = out.canonical_target;
  insert.approach_direction =
      out.canonical_target.rotation * reference_axis(out.canonical_target).vector();
  insert.approach_distance = config_.approach_distance;
  out.actions.push_back(insert);

  moved_[index] = true;
  const auto boxes = model.obbs(out.canonical_target);
  placed_.insert(placed_.end(), boxes.begin(), boxes.end());
  return out;
}

std::vector<BlockStepPlan> compile_assembly(const StructurePlan& plan, const BlockLibrary& library,
                                            const std::vector<BlockInstance>& scene,
                                            const std::vector<Pose>& estimates,
                                            const PlannerConfig& config) {
  std::vector<std::optional<Pose>> slots(estimates.begin(), estimates.end());
  if (slots.size() != scene.size()) {
    throw std::invalid_argument("one estimate per scene block is required");
  }
  AssemblyCompiler compiler(plan, library, scene, std::move(slots), config);
  std::vector<BlockStepPlan> out;
  for (std::size_t k = 0; k < compiler.step_count(); ++k) {
    auto result = compiler.plan_step(k);
    if (auto* err = std::get_if<PlanningError>(&result)) throw *err;
    out.push_back(std::move(std::get<BlockStepPlan>(result)));
  }
  return out;
}

}  // namespace blockasm
