#include "blockasm/io.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace blockasm {

namespace {

void check_version(const json& j, const char* what) {
  if (!j.is_object()) throw InputError(std::string(what) + ": expected a JSON object");
  if (!j.contains("format_version")) {
    throw InputError(std::string(what) + ": missing format_version");
  }
  if (j.at("format_version") != kFormatVersion) {
    throw InputError(std::string(what) + ": unsupported format_version");
  }
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const json& j, const char* key) {
  if (!j.is_array() || j.size() != N) {
    throw InputError(std::string(key) + ": expected " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j[i].get<double>();
  return v;
}

template <typename V>
json vec_to(const V& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Mat3 mat_from(const json& j, const char* key) {
  const auto v = vec_from<9>(j, key);
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = v[3 * r + c];
  return m;
}

// Wraps nlohmann type errors so callers see one exception type.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

json pose_to_json(const Pose& p) {
  return {{"rotation", mat_to(p.rotation)}, {"translation", vec_to(p.translation)}};
}

Pose pose_from_json(const json& j) {
  return guarded("pose", [&] {
    Pose p{mat_from(j.at("rotation"), "rotation"), vec_from<3>(j.at("translation"), "translation")};
    if (!is_rotation(p.rotation, 1e-6)) throw InputError("pose: rotation is not orthonormal");
    // Text round trips stay bit exact; only visibly drifted input is projected.
    if (!is_rotation(p.rotation, 1e-12)) p.rotation = orthonormalize(p.rotation);
    return p;
  });
}

json plan_to_json(const StructurePlan& plan) {
  json entries = json::array();
  for (const auto& e : plan.entries) {
    json pe = pose_to_json(e.relative_pose);
    pe["model"] = e.model_id;
    entries.push_back(pe);
  }
  return {{"format_version", kFormatVersion},
          {"name", plan.name},
          {"entries", entries},
          {"sequence", plan.sequence}};
}

StructurePlan plan_from_json(const json& j) {
  check_version(j, "plan");
  return guarded("plan", [&] {
    StructurePlan plan;
    plan.name = j.value("name", std::string("structure"));
    for (const auto& e : j.at("entries")) {
      plan.entries.push_back({e.at("model").get<std::string>(), pose_from_json(e)});
    }
    if (j.contains("sequence")) {
      plan.sequence = j.at("sequence").get<std::vector<int>>();
    } else {
      for (std::size_t i = 0; i < plan.entries.size(); ++i) plan.sequence.push_back(int(i));
    }
    return plan;
  });
}

json scene_to_json(const std::vector<BlockInstance>& blocks,
                   const std::vector<std::optional<Pose>>& estimates) {
  json arr = json::array();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    json b = pose_to_json(blocks[i].pose);
    b["model"] = blocks[i].model_id;
    if (i < estimates.size() && estimates[i]) b["estimated"] = pose_to_json(*estimates[i]);
    arr.push_back(b);
  }
  return {{"format_version", kFormatVersion}, {"blocks", arr}};
}

SceneFile scene_from_json(const json& j) {
  check_version(j, "scene");
  return guarded("scene", [&] {
    SceneFile s;
    for (const auto& b : j.at("blocks")) {
      s.blocks.push_back({b.at("model").get<std::string>(), pose_from_json(b)});
      s.estimates.push_back(b.contains("estimated")
                                ? std::optional<Pose>(pose_from_json(b.at("estimated")))
                                : std::nullopt);
    }
    return s;
  });
}

json library_to_json(const BlockLibrary& library, std::uint64_t seed) {
  json models = json::array();
  for (const auto& m : library.models()) {
    json prims = json::array();
    for (const auto& p : m.primitives) {
      json pj = pose_to_json(p.local_pose);
      pj["half_extents"] = vec_to(p.half_extents);
      prims.push_back(pj);
    }
    json sym = json::array();
    for (const auto& s : m.symmetry.elements) sym.push_back(mat_to(s));
    models.push_back({{"id", m.id}, {"primitives", prims}, {"symmetry", sym}});
  }
  return {{"format_version", kFormatVersion}, {"seed", seed}, {"models", models}};
}

BlockLibrary library_from_json(const json& j, double spacing) {
  check_version(j, "block library");
  return guarded("block library", [&] {
    const auto seed = j.value("seed", kDefaultSamplingSeed);
    std::vector<BlockModel> models;
    for (const auto& mj : j.at("models")) {
      BlockModel m;
      m.id = mj.at("id").get<std::string>();
      for (const auto& pj : mj.at("primitives")) {
        m.primitives.push_back({vec_from<3>(pj.at("half_extents"), "half_extents"),
                                pose_from_json(pj)});
      }
      const bool has_sym = mj.contains("symmetry");
      if (has_sym) {
        m.symmetry.elements.clear();
        for (const auto& s : mj.at("symmetry")) m.symmetry.elements.push_back(mat_from(s, "symmetry"));
        if (!m.symmetry.valid(1e-6)) throw InputError("model " + m.id + ": invalid symmetry group");
      }
      finalize_model(m, spacing, seed + models.size(), !has_sym);
      models.push_back(std::move(m));
    }
    try {
      return BlockLibrary(std::move(models));
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("block library: ") + e.what());
    }
  });
}

json records_to_json(const std::vector<PoseRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    arr.push_back({{"object", r.object_id},
                   {"estimated", pose_to_json(r.estimated)},
                   {"ground_truth", pose_to_json(r.ground_truth)}});
  }
  return {{"format_version", kFormatVersion}, {"records", arr}};
}

std::vector<PoseRecord> records_from_json(const json& j) {
  check_version(j, "records");
  return guarded("records", [&] {
    std::vector<PoseRecord> out;
    for (const auto& r : j.at("records")) {
      out.push_back({r.at("object").get<std::string>(), pose_from_json(r.at("estimated")),
                     pose_from_json(r.at("ground_truth"))});
    }
    return out;
  });
}

json trace_to_json(const StructurePlan& plan, const std::vector<BlockStepPlan>& steps) {
  json arr = json::array();
  for (const auto& s : steps) {
    json actions = json::array();
    for (const auto& a : s.actions) {
      json aj{{"kind", to_string(a.kind)}, {"result", pose_to_json(a.result)}};
      if (a.grasp) {
        aj["grasp"] = {{"approach", a.grasp->approach.name()},
                       {"closure_plane", a.grasp->closure_plane},
                       {"offset_index", a.grasp->offset_index},
                       {"pose", pose_to_json(a.grasp->world_pose(a.result))}};
      }
      if (a.kind == ActionKind::RotateHorizontal) {
        aj["axis"] = a.rotation_axis == Axis::X ? "X" : "Y";
      }
      if (a.kind == ActionKind::RotateHorizontal || a.kind == ActionKind::YawAlign) {
        aj["angle"] = a.angle;
      }
      if (a.kind == ActionKind::Insert) {
        aj["approach_direction"] = vec_to(a.approach_direction);
        aj["approach_distance"] = a.approach_distance;
      }
      actions.push_back(aj);
    }
    arr.push_back({{"entry", s.entry},
                   {"scene_index", s.scene_index},
                   {"model", s.model_id},
                   {"canonical_target", pose_to_json(s.canonical_target)},
                   {"actions", actions}});
  }
  return {{"format_version", kFormatVersion}, {"structure", plan.name}, {"steps", arr}};
}

namespace {

json stats_to_json(const StructureStats& s) {
  return {{"structure", s.structure},
          {"blocks", s.blocks},
          {"trials", s.trials},
          {"successful_trials", s.successful_trials},
          {"detection_rate", s.detection_rate},
          {"step_success_rate", s.step_success_rate},
          {"trial_success_rate", s.trial_success_rate}};
}

}  // namespace

json batch_to_json(const BatchStats& stats) {
  json rows = json::array();
  for (const auto& r : stats.rows) rows.push_back(stats_to_json(r));
  json trials = json::array();
  for (const auto& t : stats.reports) {
    json steps = json::array();
    for (const auto& s : t.steps) {
      steps.push_back({{"entry", s.entry},
                       {"block", s.block_id},
                       {"outcome", to_string(s.outcome)},
                       {"grasped", s.grasped},
                       {"rotations", s.rotations},
                       {"calibrated", s.calibrated},
                       {"insert_attempted", s.insert_attempted},
                       {"insertion_gap", s.insertion_gap},
                       {"collision_depth", s.collision_depth},
                       {"final_error", s.final_error},
                       {"success", s.success}});
    }
    trials.push_back({{"structure", t.structure},
                      {"seed", t.seed},
                      {"blocks", t.blocks},
                      {"detected", t.detected},
                      {"success", t.success},
                      {"steps", steps}});
  }
  return {{"format_version", kFormatVersion},
          {"trial_count", stats.trial_count},
          {"rows", rows},
          {"mean", stats_to_json(stats.mean)},
          {"trials", trials}};
}

namespace {

struct Field {
  std::function<void(const json&, Config&)> read;
  std::function<json(const Config&)> write;
};

template <typename T>
Field scalar(T Config::*m) {
  return {[m](const json& j, Config& c) { c.*m = j.get<T>(); },
          [m](const Config& c) { return json(c.*m); }};
}

template <typename T>
Field noise_field(T NoiseModel::*m) {
  return {[m](const json& j, Config& c) { c.noise.*m = j.get<T>(); },
          [m](const Config& c) { return json(c.noise.*m); }};
}

template <typename V>
Field vector_field(V Config::*m) {
  return {[m](const json& j, Config& c) {
            c.*m = vec_from<V::RowsAtCompileTime>(j, "vector field");
          },
          [m](const Config& c) { return vec_to(c.*m); }};
}

Field pose_field(Pose Config::*m) {
  return {[m](const json& j, Config& c) { c.*m = pose_from_json(j); },
          [m](const Config& c) { return pose_to_json(c.*m); }};
}

const std::map<std::string, Field>& config_fields() {
  static const std::map<std::string, Field> fields = {
      {"finger_half_extents", vector_field(&Config::finger_half_extents)},
      {"max_opening", scalar(&Config::max_opening)},
      {"grasp_clearance", scalar(&Config::grasp_clearance)},
      {"grasp_margin", scalar(&Config::grasp_margin)},
      {"grasp_offset_fraction", scalar(&Config::grasp_offset_fraction)},
      {"reach_min", vector_field(&Config::reach_min)},
      {"reach_max", vector_field(&Config::reach_max)},
      {"reach_max_tilt_deg", scalar(&Config::reach_max_tilt_deg)},
      {"plane_height", scalar(&Config::plane_height)},
      {"workspace_xy", vector_field(&Config::workspace_xy)},
      {"anchor_xy", vector_field(&Config::anchor_xy)},
      {"anchor_yaw", scalar(&Config::anchor_yaw)},
      {"allow_single_flip", scalar(&Config::allow_single_flip)},
      {"calibration_enabled", scalar(&Config::calibration_enabled)},
      {"approach_distance", scalar(&Config::approach_distance)},
      {"approach_step", scalar(&Config::approach_step)},
      {"contact_tolerance", scalar(&Config::contact_tolerance)},
      {"rot_sigma", noise_field(&NoiseModel::rot_sigma)},
      {"trans_sigma", noise_field(&NoiseModel::trans_sigma)},
      {"depth_sigma", noise_field(&NoiseModel::depth_sigma)},
      {"gross_error_prob", noise_field(&NoiseModel::gross_error_prob)},
      {"gross_offset_max", noise_field(&NoiseModel::gross_offset_max)},
      {"detection_prob", noise_field(&NoiseModel::detection_prob)},
      {"scene_min", vector_field(&Config::scene_min)},
      {"scene_max", vector_field(&Config::scene_max)},
      {"scene_clearance", scalar(&Config::scene_clearance)},
      {"scene_max_attempts", scalar(&Config::scene_max_attempts)},
      {"base_flange", pose_field(&Config::base_flange)},
      {"flange_cam", pose_field(&Config::flange_cam)},
      {"capture_fraction", scalar(&Config::capture_fraction)},
      {"gap_tolerance", scalar(&Config::gap_tolerance)},
      {"wreck_depth", scalar(&Config::wreck_depth)},
      {"actuation_noise", scalar(&Config::actuation_noise)},
      {"sampling_spacing", scalar(&Config::sampling_spacing)},
      {"sampling_seed", scalar(&Config::sampling_seed)},
      {"seed", scalar(&Config::seed)},
      {"trials", scalar(&Config::trials)},
  };
  return fields;
}

}  // namespace

Config config_from_json(const json& j) {
  check_version(j, "config");
  Config c;
  const auto& fields = config_fields();
  for (const auto& [key, value] : j.items()) {
    if (key == "format_version") continue;
    const auto it = fields.find(key);
    if (it == fields.end()) throw InputError("config: unknown key '" + key + "'");
    try {
      it->second.read(value, c);
    } catch (const json::exception& e) {
      throw InputError("config: " + key + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("config: " + key + ": " + e.what());
    }
  }
  if (!c.noise.valid()) throw InputError("config: noise parameters out of range");
  if (c.trials < 1) throw InputError("config: trials must be at least 1");
  return c;
}

json config_to_json(const Config& c) {
  json j{{"format_version", kFormatVersion}};
  for (const auto& [key, f] : config_fields()) j[key] = f.write(c);
  return j;
}

SimulationConfig Config::simulation() const {
  SimulationConfig s;
  auto& grasp = s.planner.reorientation.grasp;
  grasp.gripper.finger_half_extents = finger_half_extents;
  grasp.gripper.max_opening = max_opening;
  grasp.clearance = grasp_clearance;
  grasp.margin = grasp_margin;
  grasp.offset_fraction = grasp_offset_fraction;
  s.planner.reach = ReachVolume{reach_min, reach_max,
                                reach_max_tilt_deg * std::numbers::pi / 180.0};
  s.planner.reorientation.plane_height = plane_height;
  s.planner.reorientation.workspace =
      Pose::FromTranslation(Vec3(workspace_xy.x(), workspace_xy.y(), plane_height));
  s.planner.reorientation.allow_single_flip = allow_single_flip;
  s.planner.calibration_enabled = calibration_enabled;
  s.planner.approach_distance = approach_distance;
  s.planner.approach_step = approach_step;
  s.planner.contact_tolerance = contact_tolerance;
  s.anchor_xy = anchor_xy;
  s.anchor_yaw = anchor_yaw;
  s.scene.min = scene_min;
  s.scene.max = scene_max;
  s.scene.plane_height = plane_height;
  s.scene.clearance = scene_clearance;
  s.scene.max_attempts = scene_max_attempts;
  s.extrinsics = {base_flange, flange_cam};
  s.capture_fraction = capture_fraction;
  s.gap_tolerance = gap_tolerance;
  s.wreck_depth = wreck_depth;
  s.actuation_noise = actuation_noise;
  return s;
}

}  // namespace blockasm
