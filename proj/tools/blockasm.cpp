// blockasm: validate plans, compile action traces, run simulations,
// score pose records and export scenes as OBJ meshes.
#include "blockasm/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

using namespace blockasm;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kInputFailure = 2;

struct Common {
  std::string config_path;
  std::string library_path;
};

Config load_config(const Common& c) {
  return c.config_path.empty() ? Config{} : config_from_json(read_json(c.config_path));
}

BlockLibrary load_library(const Common& c, const Config& cfg) {
  if (!c.library_path.empty()) {
    return library_from_json(read_json(c.library_path), cfg.sampling_spacing);
  }
  return BlockLibrary(standard_library(cfg.sampling_spacing, cfg.sampling_seed));
}

PlannerConfig planner_for(const StructurePlan& plan, const BlockLibrary& lib, const Config& cfg) {
  PlannerConfig p = cfg.simulation().planner;
  p.anchor = anchor_on_plane(plan, lib, cfg.anchor_xy.x(), cfg.anchor_xy.y(), cfg.anchor_yaw,
                             cfg.plane_height);
  return p;
}

void check_models(const StructurePlan& plan, const std::vector<BlockInstance>& scene,
                  const BlockLibrary& lib) {
  for (const auto& e : plan.entries) {
    if (!lib.find(e.model_id)) throw InputError("unknown block model '" + e.model_id + "'");
  }
  for (const auto& b : scene) {
    if (!lib.find(b.model_id)) throw InputError("unknown block model '" + b.model_id + "'");
  }
}

int cmd_validate(const Common& common, const std::string& plan_path) {
  const Config cfg = load_config(common);
  const auto lib = load_library(common, cfg);
  const auto plan = plan_from_json(read_json(plan_path));
  const auto report = validate_plan(plan, lib);
  std::cout << report.to_text();
  return report.ok() ? kOk : kDomainFailure;
}

int cmd_plan(const Common& common, const std::string& plan_path, const std::string& scene_path,
             bool no_calibration, const std::string& out) {
  Config cfg = load_config(common);
  if (no_calibration) cfg.calibration_enabled = false;
  const auto lib = load_library(common, cfg);
  const auto plan = plan_from_json(read_json(plan_path));
  const auto scene = scene_from_json(read_json(scene_path));
  check_models(plan, scene.blocks, lib);

  std::vector<Pose> estimates;
  for (std::size_t i = 0; i < scene.blocks.size(); ++i) {
    estimates.push_back(scene.estimates[i].value_or(scene.blocks[i].pose));
  }
  std::vector<BlockStepPlan> steps;
  try {
    steps = compile_assembly(plan, lib, scene.blocks, estimates, planner_for(plan, lib, cfg));
  } catch (const PlanningError& e) {
    std::cerr << e.what() << "\n";
    return kDomainFailure;
  }
  const std::string text = trace_to_json(plan, steps).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
    std::size_t actions = 0;
    for (const auto& s : steps) actions += s.actions.size();
    std::cout << steps.size() << " steps, " << actions << " actions -> " << out << "\n";
  }
  return kOk;
}

int cmd_simulate(const Common& common, const std::vector<std::string>& plan_paths,
                 std::optional<int> trials, std::optional<std::uint64_t> seed,
                 bool no_calibration, const std::string& out_dir, int jobs) {
  Config cfg = load_config(common);
  if (no_calibration) cfg.calibration_enabled = false;
  if (trials) cfg.trials = *trials;
  if (seed) cfg.seed = *seed;
  if (cfg.trials < 1) throw InputError("--trials must be at least 1");
  const auto lib = load_library(common, cfg);
  std::vector<StructurePlan> plans;
  for (const auto& p : plan_paths) {
    plans.push_back(plan_from_json(read_json(p)));
    check_models(plans.back(), {}, lib);
  }
  const auto stats =
      run_batch(plans, lib, cfg.trials, cfg.noise, cfg.simulation(), cfg.seed, jobs);
  const std::string csv = stats.to_csv();
  std::cout << csv;
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw InputError("cannot create " + out_dir + ": " + ec.message());
    write_text(fs::path(out_dir) / "report.csv", csv);
    write_text(fs::path(out_dir) / "report.json", batch_to_json(stats).dump(2) + "\n");
  }
  return kOk;
}

int cmd_metrics(const Common& common, const std::string& records_path, bool csv) {
  const Config cfg = load_config(common);
  const auto lib = load_library(common, cfg);
  const auto records = records_from_json(read_json(records_path));
  if (records.empty()) {
    std::cerr << "no records\n";
    return kDomainFailure;
  }
  for (const auto& r : records) {
    if (!lib.find(r.object_id)) {
      std::cerr << "unknown object id '" << r.object_id << "'\n";
      return kDomainFailure;
    }
  }
  const auto table = build_recall_table(records, lib);
  std::cout << (csv ? table.to_csv() : table.to_text());
  return kOk;
}

struct MeshWriter {
  std::ostringstream os;
  std::size_t vertices = 0;

  void group(const std::string& name, const std::vector<Obb>& boxes) {
    os << "g " << name << "\n";
    // Corner i has bit 0 -> +x, bit 1 -> +y, bit 2 -> +z.
    static constexpr int kFaces[12][3] = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6},
                                          {0, 1, 5}, {0, 5, 4}, {2, 6, 7}, {2, 7, 3},
                                          {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
    char buf[128];
    for (const auto& b : boxes) {
      for (int i = 0; i < 8; ++i) {
        const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
        const Vec3 p = b.center + b.orientation * s.cwiseProduct(b.half_extents);
        std::snprintf(buf, sizeof buf, "v %.9f %.9f %.9f\n", p.x(), p.y(), p.z());
        os << buf;
      }
      for (const auto& f : kFaces) {
        os << "f " << vertices + f[0] + 1 << " " << vertices + f[1] + 1 << " "
           << vertices + f[2] + 1 << "\n";
      }
      vertices += 8;
    }
  }
};

int cmd_export_scene(const Common& common, const std::string& scene_path,
                     const std::string& plan_path, const std::string& at,
                     const std::string& out) {
  const Config cfg = load_config(common);
  const auto lib = load_library(common, cfg);
  const auto scene = scene_from_json(read_json(scene_path));
  std::optional<StructurePlan> plan;
  if (!plan_path.empty()) plan = plan_from_json(read_json(plan_path));
  check_models(plan.value_or(StructurePlan{}), scene.blocks, lib);

  const std::size_t n_steps = plan ? plan->sequence.size() : 0;
  std::size_t step = 0;
  if (at == "final") {
    step = n_steps;
  } else if (at != "initial") {
    long long v = -1;
    try {
      std::size_t used = 0;
      v = std::stoll(at, &used);
      if (used != at.size()) v = -1;
    } catch (const std::exception&) {
      throw InputError("--at expects a step number, 'initial' or 'final'");
    }
    if (v < 0 || static_cast<std::size_t>(v) > n_steps) {
      std::cerr << "step " << at << " out of range [0, " << n_steps << "]\n";
      return kDomainFailure;
    }
    step = static_cast<std::size_t>(v);
  }

  std::vector<Pose> poses;
  for (const auto& b : scene.blocks) poses.push_back(b.pose);
  std::optional<std::array<Obb, 2>> gripper;
  if (plan) {
    std::vector<std::optional<Pose>> estimates;
    for (std::size_t i = 0; i < scene.blocks.size(); ++i) {
      estimates.push_back(scene.estimates[i].value_or(scene.blocks[i].pose));
    }
    AssemblyCompiler compiler(*plan, lib, scene.blocks, estimates, planner_for(*plan, lib, cfg));
    for (std::size_t k = 0; k < n_steps && k <= step; ++k) {
      auto result = compiler.plan_step(k);
      if (auto* err = std::get_if<PlanningError>(&result)) {
        std::cerr << err->what() << "\n";
        return kDomainFailure;
      }
      const auto& s = std::get<BlockStepPlan>(result);
      const BlockModel& model = lib.at(s.model_id);
      if (k < step) {
        poses[s.scene_index] = s.canonical_target;
      } else {
        const auto& pick = s.actions.front();
        const Pose& current = *compiler.estimate(s.scene_index);
        gripper = candidate_fingers(model, *pick.grasp, current, cfg.simulation().planner.reorientation.grasp);
      }
    }
  }

  MeshWriter mesh;
  for (std::size_t i = 0; i < scene.blocks.size(); ++i) {
    mesh.group("block_" + std::to_string(i) + "_" + scene.blocks[i].model_id,
               lib.at(scene.blocks[i].model_id).obbs(poses[i]));
  }
  if (gripper) mesh.group("gripper", {(*gripper)[0], (*gripper)[1]});
  const std::string text = "# blockasm scene export, step " + std::to_string(step) + "\n" +
                           mesh.os.str();
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return kOk;
}

int cmd_scene(const Common& common, const std::string& plan_path, std::optional<std::uint64_t> seed,
              bool perfect, const std::string& out) {
  const Config cfg = load_config(common);
  const auto lib = load_library(common, cfg);
  const auto plan = plan_from_json(read_json(plan_path));
  check_models(plan, {}, lib);
  std::vector<std::string> ids;
  for (const auto& e : plan.entries) ids.push_back(e.model_id);
  const SimulationConfig sim = cfg.simulation();
  const std::uint64_t s = seed.value_or(cfg.seed);
  const auto blocks = generate_scene(lib, ids, sim.scene, s);
  std::mt19937_64 rng(s + 1);
  const auto perception = perceive(blocks, perfect ? NoiseModel::zero() : cfg.noise, rng,
                                   sim.extrinsics);
  std::vector<std::optional<Pose>> estimates;
  for (const auto& p : perception) {
    estimates.push_back(p.detected ? std::optional<Pose>(p.estimate) : std::nullopt);
  }
  const std::string text = scene_to_json(blocks, estimates).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return kOk;
}

int cmd_synth_records(const Common& common, std::size_t count, std::optional<std::uint64_t> seed,
                      const std::string& out) {
  const Config cfg = load_config(common);
  const auto lib = load_library(common, cfg);
  const auto records = synthesize_records(lib, cfg.noise, count, seed.value_or(cfg.seed),
                                          cfg.simulation().scene);
  const std::string text = records_to_json(records).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return kOk;
}

int cmd_calibrate_noise(const Common& common, std::size_t samples, std::uint64_t seed) {
  const Config cfg = load_config(common);
  const auto lib = load_library(common, cfg);
  const NoiseModel n = calibrate_noise(lib, cfg.noise, NoiseTargets{}, samples, seed);
  const auto recall = perception_recall(lib, n, samples, seed);
  Config tuned = cfg;
  tuned.noise = n;
  const json full = config_to_json(tuned);
  json j{{"format_version", kFormatVersion}};
  for (const char* k : {"rot_sigma", "trans_sigma", "depth_sigma", "gross_error_prob",
                        "gross_offset_max", "detection_prob"}) {
    j[k] = full.at(k);
  }
  std::cout << j.dump(2) << "\n";
  std::fprintf(stderr, "2cm recall %.4f, 5deg5cm recall %.4f\n", recall.translation_2cm,
               recall.deg5_cm5);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block assembly planner and simulator"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "Config JSON (flat, format_version 1)");
  app.add_option("--library", common.library_path, "Block library JSON");

  std::string plan_path, scene_path, out, at = "initial", records_path, out_dir;
  std::vector<std::string> plan_paths;
  bool no_calibration = false, csv = false, perfect = false;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::size_t count = 1000, samples = 10000;
  std::uint64_t cal_seed = 11;

  auto* validate = app.add_subcommand("validate", "Check a structure plan");
  validate->add_option("plan", plan_path)->required();

  auto* plan = app.add_subcommand("plan", "Compile a plan against a scene into an action trace");
  plan->add_option("plan", plan_path)->required();
  plan->add_option("scene", scene_path)->required();
  plan->add_flag("--no-calibration", no_calibration);
  plan->add_option("--out", out, "Trace JSON path (stdout when omitted)");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo assembly trials");
  simulate->add_option("plans", plan_paths)->required();
  simulate->add_option("--trials", trials);
  simulate->add_option("--seed", seed);
  simulate->add_flag("--no-calibration", no_calibration);
  simulate->add_option("--out", out_dir, "Directory for report.csv and report.json");
  simulate->add_option("--jobs", jobs)->check(CLI::Range(1, 256));

  auto* metrics = app.add_subcommand("metrics", "Recall table for pose records");
  metrics->add_option("records", records_path)->required();
  metrics->add_flag("--csv", csv);

  auto* export_scene = app.add_subcommand("export-scene", "Write scene boxes as an OBJ mesh");
  export_scene->add_option("scene", scene_path)->required();
  export_scene->add_option("--plan", plan_path, "Structure plan; enables --at N and final");
  export_scene->add_option("--at", at, "initial, a step number, or final");
  export_scene->add_option("--out", out);

  auto* scene = app.add_subcommand("scene", "Generate a random scene for a plan");
  scene->add_option("plan", plan_path)->required();
  scene->add_option("--seed", seed);
  scene->add_flag("--perfect", perfect, "Estimates equal the true poses");
  scene->add_option("--out", out);

  auto* synth = app.add_subcommand("synth-records", "Synthetic perception records");
  synth->add_option("--count", count);
  synth->add_option("--seed", seed);
  synth->add_option("--out", out);

  auto* calib = app.add_subcommand("calibrate-noise", "Fit noise sigmas to the recall targets");
  calib->add_option("--samples", samples);
  calib->add_option("--seed", cal_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputFailure;
  }

  try {
    if (*validate) return cmd_validate(common, plan_path);
    if (*plan) return cmd_plan(common, plan_path, scene_path, no_calibration, out);
    if (*simulate) {
      return cmd_simulate(common, plan_paths, trials, seed, no_calibration, out_dir, jobs);
    }
    if (*metrics) return cmd_metrics(common, records_path, csv);
    if (*export_scene) return cmd_export_scene(common, scene_path, plan_path, at, out);
    if (*scene) return cmd_scene(common, plan_path, seed, perfect, out);
    if (*synth) return cmd_synth_records(common, count, seed, out);
    if (*calib) return cmd_calibrate_noise(common, samples, cal_seed);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputFailure;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputFailure;
  } catch (const SceneError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainFailure;
  }
  return kInputFailure;
}
