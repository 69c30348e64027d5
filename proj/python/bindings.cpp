#include "blockasm/calibration.hpp"
#include "blockasm/collision.hpp"
#include "blockasm/grasp.hpp"
#include "blockasm/io.hpp"
#include "blockasm/metrics.hpp"
#include "blockasm/planner.hpp"
#include "blockasm/simulation.hpp"
#include "blockasm/structure.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace blockasm;

namespace {

Eigen::MatrixX3d points_array(const std::vector<Vec3>& pts) {
  Eigen::MatrixX3d out(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(i) = pts[i].transpose();
  return out;
}

}  // namespace

PYBIND11_MODULE(pyblockasm, m) {
  m.doc() = "Block assembly planning and simulation";

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Mat3& r, const Vec3& t) { return Pose{r, t}; }), py::arg("rotation"),
           py::arg("translation"))
      .def_readwrite("rotation", &Pose::rotation)
      .def_readwrite("translation", &Pose::translation)
      .def("inverse", [](const Pose& p) { return invert(p); })
      .def("__matmul__", [](const Pose& a, const Pose& b) { return compose(a, b); })
      .def("apply", [](const Pose& p, const Vec3& v) { return Vec3(p * v); })
      .def("__repr__", [](const Pose& p) {
        return "Pose(t=[" + std::to_string(p.translation.x()) + ", " +
               std::to_string(p.translation.y()) + ", " + std::to_string(p.translation.z()) + "])";
      });

  m.def("rot_x", &rot_x);
  m.def("rot_y", &rot_y);
  m.def("rot_z", &rot_z);
  m.def("reference_axis", [](const Mat3& r) { return reference_axis(r).name(); },
        "Signed object axis closest to world up, e.g. '+Z'");

  py::class_<Obb>(m, "Obb")
      .def(py::init([](const Vec3& c, const Vec3& h, const Mat3& r) { return Obb{c, h, r}; }),
           py::arg("center"), py::arg("half_extents"), py::arg("orientation") = Mat3::Identity())
      .def_readwrite("center", &Obb::center)
      .def_readwrite("half_extents", &Obb::half_extents)
      .def_readwrite("orientation", &Obb::orientation);
  m.def("sat_separation", &sat_separation);
  m.def("obb_intersect", &obb_intersect, py::arg("a"), py::arg("b"), py::arg("margin") = 0.0);

  py::class_<BlockModel>(m, "BlockModel")
      .def_readonly("id", &BlockModel::id)
      .def_readonly("diameter", &BlockModel::diameter)
      .def_property_readonly("symmetry_order", [](const BlockModel& b) { return b.symmetry.size(); })
      .def_property_readonly("surface_points",
                             [](const BlockModel& b) { return points_array(b.surface_points); })
      .def("extent", [](const BlockModel& b, int axis) { return b.extent(static_cast<Axis>(axis)); })
      .def("resting_height", &BlockModel::resting_height);

  py::class_<BlockLibrary>(m, "BlockLibrary")
      .def("__len__", &BlockLibrary::size)
      .def("__getitem__", &BlockLibrary::at, py::return_value_policy::reference_internal)
      .def_property_readonly("ids", [](const BlockLibrary& l) {
        std::vector<std::string> ids;
        for (const auto& b : l.models()) ids.push_back(b.id);
        return ids;
      });
  m.def("standard_library", [] { return BlockLibrary(standard_library()); });
  m.def("load_library", [](const std::string& path) { return library_from_json(read_json(path)); });

  py::class_<StructurePlan>(m, "StructurePlan")
      .def_readonly("name", &StructurePlan::name)
      .def_readonly("sequence", &StructurePlan::sequence)
      .def_property_readonly("model_ids", [](const StructurePlan& p) {
        std::vector<std::string> ids;
        for (const auto& e : p.entries) ids.push_back(e.model_id);
        return ids;
      });
  m.def("load_plan", [](const std::string& path) { return plan_from_json(read_json(path)); });
  m.def("validate_plan", [](const StructurePlan& p, const BlockLibrary& lib) {
    std::vector<std::string> out;
    for (const auto& f : validate_plan(p, lib).findings) out.push_back(f.message);
    return out;
  });

  m.def("grasp_candidate_count",
        [](const BlockModel& b) { return enumerate_candidates(b).size(); });

  m.def("add_error", [](const Pose& e, const Pose& g, const BlockModel& b) {
    return add_error(e, g, b.surface_points);
  });
  m.def("adds_error", [](const Pose& e, const Pose& g, const BlockModel& b) {
    return adds_error(e, g, b.surface_points);
  });
  m.def("ncm_ndeg", [](const Pose& e, const Pose& g, const BlockModel& b, double deg, double cm) {
    return ncm_ndeg(e, g, b.symmetry, deg, cm);
  });

  py::class_<PoseError>(m, "PoseError")
      .def_readonly("rot_xyz", &PoseError::rot_xyz)
      .def_readonly("trans_xyz", &PoseError::trans_xyz)
      .def("max_abs", &PoseError::max_abs);
  m.def("decompose_error", &decompose_error);
  m.def("calibrate", [](const Pose& truth, const Pose& est, const BlockModel& b,
                        double plane_height, double max_opening) {
    return calibrate(truth, est, b, plane_height, SqueezeSettings{max_opening, 0.0});
  }, py::arg("truth"), py::arg("estimated"), py::arg("model"), py::arg("plane_height") = 0.0,
        py::arg("max_opening") = 0.140);

  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init<>())
      .def_readwrite("rot_sigma", &NoiseModel::rot_sigma)
      .def_readwrite("trans_sigma", &NoiseModel::trans_sigma)
      .def_readwrite("depth_sigma", &NoiseModel::depth_sigma)
      .def_readwrite("gross_error_prob", &NoiseModel::gross_error_prob)
      .def_readwrite("gross_offset_max", &NoiseModel::gross_offset_max)
      .def_readwrite("detection_prob", &NoiseModel::detection_prob)
      .def_static("fitted", &NoiseModel::fitted)
      .def_static("zero", &NoiseModel::zero);

  py::class_<StructureStats>(m, "StructureStats")
      .def_readonly("structure", &StructureStats::structure)
      .def_readonly("blocks", &StructureStats::blocks)
      .def_readonly("trials", &StructureStats::trials)
      .def_readonly("successful_trials", &StructureStats::successful_trials)
      .def_readonly("detection_rate", &StructureStats::detection_rate)
      .def_readonly("step_success_rate", &StructureStats::step_success_rate)
      .def_readonly("trial_success_rate", &StructureStats::trial_success_rate);

  py::class_<BatchStats>(m, "BatchStats")
      .def_readonly("rows", &BatchStats::rows)
      .def_readonly("mean", &BatchStats::mean)
      .def_readonly("trial_count", &BatchStats::trial_count)
      .def("to_csv", &BatchStats::to_csv);

  m.def(
      "run_batch",
      [](const std::vector<StructurePlan>& plans, const BlockLibrary& lib, int trials,
         const NoiseModel& noise, bool calibration, std::uint64_t seed, double actuation_noise,
         int jobs) {
        SimulationConfig cfg;
        cfg.planner.calibration_enabled = calibration;
        cfg.actuation_noise = actuation_noise;
        py::gil_scoped_release release;
        return run_batch(plans, lib, trials, noise, cfg, seed, jobs);
      },
      py::arg("plans"), py::arg("library"), py::arg("trials"), py::arg("noise"),
      py::arg("calibration") = true, py::arg("seed") = 1, py::arg("actuation_noise") = 0.00005,
      py::arg("jobs") = 1);

  m.def("perception_recall", [](const BlockLibrary& lib, const NoiseModel& n, std::size_t samples,
                                std::uint64_t seed) {
    const auto r = perception_recall(lib, n, samples, seed);
    return py::dict(py::arg("translation_2cm") = r.translation_2cm,
                    py::arg("deg5_cm5") = r.deg5_cm5);
  });
}
