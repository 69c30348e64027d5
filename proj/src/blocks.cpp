#include "blockasm/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace blockasm {

namespace {

struct AlignedBox {
  Vec3 center;
  Vec3 half;
};

AlignedBox aligned(const Primitive& p) {
  return {p.local_pose.translation, p.local_pose.rotation.cwiseAbs() * p.half_extents};
}

bool inside_closed(const AlignedBox& b, const Vec3& p, double tol) {
  return ((p - b.center).cwiseAbs().array() <= b.half.array() + tol).all();
}

struct Face {
  Vec3 origin;  // face centre
  Vec3 u, v;    // half-edge vectors
  double area;
  std::size_t primitive;
};

std::vector<Face> faces_of(const std::vector<Primitive>& prims) {
  std::vector<Face> faces;
  for (std::size_t k = 0; k < prims.size(); ++k) {
    const AlignedBox b = aligned(prims[k]);
    for (int axis = 0; axis < 3; ++axis) {
      const int i = (axis + 1) % 3;
      const int j = (axis + 2) % 3;
      for (int s : {-1, 1}) {
        Face f;
        f.origin = b.center;
        f.origin[axis] += s * b.half[axis];
        f.u = Vec3::Zero();
        f.v = Vec3::Zero();
        f.u[i] = b.half[i];
        f.v[j] = b.half[j];
        f.area = 4.0 * b.half[i] * b.half[j];
        f.primitive = k;
        faces.push_back(f);
      }
    }
  }
  return faces;
}

/// Uniform hash grid for radius queries no larger than the cell size.
class PointGrid {
 public:
  explicit PointGrid(double cell) : cell_(cell) {}

  void insert(const Vec3& p) {
    points_.push_back(p);
    cells_[key(cell_of(p))].push_back(points_.size() - 1);
  }

  bool any_within(const Vec3& p, double radius) const {
    const Eigen::Vector3i c = cell_of(p);
    const double r2 = radius * radius;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
          if (it == cells_.end()) continue;
          for (std::size_t idx : it->second) {
            if ((points_[idx] - p).squaredNorm() < r2) return true;
          }
        }
      }
    }
    return false;
  }

  std::vector<Vec3> take() { return std::move(points_); }

 private:
  Eigen::Vector3i cell_of(const Vec3& p) const {
    return (p / cell_).array().floor().cast<int>();
  }
  static std::int64_t key(const Eigen::Vector3i& c) {
    return (static_cast<std::int64_t>(c.x()) * 73856093) ^
           (static_cast<std::int64_t>(c.y()) * 19349663) ^
           (static_cast<std::int64_t>(c.z()) * 83492791);
  }

  double cell_;
  std::vector<Vec3> points_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

std::vector<Obb> BlockModel::local_obbs() const {
  std::vector<Obb> out;
  out.reserve(primitives.size());
  for (const auto& p : primitives) {
    out.push_back({p.local_pose.translation, p.half_extents, p.local_pose.rotation});
  }
  return out;
}

std::vector<Obb> BlockModel::obbs(const Pose& pose) const {
  std::vector<Obb> out = local_obbs();
  for (auto& o : out) o = o.transformed(pose);
  return out;
}

Vec3 BlockModel::bounds_center() const {
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (const auto& p : primitives) {
    const AlignedBox b = aligned(p);
    lo = lo.cwiseMin(b.center - b.half);
    hi = hi.cwiseMax(b.center + b.half);
  }
  return 0.5 * (lo + hi);
}

Vec3 BlockModel::bounds_half_extents() const {
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (const auto& p : primitives) {
    const AlignedBox b = aligned(p);
    lo = lo.cwiseMin(b.center - b.half);
    hi = hi.cwiseMax(b.center + b.half);
  }
  return 0.5 * (hi - lo);
}

double BlockModel::resting_height(const Mat3& r) const {
  double lowest = 1e300;
  for (const auto& o : local_obbs()) {
    for (const auto& c : o.corners()) lowest = std::min(lowest, (r * c).z());
  }
  return -lowest;
}

BlockLibrary::BlockLibrary(std::vector<BlockModel> models) : models_(std::move(models)) {
  for (std::size_t i = 0; i < models_.size(); ++i) {
    for (std::size_t j = i + 1; j < models_.size(); ++j) {
      if (models_[i].id == models_[j].id) {
        throw std::invalid_argument("duplicate block id '" + models_[i].id + "'");
      }
    }
  }
}

const BlockModel* BlockLibrary::find(const std::string& id) const {
  for (const auto& m : models_) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

const BlockModel& BlockLibrary::at(const std::string& id) const {
  const BlockModel* m = find(id);
  if (!m) throw std::out_of_range("unknown block id '" + id + "'");
  return *m;
}

std::vector<Vec3> sample_surface(const BlockModel& model, double target_spacing,
                                 std::uint64_t seed) {
  if (!(target_spacing > 0.0)) {
    throw std::invalid_argument("sampling spacing must be positive");
  }
  if (model.primitives.empty()) throw std::invalid_argument("model has no primitives");
  double smallest = 1e300;
  for (const auto& p : model.primitives) {
    smallest = std::min(smallest, 2.0 * p.half_extents.minCoeff());
  }
  if (target_spacing > smallest) throw std::invalid_argument("spacing too coarse");

  std::vector<AlignedBox> boxes;
  for (const auto& p : model.primitives) boxes.push_back(aligned(p));
  const std::vector<Face> faces = faces_of(model.primitives);
  std::vector<double> areas;
  double total_area = 0.0;
  for (const auto& f : faces) {
    areas.push_back(f.area);
    total_area += f.area;
  }

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick_face(areas.begin(), areas.end());
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Draws a point on the union surface (points buried in another primitive
  // are rejected).
  auto draw = [&](Vec3& out) {
    const Face& f = faces[pick_face(rng)];
    out = f.origin + unit(rng) * f.u + unit(rng) * f.v;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      if (k != f.primitive && inside_closed(boxes[k], out, 1e-12)) return false;
    }
    return true;
  };

  const auto target = static_cast<std::size_t>(
      std::ceil(total_area / (target_spacing * target_spacing)));
  PointGrid grid(target_spacing);
  const double reject_radius = 0.5 * target_spacing;
  std::size_t accepted = 0;
  Vec3 p;
  for (std::size_t attempt = 0; attempt < 30 * target && accepted < target; ++attempt) {
    if (!draw(p) || grid.any_within(p, reject_radius)) continue;
    grid.insert(p);
    ++accepted;
  }
  for (std::size_t probe = 0; probe < 20 * target; ++probe) {
    if (!draw(p) || grid.any_within(p, target_spacing)) continue;
    grid.insert(p);
  }
  return grid.take();
}

double max_pairwise_distance(const std::vector<Vec3>& points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

bool symmetry_preserves_shape(const std::vector<Primitive>& primitives,
                              const SymmetryGroup& g, double tol) {
  std::vector<AlignedBox> boxes;
  for (const auto& p : primitives) boxes.push_back(aligned(p));
  for (const auto& s : g.elements) {
    for (const auto& b : boxes) {
      const AlignedBox m{s * b.center, s.cwiseAbs() * b.half};
      const bool found = std::any_of(boxes.begin(), boxes.end(), [&](const AlignedBox& o) {
        return (o.center - m.center).cwiseAbs().maxCoeff() < tol &&
               (o.half - m.half).cwiseAbs().maxCoeff() < tol;
      });
      if (!found) return false;
    }
  }
  return true;
}

SymmetryGroup detect_symmetry(const std::vector<Primitive>& primitives) {
  SymmetryGroup g;
  g.elements.clear();
  g.elements.push_back(Mat3::Identity());
  for (const auto& r : cube_rotations()) {
    if ((r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12) continue;
    if (symmetry_preserves_shape(primitives, SymmetryGroup{{r}})) g.elements.push_back(r);
  }
  return g;
}

double distance_to_surface(const BlockModel& model, const Vec3& p) {
  double best = 1e300;
  for (const auto& prim : model.primitives) {
    const AlignedBox b = aligned(prim);
    const Vec3 d = (p - b.center).cwiseAbs() - b.half;
    double dist;
    if ((d.array() <= 0.0).all()) {
      dist = -d.maxCoeff();
    } else {
      dist = d.cwiseMax(0.0).norm();
    }
    best = std::min(best, dist);
  }
  return best;
}

void finalize_model(BlockModel& model, double spacing, std::uint64_t seed, bool detect) {
  if (model.primitives.empty()) {
    throw std::invalid_argument("block '" + model.id + "' has no primitives");
  }
  for (const auto& p : model.primitives) {
    if (!(p.half_extents.array() > 0.0).all()) {
      throw std::invalid_argument("block '" + model.id + "' has a non-positive extent");
    }
    if (!is_rotation(p.local_pose.rotation)) {
      throw std::invalid_argument("block '" + model.id + "' has an invalid primitive pose");
    }
  }
  if (detect && model.symmetry.size() <= 1) model.symmetry = detect_symmetry(model.primitives);
  if (!model.symmetry.valid() || !symmetry_preserves_shape(model.primitives, model.symmetry)) {
    throw std::invalid_argument("block '" + model.id + "' has an invalid symmetry group");
  }
  model.surface_points = sample_surface(model, spacing, seed);
  model.diameter = max_pairwise_distance(model.surface_points);
}

BlockModel make_cuboid(const std::string& id, const Vec3& half_extents, double spacing,
                       std::uint64_t seed) {
  BlockModel m;
  m.id = id;
  m.primitives.push_back({half_extents, Pose::Identity()});
  finalize_model(m, spacing, seed);
  return m;
}

std::vector<BlockModel> standard_library(double spacing, std::uint64_t seed) {
  // Full edge lengths in millimetres.
  struct Spec {
    const char* id;
    double x, y, z;
  };
  static constexpr Spec kSpecs[] = {
      {"01", 40, 40, 40},   // small cube
      {"02", 80, 40, 40},   // brick
      {"03", 120, 30, 30},  // beam
      {"04", 80, 80, 30},   // slab
      {"05", 120, 60, 30},  // plank
      {"06", 60, 60, 60},   // large cube
      {"07", 30, 30, 90},   // pillar
      {"08", 90, 60, 40},   // block
  };
  std::vector<BlockModel> out;
  std::uint64_t k = 0;
  for (const auto& s : kSpecs) {
    out.push_back(make_cuboid(s.id, Vec3(s.x, s.y, s.z) * 0.0005, spacing, seed + k++));
  }
  return out;
}

}  // namespace blockasm
