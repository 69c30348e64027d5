#pragma once

#include "blockasm/collision.hpp"
#include "blockasm/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace blockasm {

/// Axis-aligned cuboid in the object frame.
struct Primitive {
  Vec3 half_extents = Vec3::Constant(0.02);
  Pose local_pose;
};

struct BlockModel {
  std::string id;
  std::vector<Primitive> primitives;
  SymmetryGroup symmetry;
  std::vector<Vec3> surface_points;
  double diameter = 0.0;

  std::vector<Obb> local_obbs() const;
  std::vector<Obb> obbs(const Pose& pose) const;

  /// Object-frame bounding box of the primitives.
  Vec3 bounds_center() const;
  Vec3 bounds_half_extents() const;
  /// Full extent along an object axis.
  double extent(Axis axis) const { return 2.0 * bounds_half_extents()[static_cast<int>(axis)]; }
  /// Height of the object origin above a plane it rests on with rotation `r`.
  double resting_height(const Mat3& r) const;
};

struct BlockInstance {
  std::string model_id;
  Pose pose;
};

class BlockLibrary {
 public:
  BlockLibrary() = default;
  explicit BlockLibrary(std::vector<BlockModel> models);

  const BlockModel* find(const std::string& id) const;
  /// Throws std::out_of_range for unknown ids.
  const BlockModel& at(const std::string& id) const;
  const std::vector<BlockModel>& models() const { return models_; }
  std::size_t size() const { return models_.size(); }

 private:
  std::vector<BlockModel> models_;
};

inline constexpr double kDefaultSamplingSpacing = 0.005;
inline constexpr std::uint64_t kDefaultSamplingSeed = 7;

/// Area-weighted dart throwing over the union surface. No two samples closer
/// than 0.5 * spacing; a gap-filling pass keeps coverage within the spacing.
std::vector<Vec3> sample_surface(const BlockModel& model, double target_spacing,
                                 std::uint64_t seed = kDefaultSamplingSeed);

double max_pairwise_distance(const std::vector<Vec3>& points);

/// Cube-group rotations that map the primitive set onto itself.
SymmetryGroup detect_symmetry(const std::vector<Primitive>& primitives);

/// True when every element maps the primitive set onto itself.
bool symmetry_preserves_shape(const std::vector<Primitive>& primitives,
                              const SymmetryGroup& g, double tol = 1e-9);

/// Distance from a point to the nearest primitive face.
double distance_to_surface(const BlockModel& model, const Vec3& p);

/// Fills surface_points and diameter. The symmetry group is detected when the
/// model carries only the identity and `detect` is set.
void finalize_model(BlockModel& model, double spacing, std::uint64_t seed,
                    bool detect = true);

BlockModel make_cuboid(const std::string& id, const Vec3& half_extents,
                       double spacing = kDefaultSamplingSpacing,
                       std::uint64_t seed = kDefaultSamplingSeed);

/// The eight bundled blocks, ids "01".."08".
std::vector<BlockModel> standard_library(double spacing = kDefaultSamplingSpacing,
                                         std::uint64_t seed = kDefaultSamplingSeed);

}  // namespace blockasm
