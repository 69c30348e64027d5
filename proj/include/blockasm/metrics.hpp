#pragma once

#include "blockasm/blocks.hpp"
#include "blockasm/geometry.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace blockasm {

/// Mean distance between corresponding transformed points.
double add_error(const Pose& est, const Pose& gt, std::span<const Vec3> points);

/// Mean distance from each gt-transformed point to the nearest est-transformed
/// point (exact all-pairs search).
double adds_error(const Pose& est, const Pose& gt, std::span<const Vec3> points);

/// Translation error minimised over symmetry-equivalent ground truths.
double translation_error(const Pose& est, const Pose& gt, const SymmetryGroup& sym);

/// Some symmetry-equivalent ground truth is within `n_deg` degrees and `n_cm`
/// centimetres at once.
bool ncm_ndeg(const Pose& est, const Pose& gt, const SymmetryGroup& sym, double n_deg,
              double n_cm);

struct PoseRecord {
  std::string object_id;
  Pose estimated;
  Pose ground_truth;
};

struct RecallThresholds {
  std::array<double, 3> add_fractions{0.02, 0.05, 0.10};  // of the model diameter
  double deg = 5.0;
  double cm = 5.0;
  double translation_cm = 2.0;
};

struct RecallRow {
  std::string object_id;
  std::size_t count = 0;
  std::array<double, 3> add{};  // ADD or ADD-S recall per fraction
  double deg_cm = 0.0;
  double translation = 0.0;
};

struct RecallTable {
  RecallThresholds thresholds;
  std::vector<RecallRow> rows;
  RecallRow mean;

  std::string to_text() const;
  std::string to_csv() const;
};

/// Rows follow library order; objects with |symmetry| > 1 use ADD-S.
/// Throws std::out_of_range for ids missing from the library.
RecallTable build_recall_table(std::span<const PoseRecord> records, const BlockLibrary& library,
                               const RecallThresholds& thresholds = {});

}  // namespace blockasm
