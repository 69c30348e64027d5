#include "blockasm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace blockasm {

namespace {

void require_points(std::span<const Vec3> points) {
  if (points.empty()) throw std::invalid_argument("metric needs a nonempty point set");
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

double add_error(const Pose& est, const Pose& gt, std::span<const Vec3> points) {
  require_points(points);
  double sum = 0.0;
  for (const auto& p : points) sum += ((est * p) - (gt * p)).norm();
  return sum / static_cast<double>(points.size());
}

double adds_error(const Pose& est, const Pose& gt, std::span<const Vec3> points) {
  require_points(points);
  std::vector<Vec3> moved;
  moved.reserve(points.size());
  for (const auto& p : points) moved.push_back(est * p);
  double sum = 0.0;
  for (const auto& p : points) {
    const Vec3 q = gt * p;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : moved) best = std::min(best, (m - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(points.size());
}

double translation_error(const Pose& est, const Pose& gt, const SymmetryGroup& sym) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& eq : symmetry_equivalents(gt, sym)) {
    best = std::min(best, (est.translation - eq.translation).norm());
  }
  return best;
}

bool ncm_ndeg(const Pose& est, const Pose& gt, const SymmetryGroup& sym, double n_deg,
              double n_cm) {
  const double max_angle = n_deg * std::numbers::pi / 180.0;
  const double max_dist = n_cm / 100.0;
  for (const auto& eq : symmetry_equivalents(gt, sym)) {
    if (geodesic_angle(est.rotation, eq.rotation) <= max_angle &&
        (est.translation - eq.translation).norm() <= max_dist) {
      return true;
    }
  }
  return false;
}

RecallTable build_recall_table(std::span<const PoseRecord> records, const BlockLibrary& library,
                               const RecallThresholds& thresholds) {
  struct Tally {
    std::size_t n = 0;
    std::array<std::size_t, 3> add{};
    std::size_t deg_cm = 0, trans = 0;
  };
  std::vector<Tally> tallies(library.size());
  for (const auto& r : records) {
    const BlockModel& m = library.at(r.object_id);
    const auto idx = static_cast<std::size_t>(&m - library.models().data());
    Tally& t = tallies[idx];
    ++t.n;
    const double err = m.symmetry.size() > 1
                           ? adds_error(r.estimated, r.ground_truth, m.surface_points)
                           : add_error(r.estimated, r.ground_truth, m.surface_points);
    for (int k = 0; k < 3; ++k) {
      if (err < thresholds.add_fractions[k] * m.diameter) ++t.add[k];
    }
    if (ncm_ndeg(r.estimated, r.ground_truth, m.symmetry, thresholds.deg, thresholds.cm)) {
      ++t.deg_cm;
    }
    if (translation_error(r.estimated, r.ground_truth, m.symmetry) <=
        thresholds.translation_cm / 100.0) {
      ++t.trans;
    }
  }

  RecallTable table;
  table.thresholds = thresholds;
  for (std::size_t i = 0; i < tallies.size(); ++i) {
    const Tally& t = tallies[i];
    if (t.n == 0) continue;
    RecallRow row;
    row.object_id = library.models()[i].id;
    row.count = t.n;
    const double n = static_cast<double>(t.n);
    for (int k = 0; k < 3; ++k) row.add[k] = t.add[k] / n;
    row.deg_cm = t.deg_cm / n;
    row.translation = t.trans / n;
    table.rows.push_back(row);
  }

  table.mean.object_id = "Mean";
  if (!table.rows.empty()) {
    const double n = static_cast<double>(table.rows.size());
    for (const auto& row : table.rows) {
      table.mean.count += row.count;
      for (int k = 0; k < 3; ++k) table.mean.add[k] += row.add[k] / n;
      table.mean.deg_cm += row.deg_cm / n;
      table.mean.translation += row.translation / n;
    }
  }
  return table;
}

std::string RecallTable::to_text() const {
  std::ostringstream os;
  char buf[160];
  auto label = [](double f) {
    char b[16];
    std::snprintf(b, sizeof b, "%gd", f);
    return std::string(b);
  };
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s %8s %8s %8s %8s\n", "Block",
                label(thresholds.add_fractions[0]).c_str(),
                label(thresholds.add_fractions[1]).c_str(),
                label(thresholds.add_fractions[2]).c_str(),
                (std::to_string(static_cast<int>(thresholds.deg)) + "deg" +
                 std::to_string(static_cast<int>(thresholds.cm)) + "cm")
                    .c_str(),
                (std::to_string(static_cast<int>(thresholds.translation_cm)) + "cm").c_str(),
                "n");
  os << buf;
  auto line = [&](const RecallRow& r) {
    std::snprintf(buf, sizeof buf, "%-8s %8s %8s %8s %8s %8s %8zu\n", r.object_id.c_str(),
                  percent(r.add[0]).c_str(), percent(r.add[1]).c_str(),
                  percent(r.add[2]).c_str(), percent(r.deg_cm).c_str(),
                  percent(r.translation).c_str(), r.count);
    os << buf;
  };
  for (const auto& r : rows) line(r);
  line(mean);
  return os.str();
}

std::string RecallTable::to_csv() const {
  std::ostringstream os;
  os << "block,add_" << thresholds.add_fractions[0] << "d,add_" << thresholds.add_fractions[1]
     << "d,add_" << thresholds.add_fractions[2] << "d,deg_cm,translation,count\n";
  auto line = [&](const RecallRow& r) {
    os << r.object_id << "," << percent(r.add[0]) << "," << percent(r.add[1]) << ","
       << percent(r.add[2]) << "," << percent(r.deg_cm) << "," << percent(r.translation) << ","
       << r.count << "\n";
  };
  for (const auto& r : rows) line(r);
  line(mean);
  return os.str();
}

}  // namespace blockasm
