#include "blockasm/structure.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace blockasm {

namespace {

struct Bounds {
  Vec3 lo = Vec3::Constant(1e300);
  Vec3 hi = Vec3::Constant(-1e300);
};

Bounds bounds_of(const std::vector<Obb>& boxes) {
  Bounds b;
  for (const auto& o : boxes) {
    for (const auto& c : o.corners()) {
      b.lo = b.lo.cwiseMin(c);
      b.hi = b.hi.cwiseMax(c);
    }
  }
  return b;
}

}  // namespace

std::vector<Pose> resolve_world_poses(const StructurePlan& plan, const Pose& anchor) {
  std::vector<Pose> out;
  out.reserve(plan.entries.size());
  for (const auto& e : plan.entries) out.push_back(compose(anchor, e.relative_pose));
  return out;
}

std::string to_string(FindingKind kind) {
  switch (kind) {
    case FindingKind::UnknownModel: return "unknown model";
    case FindingKind::Interpenetration: return "interpenetration";
    case FindingKind::Unsupported: return "unsupported block";
    case FindingKind::SequenceDefect: return "sequence defect";
    case FindingKind::AnchorNotIdentity: return "anchor not identity";
  }
  return "unknown";
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  if (findings.empty()) {
    os << "ok: no findings\n";
    return os.str();
  }
  for (const auto& f : findings) {
    os << to_string(f.kind) << ":";
    for (int e : f.entries) os << " " << e;
    os << " -- " << f.message << "\n";
  }
  return os.str();
}

bool is_permutation_of(const std::vector<int>& sequence, std::size_t n) {
  if (sequence.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (int i : sequence) {
    if (i < 0 || static_cast<std::size_t>(i) >= n || seen[i]) return false;
    seen[i] = true;
  }
  return true;
}

ValidationReport validate_plan(const StructurePlan& plan, const BlockLibrary& library,
                               const ValidationTolerances& tol) {
  ValidationReport report;
  const int n = static_cast<int>(plan.entries.size());
  if (n == 0) {
    report.findings.push_back({FindingKind::SequenceDefect, {}, "plan has no entries"});
    return report;
  }

  const Pose& anchor_rel = plan.entries[0].relative_pose;
  if ((anchor_rel.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      anchor_rel.translation.cwiseAbs().maxCoeff() > 1e-9) {
    report.findings.push_back(
        {FindingKind::AnchorNotIdentity, {0}, "entry 0 must sit at the identity pose"});
  }

  std::vector<std::vector<Obb>> boxes(n);
  std::vector<bool> known(n, false);
  for (int i = 0; i < n; ++i) {
    const BlockModel* m = library.find(plan.entries[i].model_id);
    if (!m) {
      report.findings.push_back({FindingKind::UnknownModel, {i},
                                 "model '" + plan.entries[i].model_id + "' not in library"});
      continue;
    }
    if (!plan.entries[i].relative_pose.valid()) {
      report.findings.push_back({FindingKind::SequenceDefect, {i}, "invalid relative pose"});
      continue;
    }
    known[i] = true;
    boxes[i] = m->obbs(plan.entries[i].relative_pose);
  }

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!known[i] || !known[j]) continue;
      double depth = 0.0;
      for (const auto& a : boxes[i]) {
        for (const auto& b : boxes[j]) depth = std::max(depth, penetration_depth(a, b));
      }
      if (depth > tol.contact) {
        std::ostringstream msg;
        msg << "entries overlap by " << depth << " m";
        report.findings.push_back({FindingKind::Interpenetration, {i, j}, msg.str()});
      }
    }
  }

  if (!is_permutation_of(plan.sequence, plan.entries.size())) {
    report.findings.push_back(
        {FindingKind::SequenceDefect, {}, "sequence is not a permutation of the entries"});
    return report;
  }
  if (!known[0]) return report;

  const double ground = bounds_of(boxes[0]).lo.z();
  std::vector<int> placed;
  for (int idx : plan.sequence) {
    if (!known[idx]) continue;
    if (idx != 0) {
      const Bounds b = bounds_of(boxes[idx]);
      bool supported = std::abs(b.lo.z() - ground) <= tol.support;
      for (int j : placed) {
        if (supported) break;
        const Bounds o = bounds_of(boxes[j]);
        const double ox = std::min(b.hi.x(), o.hi.x()) - std::max(b.lo.x(), o.lo.x());
        const double oy = std::min(b.hi.y(), o.hi.y()) - std::max(b.lo.y(), o.lo.y());
        supported = std::abs(b.lo.z() - o.hi.z()) <= tol.support && ox > tol.support &&
                    oy > tol.support;
      }
      if (!supported) {
        report.findings.push_back({FindingKind::Unsupported, {idx},
                                   "lowest face rests on neither the ground nor an earlier block"});
      }
    }
    placed.push_back(idx);
  }
  return report;
}

Pose anchor_on_plane(const StructurePlan& plan, const BlockLibrary& library, double x,
                     double y, double yaw, double plane_height) {
  if (plan.entries.empty()) throw std::invalid_argument("plan has no entries");
  const BlockModel& anchor = library.at(plan.entries[0].model_id);
  const Mat3 r = rot_z(yaw);
  return {r, Vec3(x, y, plane_height + anchor.resting_height(r))};
}

}  // namespace blockasm
