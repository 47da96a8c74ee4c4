#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graspkit/graspability.hpp"
#include "graspkit/scene_synth.hpp"

namespace graspkit {

enum class Verdict { Valid, EdgePoint, Slip, Collision, MultiPart, OffSurface };

inline constexpr std::array<Verdict, 6> kAllVerdicts{Verdict::Valid, Verdict::EdgePoint, Verdict::Slip,
                                                     Verdict::Collision, Verdict::MultiPart, Verdict::OffSurface};

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Valid: return "valid";
    case Verdict::EdgePoint: return "edge_point";
    case Verdict::Slip: return "slip";
    case Verdict::Collision: return "collision";
    case Verdict::MultiPart: return "multi_part";
    case Verdict::OffSurface: return "off_surface";
  }
  return "unknown";
}

struct CandidateVerdict {
  Verdict verdict = Verdict::OffSurface;
  GraspCandidate candidate;
  std::optional<int> part_id;
  int part_class = 0;
};

/// Ground-truth acceptance thresholds. The depth rules mirror the detector's.
struct ClassificationMargins {
  double edge_margin_px = 3.0;
  double slip_slope_deg = 30.0;
  double contact_band = kDefaultContactBand;
  double collision_clearance = 0.002;
  double finger_descent = 0.005;
};

namespace detail {

inline bool label_within(const Raster<std::uint16_t>& labels, int u, int v, double radius,
                         const std::function<bool(int)>& pred) {
  const int r = static_cast<int>(std::floor(radius));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy > radius * radius) continue;
      const int x = u + dx, y = v + dy;
      const int lbl = labels.contains(x, y) ? labels(x, y) : -1;
      if (pred(lbl)) return true;
    }
  return false;
}

}  // namespace detail

/// Judges one candidate against the scene's noise-free ground truth.
///
/// Checks run in a fixed order and the first failure wins:
///  1. OffSurface / EdgePoint. Suction and TwoFinger: the grasp pixel must be
///     labelled with a part and no other label (or the raster border) may lie
///     within edge_margin_px. TwoFingerInner: the target is the part most
///     present under the opening sweep (none: OffSurface); the grasp pixel
///     must see no part within edge_margin_px.
///  2. Collision: the gripper collision footprint meets ground-truth geometry
///     above the collision depth.
///  3. MultiPart: the engaged contact pixels belong to two or more parts.
///  4. Slip (two-finger kinds): one finger engages nothing of the target, or
///     the mean ground-truth normal of the engaged surface is inclined more
///     than slip_slope_deg to the approach axis.
inline CandidateVerdict classify(const GraspCandidate& c, const SyntheticScene& scene, const GripperModel& model,
                                 const ClassificationMargins& m = {}) {
  const auto& labels = scene.labels;
  const auto& depth = scene.clean_depth;
  if (!labels.contains(c.u, c.v)) throw InvalidArgument("classify: candidate outside the raster");

  CandidateVerdict out;
  out.candidate = c;
  out.part_class = scene.part_class;
  auto finish = [&](Verdict v) {
    out.verdict = v;
    if (out.part_id && scene.part_class == 0)
      if (const auto* p = scene.find_part(*out.part_id)) out.part_class = p->part_class;
    return out;
  };

  const auto& k = scene.rendered.intrinsics();
  const double z = depth(c.u, c.v);
  const GripperTemplate tpl = rasterize_template(model, z / k.fx, c.grasp_z_rotation);
  const TemplateOffsets offsets = TemplateOffsets::from(tpl);
  const bool inner = model.kind == GripperKind::TwoFingerInner;

  double collision_limit = -std::numeric_limits<double>::infinity();
  if (model.kind == GripperKind::TwoFinger) collision_limit = z + m.finger_descent - m.collision_clearance;
  if (inner) collision_limit = z - m.collision_clearance;

  struct Engaged {
    int x, y, side, label;
  };
  std::vector<Engaged> engaged;
  for (const auto& o : offsets.contact) {
    const int x = c.u + o.dx, y = c.v + o.dy;
    if (!labels.contains(x, y)) continue;
    const double d = depth(x, y);
    const bool hit = model.kind == GripperKind::Suction ? std::abs(d - z) <= m.contact_band : d < collision_limit;
    if (hit) engaged.push_back({x, y, o.side, labels(x, y)});
  }

  // 1. surface / edge
  if (!inner) {
    const int lbl = labels(c.u, c.v);
    if (lbl == 0) return finish(Verdict::OffSurface);
    out.part_id = lbl;
    if (detail::label_within(labels, c.u, c.v, m.edge_margin_px, [lbl](int l) { return l != lbl; }))
      return finish(Verdict::EdgePoint);
  } else {
    std::map<int, int> counts;
    for (const auto& e : engaged)
      if (e.label != 0) ++counts[e.label];
    int best = 0, best_n = 0;
    for (const auto& [l, n] : counts)
      if (n > best_n) {
        best = l;
        best_n = n;
      }
    if (best == 0) return finish(Verdict::OffSurface);
    out.part_id = best;
    if (labels(c.u, c.v) != 0) return finish(Verdict::OffSurface);
    if (detail::label_within(labels, c.u, c.v, m.edge_margin_px, [](int l) { return l != 0; }))
      return finish(Verdict::EdgePoint);
  }

  // 2. collision
  for (const auto& o : offsets.collision) {
    const int x = c.u + o.dx, y = c.v + o.dy;
    if (labels.contains(x, y) && static_cast<double>(depth(x, y)) < collision_limit)
      return finish(Verdict::Collision);
  }

  // 3. multiple parts under the engaged region
  {
    int first = 0;
    for (const auto& e : engaged) {
      if (e.label == 0) continue;
      if (first == 0) first = e.label;
      else if (e.label != first) return finish(Verdict::MultiPart);
    }
  }

  // 4. slip
  if (model.kind != GripperKind::Suction) {
    bool side_hit[3] = {false, false, false};
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& e : engaged)
      if (e.label == *out.part_id) {
        side_hit[e.side] = true;
        // the inner grip presses on the ring top rather than the hole bottom
        mean += scene.normals(e.x, e.y);
      }
    if (!side_hit[1] || !side_hit[2]) return finish(Verdict::Slip);
    const Eigen::Vector3d axis = -c.approach;
    const double cosang = mean.normalized().dot(axis.normalized());
    const double slope = std::acos(std::clamp(cosang, -1.0, 1.0)) * 180.0 / std::numbers::pi;
    if (slope > m.slip_slope_deg) return finish(Verdict::Slip);
  }
  return finish(Verdict::Valid);
}

struct ClassStats {
  int total = 0;
  int non_graspable = 0;
  std::optional<double> valid_rate_percent;
};

struct EvaluationReport {
  int total_candidates = 0;
  int non_graspable = 0;
  std::optional<double> valid_rate_percent;  // undefined when no candidates
  std::map<int, ClassStats> per_class;
  std::map<Verdict, int> per_verdict;
};

/// Valid-candidate rate in percent: (1 - non_graspable / total) * 100.
inline std::optional<double> valid_rate_percent(int non_graspable, int total) {
  if (total <= 0) return std::nullopt;
  return (1.0 - static_cast<double>(non_graspable) / static_cast<double>(total)) * 100.0;
}

inline EvaluationReport valid_rate(const std::vector<CandidateVerdict>& verdicts) {
  EvaluationReport r;
  for (auto v : kAllVerdicts) r.per_verdict[v] = 0;
  for (const auto& v : verdicts) {
    const bool bad = v.verdict != Verdict::Valid;
    ++r.total_candidates;
    r.non_graspable += bad;
    ++r.per_verdict[v.verdict];
    auto& cls = r.per_class[v.part_class];
    ++cls.total;
    cls.non_graspable += bad;
  }
  r.valid_rate_percent = valid_rate_percent(r.non_graspable, r.total_candidates);
  for (auto& [id, cls] : r.per_class) cls.valid_rate_percent = valid_rate_percent(cls.non_graspable, cls.total);
  return r;
}

struct BenchmarkConfig {
  std::vector<int> classes{1, 2, 3, 4, 5, 6, 7};
  int scenes_per_class = 5;
  int candidates_per_scene = 9;
  std::uint64_t seed = 1;
  int threads = 1;
  BenchmarkSceneOptions scene;
  ClassificationMargins margins;
};

/// Detector settings used by the benchmark for one approach type.
inline DetectionParams benchmark_detection_params(GripperKind kind, const BenchmarkConfig& cfg) {
  DetectionParams p;
  p.rules.floor_depth = cfg.scene.bin.floor_depth;
  p.extraction.max_candidates = cfg.candidates_per_scene;
  p.contact_band = cfg.margins.contact_band;
  p.rules.collision_clearance = cfg.margins.collision_clearance;
  p.rules.finger_descent = cfg.margins.finger_descent;
  switch (kind) {
    case GripperKind::Suction:
      p.extraction.min_score = 0.5;
      p.extraction.nms_radius = 12.0;
      break;
    case GripperKind::TwoFinger:
      p.extraction.min_score = 0.1;
      p.extraction.nms_radius = 12.0;
      break;
    case GripperKind::TwoFingerInner:
      p.extraction.min_score = 0.05;
      p.extraction.nms_radius = 8.0;
      break;
  }
  return p;
}

struct SceneOutcome {
  int part_class = 0;
  int scene_index = 0;
  std::uint64_t seed = 0;
  std::vector<CandidateVerdict> verdicts;
};

struct BenchmarkResult {
  EvaluationReport report;
  std::vector<SceneOutcome> scenes;  // ordered by (class, scene index)
};

inline std::uint64_t benchmark_scene_seed(std::uint64_t seed, int part_class, int scene_index) {
  return derive_seed(seed, static_cast<std::uint64_t>(part_class), static_cast<std::uint64_t>(scene_index));
}

/// Generates, detects and classifies every (class, scene) pair. Scenes run in
/// parallel; aggregation follows (class, scene index, candidate rank).
inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.scenes_per_class < 1 || cfg.candidates_per_scene < 1 || cfg.classes.empty())
    throw InvalidArgument("run_benchmark: parameters must be >= 1");
  for (int c : cfg.classes) part_class_spec(c);

  BenchmarkResult result;
  for (int c : cfg.classes)
    for (int s = 0; s < cfg.scenes_per_class; ++s)
      result.scenes.push_back({c, s, benchmark_scene_seed(cfg.seed, c, s), {}});

  std::vector<std::string> errors(result.scenes.size());
  parallel_rows(static_cast<int>(result.scenes.size()), cfg.threads, [&](int i) {
    auto& job = result.scenes[static_cast<std::size_t>(i)];
    try {
      const auto& spec = part_class_spec(job.part_class);
      const SyntheticScene scene = generate_benchmark(job.part_class, spec.default_parts, job.seed, cfg.scene);
      const GripperModel model = default_gripper(spec.gripper);
      const auto params = benchmark_detection_params(spec.gripper, cfg);
      for (const auto& cand : detect(scene.rendered, model, params))
        job.verdicts.push_back(classify(cand, scene, model, cfg.margins));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw Error("benchmark failed: " + e);

  std::vector<CandidateVerdict> all;
  for (const auto& s : result.scenes) all.insert(all.end(), s.verdicts.begin(), s.verdicts.end());
  result.report = valid_rate(all);
  return result;
}

// ---------------------------------------------------------------------------
// Report output

inline std::string format_rate(const std::optional<double>& r) {
  if (!r) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << *r;
  return os.str();
}

/// Tab-separated records with a one-line schema header.
inline std::string format_report_records(const EvaluationReport& r) {
  std::ostringstream os;
  os << "#kind\tkey\ttotal\tnon_graspable\tvalid_rate_percent\n";
  for (const auto& [id, c] : r.per_class)
    os << "class\t" << id << '\t' << c.total << '\t' << c.non_graspable << '\t' << format_rate(c.valid_rate_percent)
       << '\n';
  for (const auto& [v, n] : r.per_verdict) os << "verdict\t" << to_string(v) << '\t' << n << "\t-\t-\n";
  os << "overall\tall\t" << r.total_candidates << '\t' << r.non_graspable << '\t' << format_rate(r.valid_rate_percent)
     << '\n';
  return os.str();
}

/// Human-readable per-class bar table.
inline std::string format_report_table(const EvaluationReport& r) {
  std::ostringstream os;
  os << "class  name            n    rate    \n";
  for (const auto& [id, c] : r.per_class) {
    const char* name = (id >= 1 && id <= 7) ? part_class_spec(id).name : "mixed";
    const int bars = c.valid_rate_percent ? static_cast<int>(std::lround(*c.valid_rate_percent / 2.5)) : 0;
    os << std::setw(5) << id << "  " << std::left << std::setw(14) << name << std::right << std::setw(4) << c.total
       << "  " << std::setw(6) << format_rate(c.valid_rate_percent) << "%  " << std::string(static_cast<std::size_t>(bars), '#')
       << '\n';
  }
  os << "overall " << r.total_candidates << " candidates, " << r.non_graspable << " non-graspable, valid rate "
     << format_rate(r.valid_rate_percent) << "%\n";
  for (const auto& [v, n] : r.per_verdict) os << "  " << std::left << std::setw(12) << to_string(v) << std::right << n << '\n';
  return os.str();
}

}  // namespace graspkit
