// graspkit command-line entry point.
//
// Exit codes: 0 success, 1 runtime or data failure, 2 usage error.

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graspkit.hpp"

namespace fs = std::filesystem;
using namespace graspkit;

namespace {

constexpr const char* kOutputDirEnv = "GRASPKIT_OUTPUT_DIR";

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 1; i < argc; ++i) {
    if (i > 1) s += ' ';
    s += argv[i];
  }
  return s;
}

/// --out wins; otherwise the environment override; otherwise none.
std::optional<fs::path> output_dir(const std::string& flag) {
  if (!flag.empty()) return fs::path(flag);
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return fs::path(env);
  return std::nullopt;
}

void write_run_manifest(const fs::path& dir, const std::string& command, const std::string& args,
                        const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ostringstream os;
  os << "# graspkit run manifest\n";
  os << "version " << GRASPKIT_VERSION << "\n";
  os << "command " << command << "\n";
  os << "args " << args << "\n";
  for (const auto& [k, v] : entries) os << k << ' ' << v << "\n";
  write_file_atomic(dir / "manifest.txt", os.str());
}

std::string full_precision(double x) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return os.str();
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw IoError(what + " not found: " + path);
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  int part_class = 0;
  int parts = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int run_synth(const SynthArgs& a, const std::string& args) {
  const auto dir = output_dir(a.out);
  if (!dir) throw UsageError("synth: --out is required (or set " + std::string(kOutputDirEnv) + ")");
  const SyntheticScene scene = generate_benchmark(a.part_class, a.parts, a.seed);
  save_scene(scene, *dir,
             {"seed " + std::to_string(a.seed), "parts " + std::to_string(a.parts),
              "version " + std::string(GRASPKIT_VERSION), "args " + args});
  std::cout << "wrote scene class " << a.part_class << " (" << part_class_spec(a.part_class).name << "), "
            << a.parts << " parts, seed " << a.seed << " to " << dir->string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
  std::string scene;
  std::string depth;
  std::string intrinsics;
  std::string gripper;
  std::string params;
  std::string out;
  int threads = 1;
};

std::string format_candidates(const std::vector<GraspCandidate>& cands) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "#rank\tu\tv\trotation_index\trotation_rad\tg4\tomega\tg6\tscore\tx\ty\tz\tapproach_x\tapproach_y\t"
        "approach_z\n";
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& c = cands[i];
    os << i << '\t' << c.u << '\t' << c.v << '\t' << c.rotation_index << '\t' << c.grasp_z_rotation << '\t' << c.g4
       << '\t' << c.omega << '\t' << c.g6 << '\t' << c.score << '\t' << c.position.x() << '\t' << c.position.y()
       << '\t' << c.position.z() << '\t' << c.approach.x() << '\t' << c.approach.y() << '\t' << c.approach.z()
       << '\n';
  }
  return os.str();
}

int run_detect(const DetectArgs& a, const std::string& args) {
  if (a.scene.empty() == a.depth.empty()) throw UsageError("detect: give exactly one of --scene or --depth");
  require_file(a.gripper, "gripper config");
  const GripperModel model = load_gripper_model(a.gripper);

  KeyValueConfig cfg;
  if (!a.params.empty()) {
    require_file(a.params, "detection params");
    cfg = KeyValueConfig::load(a.params);
  }
  DetectionParams params = parse_detection_params(cfg);

  std::optional<DepthMap> depth;
  if (!a.scene.empty()) {
    if (!fs::is_directory(a.scene)) throw IoError("scene directory not found: " + a.scene);
    SyntheticScene scene = load_scene(a.scene);
    // the scene's bin floor is known geometry unless the params override it
    if (!cfg.has("floor_depth_m")) params.rules.floor_depth = scene.bin.floor_depth;
    depth = std::move(scene.rendered);
  } else {
    require_file(a.depth, "depth map");
    depth = a.intrinsics.empty() ? load_pfm(a.depth) : load_pfm(a.depth, a.intrinsics);
  }

  const auto cands = detect(*depth, model, params, a.threads);
  const std::string records = format_candidates(cands);
  if (const auto dir = output_dir(a.out)) {
    fs::create_directories(*dir);
    write_file_atomic(*dir / "candidates.tsv", records);
    write_run_manifest(*dir, "detect", args,
                       {{"input", a.scene.empty() ? a.depth : a.scene},
                        {"gripper", a.gripper},
                        {"gripper_kind", to_string(model.kind)},
                        {"params", a.params.empty() ? "-" : a.params},
                        {"seed", "-"},
                        {"candidates", std::to_string(cands.size())}});
    std::cout << cands.size() << " candidates written to " << (*dir / "candidates.tsv").string() << "\n";
    if (!cands.empty()) {
      const auto& c = cands.front();
      std::cout << "top: u=" << c.u << " v=" << c.v << " rotation=" << c.rotation_index << " g6=" << c.g6
                << " position=(" << c.position.transpose() << ") approach=(" << c.approach.transpose() << ")\n";
    }
  } else {
    std::cout << records;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  int scenes = 5;
  int candidates = 9;
  std::uint64_t seed = 1;
  std::optional<double> min_rate;
  std::vector<int> classes{1, 2, 3, 4, 5, 6, 7};
  int threads = 1;
  std::string out;
};

std::string format_verdicts(const BenchmarkResult& r) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "#class\tscene\tseed\trank\tu\tv\trotation_index\tg6\tverdict\tpart_id\n";
  for (const auto& s : r.scenes)
    for (std::size_t i = 0; i < s.verdicts.size(); ++i) {
      const auto& v = s.verdicts[i];
      os << s.part_class << '\t' << s.scene_index << '\t' << s.seed << '\t' << i << '\t' << v.candidate.u << '\t'
         << v.candidate.v << '\t' << v.candidate.rotation_index << '\t' << v.candidate.g6 << '\t'
         << to_string(v.verdict) << '\t' << (v.part_id ? std::to_string(*v.part_id) : "-") << '\n';
    }
  return os.str();
}

int run_eval(const EvalArgs& a, const std::string& args) {
  BenchmarkConfig cfg;
  cfg.classes = a.classes;
  cfg.scenes_per_class = a.scenes;
  cfg.candidates_per_scene = a.candidates;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  const BenchmarkResult result = run_benchmark(cfg);
  const EvaluationReport& rep = result.report;
  std::cout << format_report_table(rep);

  if (const auto dir = output_dir(a.out)) {
    fs::create_directories(*dir);
    write_file_atomic(*dir / "report.tsv", format_report_records(rep));
    write_file_atomic(*dir / "report.txt", format_report_table(rep));
    write_file_atomic(*dir / "verdicts.tsv", format_verdicts(result));
    std::string classes;
    for (int c : a.classes) classes += (classes.empty() ? "" : ",") + std::to_string(c);
    write_run_manifest(*dir, "eval", args,
                       {{"seed", std::to_string(a.seed)},
                        {"scenes", std::to_string(a.scenes)},
                        {"candidates", std::to_string(a.candidates)},
                        {"classes", classes},
                        {"min_rate", a.min_rate ? full_precision(*a.min_rate) : "-"}});
  }

  if (a.min_rate) {
    if (!rep.valid_rate_percent || *rep.valid_rate_percent < *a.min_rate) {
      std::cerr << "valid rate " << format_rate(rep.valid_rate_percent) << "% is below the gate of " << *a.min_rate
                << "%\n";
      return 1;
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
  std::string samples;
  std::string out;
  int generate = 0;
  std::uint64_t seed = 1;
  double rot_noise_deg = 0.0;
  double trans_noise_mm = 0.0;
  std::vector<double> ground_truth;
  std::string write;
};

RigidTransform random_pose(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return {q.normalized(), Eigen::Vector3d(0.5 * u(rng), 0.5 * u(rng), 0.5 + 0.5 * u(rng))};
}

int run_calibrate(const CalibrateArgs& a, const std::string& args) {
  if (a.generate > 0) {
    if (a.write.empty()) throw UsageError("calibrate: --generate needs --write <file>");
    if (a.generate < 3) throw UsageError("calibrate: --generate needs at least 3 samples");
    RigidTransform gt = random_pose(derive_seed(a.seed, 0x6774ull));
    if (!a.ground_truth.empty()) {
      if (a.ground_truth.size() != 7) throw UsageError("calibrate: --ground-truth takes 7 numbers");
      std::array<double, 7> t{};
      std::copy(a.ground_truth.begin(), a.ground_truth.end(), t.begin());
      gt = RigidTransform::from_tuple(t);
    }
    const auto samples = generate_dataset(gt, a.generate, a.rot_noise_deg * std::numbers::pi / 180.0,
                                          a.trans_noise_mm * 1e-3, a.seed);
    write_file_atomic(a.write, format_samples(samples, gt));
    std::cout << "wrote " << samples.size() << " samples to " << a.write << "\n";
    return 0;
  }
  if (a.samples.empty()) throw UsageError("calibrate: give --samples <file> or --generate N --write <file>");
  require_file(a.samples, "samples file");
  const SampleFile file = parse_samples(read_file(a.samples));
  const RigidTransform x = solve_handeye(file.samples);
  const ResidualStats res = residual(file.samples, x);

  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "#record\tvalue\n";
  os << "base_from_camera\t" << format_pose(x) << "\n";
  os << "residual_rotation_rms_rad\t" << res.rotation_rms << "\n";
  os << "residual_translation_rms_m\t" << res.translation_rms << "\n";
  if (file.ground_truth) {
    os << "error_rotation_rad\t" << x.angle_to(*file.ground_truth) << "\n";
    os << "error_translation_m\t" << x.distance_to(*file.ground_truth) << "\n";
  }
  std::cout << os.str();
  if (const auto dir = output_dir(a.out)) {
    fs::create_directories(*dir);
    write_file_atomic(*dir / "calibration.tsv", os.str());
    write_run_manifest(*dir, "calibrate", args,
                       {{"samples", a.samples}, {"sample_count", std::to_string(file.samples.size())}, {"seed", "-"}});
  }
  return 0;
}

// ---------------------------------------------------------------------------
// check-pick

struct PickArgs {
  double pressure = 0.0;
  double threshold_kpa = kSuctionThresholdKpa;
  double width = 0.0;
  double closed = 0.0;
  double tolerance = 0.001;
  std::string image;
  std::vector<int> roi;
  double r_threshold = 128.0;
  std::string picked_when = "below";
};

int run_check_suction(const PickArgs& a) {
  const bool picked = suction_picked({a.pressure}, a.threshold_kpa);
  std::cout << "picked " << (picked ? "true" : "false") << "\n";
  return 0;
}

int run_check_width(const PickArgs& a) {
  const bool picked = width_picked(a.width, a.closed, a.tolerance);
  std::cout << "picked " << (picked ? "true" : "false") << "\n";
  return 0;
}

int run_check_redness(const PickArgs& a) {
  if (a.roi.size() != 4) throw UsageError("check-pick redness: --roi takes x y width height");
  require_file(a.image, "image");
  RednessCheckConfig cfg;
  cfg.roi = {a.roi[0], a.roi[1], a.roi[2], a.roi[3]};
  cfg.r_threshold = a.r_threshold;
  cfg.picked_when = a.picked_when == "above" ? PickedWhen::Above : PickedWhen::Below;
  const auto r = redness_picked(load_ppm(a.image), cfg);
  std::cout << "picked " << (r.picked ? "true" : "false") << "\nr_mean " << full_precision(r.r_mean) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// assembly

struct AssemblyArgs {
  std::string file;
  std::string from;
  std::string to;
  std::string part;
  std::vector<std::string> assignments;
  std::string out;
};

AssemblyGraph load_assembly(const std::string& path) {
  require_file(path, "assembly file");
  try {
    return parse_assembly(read_file(path));
  } catch (const AssemblyError& e) {
    throw AssemblyError(0, path + ": " + e.what());
  }
}

int run_assembly_resolve(const AssemblyArgs& a) {
  const AssemblyGraph g = load_assembly(a.file);
  std::cout << format_pose(g.resolve(a.from, a.to)) << "\n";
  return 0;
}

int run_assembly_swap(const AssemblyArgs& a) {
  const AssemblyGraph g = load_assembly(a.file);
  std::map<std::string, double> params;
  for (const auto& p : g.definition().parts)
    if (p.name == a.part) params = p.params;
  for (const auto& kv : a.assignments) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("assembly swap: expected key=value, got '" + kv + "'");
    try {
      params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("assembly swap: value of '" + kv.substr(0, eq) + "' is not a number");
    }
  }
  const AssemblyGraph swapped = swap_part(g, a.part, params);
  const std::string text = format_assembly(swapped.definition());
  if (!a.out.empty()) {
    write_file_atomic(a.out, text);
    std::cout << "wrote " << a.out << "\n";
  } else if (const auto dir = output_dir("")) {
    fs::create_directories(*dir);
    write_file_atomic(*dir / "assembly.txt", text);
    std::cout << "wrote " << (*dir / "assembly.txt").string() << "\n";
  } else {
    std::cout << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graspkit: grasp detection, evaluation, calibration and assembly tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", GRASPKIT_VERSION);
  const std::string args = command_line(argc, argv);
  std::function<int()> action;

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic bin scene");
  cmd_synth->add_option("--class", synth.part_class, "Part class 1-7")->required()->check(CLI::Range(1, 7));
  cmd_synth->add_option("--parts", synth.parts, "Number of parts")->required()->check(CLI::Range(1, 200));
  cmd_synth->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  cmd_synth->add_option("--out", synth.out, "Scene output directory");
  cmd_synth->callback([&] { action = [&] { return run_synth(synth, args); }; });

  DetectArgs det;
  auto* cmd_detect = app.add_subcommand("detect", "Detect grasp candidates on a depth map");
  cmd_detect->add_option("--scene", det.scene, "Scene directory written by synth");
  cmd_detect->add_option("--depth", det.depth, "Depth map (PFM)");
  cmd_detect->add_option("--intrinsics", det.intrinsics, "Intrinsics file (default: PFM sidecar)");
  cmd_detect->add_option("--gripper", det.gripper, "Gripper config")->required();
  cmd_detect->add_option("--params", det.params, "Detection parameter config");
  cmd_detect->add_option("--out", det.out, "Output directory");
  cmd_detect->add_option("--threads", det.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd_detect->callback([&] { action = [&] { return run_detect(det, args); }; });

  EvalArgs ev;
  double min_rate = 0.0;
  auto* cmd_eval = app.add_subcommand("eval", "Run the synthetic valid-rate benchmark");
  cmd_eval->add_option("--scenes", ev.scenes, "Scenes per class")->check(CLI::Range(1, 1000))->capture_default_str();
  cmd_eval->add_option("--candidates", ev.candidates, "Candidates per scene")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();
  cmd_eval->add_option("--seed", ev.seed, "Random seed")->capture_default_str();
  auto* min_rate_opt = cmd_eval->add_option("--min-rate", min_rate, "Fail unless the overall rate reaches this");
  cmd_eval->add_option("--classes", ev.classes, "Part classes")->delimiter(',')->check(CLI::Range(1, 7));
  cmd_eval->add_option("--threads", ev.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd_eval->add_option("--out", ev.out, "Report output directory");
  cmd_eval->callback([&] {
    if (*min_rate_opt) ev.min_rate = min_rate;
    action = [&] { return run_eval(ev, args); };
  });

  CalibrateArgs cal;
  auto* cmd_cal = app.add_subcommand("calibrate", "Solve or generate hand-eye calibration data");
  cmd_cal->add_option("--samples", cal.samples, "Sample file to solve");
  cmd_cal->add_option("--out", cal.out, "Output directory");
  cmd_cal->add_option("--generate", cal.generate, "Generate N synthetic samples instead of solving");
  cmd_cal->add_option("--write", cal.write, "File for generated samples");
  cmd_cal->add_option("--seed", cal.seed, "Generator seed");
  cmd_cal->add_option("--rot-noise", cal.rot_noise_deg, "Marker rotation noise sigma (degrees)");
  cmd_cal->add_option("--trans-noise", cal.trans_noise_mm, "Marker translation noise sigma (mm)");
  cmd_cal->add_option("--ground-truth", cal.ground_truth, "Ground truth qw qx qy qz tx ty tz")->expected(7);
  cmd_cal->callback([&] { action = [&] { return run_calibrate(cal, args); }; });

  PickArgs pick;
  auto* cmd_pick = app.add_subcommand("check-pick", "Decide whether a pick succeeded");
  cmd_pick->require_subcommand(1);
  auto* pick_suction = cmd_pick->add_subcommand("suction", "Vacuum pressure check");
  pick_suction->add_option("--pressure", pick.pressure, "Gauge pressure (kPa)")->required();
  pick_suction->add_option("--threshold", pick.threshold_kpa, "Threshold (kPa)")->capture_default_str();
  pick_suction->callback([&] { action = [&] { return run_check_suction(pick); }; });
  auto* pick_width = cmd_pick->add_subcommand("width", "Gripper opening width check");
  pick_width->add_option("--width", pick.width, "Width after closing (m)")->required();
  pick_width->add_option("--closed", pick.closed, "Fully closed width (m)")->required();
  pick_width->add_option("--tolerance", pick.tolerance, "Tolerance (m)")->capture_default_str();
  pick_width->callback([&] { action = [&] { return run_check_width(pick); }; });
  auto* pick_red = cmd_pick->add_subcommand("redness", "Mean-red ROI check on a PPM image");
  pick_red->add_option("--image", pick.image, "Binary PPM image")->required();
  pick_red->add_option("--roi", pick.roi, "ROI x y width height")->expected(4)->required();
  pick_red->add_option("--threshold", pick.r_threshold, "Red threshold")->capture_default_str();
  pick_red->add_option("--picked-when", pick.picked_when, "above or below")
      ->check(CLI::IsMember({"above", "below"}))
      ->capture_default_str();
  pick_red->callback([&] { action = [&] { return run_check_redness(pick); }; });

  AssemblyArgs asmb;
  auto* cmd_asm = app.add_subcommand("assembly", "Query or edit an assembly frame tree");
  cmd_asm->require_subcommand(1);
  auto* asm_resolve = cmd_asm->add_subcommand("resolve", "Print the pose of <to> in <from> as a 7-tuple");
  asm_resolve->add_option("--file", asmb.file, "Assembly file")->required();
  asm_resolve->add_option("from", asmb.from, "Reference frame")->required();
  asm_resolve->add_option("to", asmb.to, "Target frame")->required();
  asm_resolve->callback([&] { action = [&] { return run_assembly_resolve(asmb); }; });
  auto* asm_swap = cmd_asm->add_subcommand("swap", "Change part parameters and write the updated assembly");
  asm_swap->add_option("--file", asmb.file, "Assembly file")->required();
  asm_swap->add_option("--out", asmb.out, "Updated assembly file (default: stdout)");
  asm_swap->add_option("part", asmb.part, "Part name")->required();
  asm_swap->add_option("params", asmb.assignments, "key=value parameter overrides");
  asm_swap->callback([&] { action = [&] { return run_assembly_swap(asmb); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    return action ? action() : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TooFewSamplesError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
