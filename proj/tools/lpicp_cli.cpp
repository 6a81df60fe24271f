// Command-line front end: scene generation, single-scan registration, trajectory
// experiments and trajectory evaluation.
//
// Exit codes: 0 success, 2 the run finished but some scans failed, 3 fatal error.

#include "lpicp/lpicp.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace lpicp;
namespace fs = std::filesystem;

constexpr int kExitScanFailures = 2;
constexpr int kExitFatal = 3;

struct SceneArgs {
  std::string spec_file;
  std::string kind = "plane";
  double length = 0.0, width = 0.0, height = 0.0;
  double density = 25.0;
  double sigma = 0.0;
  std::uint64_t seed = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("--spec", spec_file, "scene spec file (flat YAML keys); flags below override it");
    cmd->add_option("--kind", kind, "plane|corridor|tunnel|cuberoom|openterrain|lshape");
    cmd->add_option("--length", length, "main dimension in m (0 = kind default)");
    cmd->add_option("--width", width, "secondary dimension in m (0 = kind default)");
    cmd->add_option("--height", height, "height or amplitude in m (0 = kind default)");
    cmd->add_option("--density", density, "points per m^2");
    cmd->add_option("--sigma", sigma, "map noise along the surface normal, m");
    cmd->add_option("--seed", seed, "sampling seed");
  }

  SceneSpec resolve(const CLI::App* cmd) const {
    SceneSpec s;
    if (!spec_file.empty()) s = config::load_scene(spec_file);
    if (spec_file.empty() || cmd->count("--kind")) s.kind = parse_scene_kind(kind);
    if (spec_file.empty() || cmd->count("--length")) s.length = length;
    if (spec_file.empty() || cmd->count("--width")) s.width = width;
    if (spec_file.empty() || cmd->count("--height")) s.height = height;
    if (spec_file.empty() || cmd->count("--density")) s.density = density;
    if (spec_file.empty() || cmd->count("--sigma")) s.sigma = sigma;
    if (spec_file.empty() || cmd->count("--seed")) s.seed = seed;
    s.validate();
    return s;
  }
};

ExperimentConfig load_config(const std::string& path, const std::string& method) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : config::load_experiment(path);
  if (!method.empty()) cfg.registration.method = parse_method(method);
  return cfg;
}

void print_annotation(const Scene& scene) {
  static constexpr const char* kAxes[6] = {"roll", "pitch", "yaw", "tx", "ty", "tz"};
  std::cout << "kind " << to_string(scene.spec.kind) << ", " << scene.map.size() << " points\n";
  std::cout << "expected categories at the canonical viewpoint:";
  for (int i = 0; i < 6; ++i) {
    std::cout << ' ' << kAxes[i] << '=' << to_string(scene.annotation.expected[static_cast<std::size_t>(i)]);
  }
  std::cout << '\n';
}

int cmd_scene_gen(const SceneArgs& args, const CLI::App* cmd, const std::string& out) {
  const Scene scene = generate_scene(args.resolve(cmd));
  io::write_xyz(out, scene.map);
  print_annotation(scene);
  return 0;
}

int cmd_scene_scan(const SceneArgs& args, const CLI::App* cmd, const std::string& pose_text,
                   const std::string& config_path, const std::string& out) {
  const Scene scene = generate_scene(args.resolve(cmd));
  const ExperimentConfig cfg = load_config(config_path, "");
  const Pose6D pose = pose_text.empty() ? scene.canonical_pose : io::parse_pose(pose_text);
  const PointCloud scan = simulate_scan(scene, pose, cfg.sensor);
  io::write_xyz(out, scan);
  std::cout << scan.size() << " points from pose";
  for (int i = 0; i < 6; ++i) std::cout << (i ? "," : " ") << io::format_double(pose.vector()[i]);
  std::cout << '\n';
  return 0;
}

int cmd_register(const std::string& map_path, const std::string& scan_path,
                 const std::string& x0_text, const std::string& method,
                 const std::string& config_path, const std::string& report_dir) {
  const ExperimentConfig cfg = load_config(config_path, method);
  const PointCloud map_cloud = io::read_point_cloud(map_path);
  const PointCloud scan = io::read_point_cloud(scan_path);
  const Pose6D x0 = x0_text.empty() ? Pose6D::identity() : io::parse_pose(x0_text);

  const FeatureMap map = build_feature_map(map_cloud, cfg.registration.features);
  const FeatureCloud features = extract_features(scan, cfg.registration.features);
  const RegistrationResult r = register_scan(features, map, x0, cfg.registration);

  nlohmann::ordered_json j;
  j["method"] = to_string(cfg.registration.method);
  j["converged"] = r.converged;
  j["failure"] = r.failure ? nlohmann::ordered_json(to_string(*r.failure)) : nlohmann::ordered_json(nullptr);
  j["message"] = r.message;
  j["x0"] = lpicp::detail::to_json(x0);
  j["pose"] = lpicp::detail::to_json(r.pose);
  j["edge_features"] = features.edge_points.size();
  j["planar_features"] = features.planar_points.size();
  j["categories"] = lpicp::detail::category_json(lpicp::detail::categories_of(r));
  if (r.report) {
    j["eigenvalues"] = lpicp::detail::to_json(r.report->basis.eigenvalues());
    j["l_f"] = lpicp::detail::to_json(r.report->l_f);
    j["l_u"] = lpicp::detail::to_json(r.report->l_u);
  } else if (r.degeneracy) {
    j["eigenvalues"] = lpicp::detail::to_json(r.degeneracy->eigenvalues);
  }
  j["k_n"] = r.k_n();
  j["k_p"] = r.k_p();
  j["hard_residual"] = r.hard_residual;
  j["log"] = r.constraints.log;
  auto& trace = j["trace"] = nlohmann::ordered_json::array();
  for (const auto& t : r.trace) {
    trace.push_back({{"iteration", t.iteration},
                     {"num_edge", t.num_edge},
                     {"num_planar", t.num_planar},
                     {"rms_residual", t.rms_residual},
                     {"step_rot", t.step_rot},
                     {"step_trans", t.step_trans},
                     {"step_scale", t.step_scale},
                     {"cost_before", t.cost_before},
                     {"cost_after", t.cost_after}});
  }
  const std::string text = j.dump(2);
  if (!report_dir.empty()) {
    fs::create_directories(report_dir);
    auto out = io::detail::open_out(fs::path(report_dir) / "registration.json");
    out << text << '\n';
  }
  std::cout << text << '\n';
  return r.failure ? kExitScanFailures : 0;
}

int cmd_run(const SceneArgs& args, const CLI::App* cmd, const std::string& traj_path,
            const std::string& method, const std::string& config_path, const std::string& report_dir) {
  const ExperimentConfig cfg = load_config(config_path, method);
  const Scene scene = generate_scene(args.resolve(cmd));
  const Trajectory gt = io::read_trajectory(traj_path);
  const ExperimentReport report = run_trajectory(scene, gt, cfg);
  emit_reports(report, report_dir);
  std::cout << report.scans.size() << " scans, " << report.failures() << " failed";
  if (report.ate) std::cout << ", ATE RMSE " << io::format_double(report.ate->rmse) << " m";
  std::cout << '\n';
  return report.failures() > 0 ? kExitScanFailures : 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, std::size_t align_n,
             double tolerance) {
  const Trajectory est = io::read_trajectory(est_path);
  const Trajectory gt = io::read_trajectory(gt_path);
  const AteResult ate = evaluate_ate(est, gt, align_n, tolerance);
  std::cout << "pairs " << ate.pairs << "\nate_rmse " << io::format_double(ate.rmse) << "\naxis_rmse "
            << io::format_double(ate.axis_rmse.x()) << ' ' << io::format_double(ate.axis_rmse.y())
            << ' ' << io::format_double(ate.axis_rmse.z()) << '\n';
  return 0;
}

int cmd_traj_line(const std::string& from, const std::string& to, std::size_t n,
                  const std::string& out) {
  io::write_trajectory(out, straight_trajectory(io::parse_pose(from), io::parse_pose(to), n));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lpicp: localizability-aware ICP toolkit"};
  app.require_subcommand(1);

  auto* scene = app.add_subcommand("scene", "synthetic scenes");
  scene->require_subcommand(1);
  SceneArgs gen_args;
  std::string gen_out;
  auto* gen = scene->add_subcommand("gen", "sample a scene map cloud to XYZ");
  gen_args.add(gen);
  gen->add_option("--out", gen_out, "output XYZ file")->required();

  SceneArgs scan_args;
  std::string scan_pose, scan_config, scan_out;
  auto* scan = scene->add_subcommand("scan", "simulate a ring-organized scan to XYZ (sensor frame)");
  scan_args.add(scan);
  scan->add_option("--pose", scan_pose, "sensor pose r,p,y,tx,ty,tz (default: canonical viewpoint)");
  scan->add_option("--config", scan_config, "config file with sensor_* keys");
  scan->add_option("--out", scan_out, "output XYZ file")->required();

  std::string reg_map, reg_scan, reg_x0, reg_method, reg_config, reg_report;
  auto* reg = app.add_subcommand("register", "register one scan against a map");
  reg->add_option("--map", reg_map, "map cloud (.xyz or .ply)")->required();
  reg->add_option("--scan", reg_scan, "scan cloud (.xyz with ring column, or .ply)")->required();
  reg->add_option("--x0", reg_x0, "initial pose r,p,y,tx,ty,tz");
  reg->add_option("--method", reg_method, "lpicp|zhang|xicp|none");
  reg->add_option("--config", reg_config, "config file");
  reg->add_option("--report", reg_report, "output directory for registration.json");

  SceneArgs run_args;
  std::string run_traj, run_method, run_config, run_report;
  auto* run = app.add_subcommand("run", "run a trajectory experiment on a synthetic scene");
  run_args.add(run);
  run->add_option("--traj", run_traj, "ground-truth trajectory CSV")->required();
  run->add_option("--method", run_method, "lpicp|zhang|xicp|none");
  run->add_option("--config", run_config, "config file");
  run->add_option("--report", run_report, "output directory")->required();

  std::string eval_est, eval_gt;
  std::size_t eval_align = 0;
  double eval_tol = 1e-6;
  auto* eval = app.add_subcommand("eval", "absolute trajectory error of est against gt");
  eval->add_option("--est", eval_est, "estimated trajectory CSV")->required();
  eval->add_option("--gt", eval_gt, "ground-truth trajectory CSV")->required();
  eval->add_option("--align-n", eval_align, "poses used for rigid alignment (0 = none)");
  eval->add_option("--tolerance", eval_tol, "timestamp association tolerance, s");

  std::string line_from, line_to, line_out;
  std::size_t line_n = 50;
  auto* traj = app.add_subcommand("traj", "trajectory helpers");
  traj->require_subcommand(1);
  auto* line = traj->add_subcommand("line", "straight ground-truth trajectory");
  line->add_option("--from", line_from, "start pose r,p,y,tx,ty,tz")->required();
  line->add_option("--to", line_to, "end pose r,p,y,tx,ty,tz")->required();
  line->add_option("--n", line_n, "number of poses");
  line->add_option("--out", line_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitFatal;
  }

  try {
    if (*gen) return cmd_scene_gen(gen_args, gen, gen_out);
    if (*scan) return cmd_scene_scan(scan_args, scan, scan_pose, scan_config, scan_out);
    if (*reg) return cmd_register(reg_map, reg_scan, reg_x0, reg_method, reg_config, reg_report);
    if (*run) return cmd_run(run_args, run, run_traj, run_method, run_config, run_report);
    if (*eval) return cmd_eval(eval_est, eval_gt, eval_align, eval_tol);
    if (*line) return cmd_traj_line(line_from, line_to, line_n, line_out);
  } catch (const lpicp::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFatal;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFatal;
  }
  return kExitFatal;
}
