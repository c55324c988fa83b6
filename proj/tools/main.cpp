#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cycreg/gradcheck.hpp"
#include "cycreg/io.hpp"
#include "cycreg/metrics.hpp"
#include "cycreg/parallel.hpp"
#include "cycreg/phantom.hpp"
#include "cycreg/solver.hpp"

namespace {

using namespace cycreg;
using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

std::string iso8601_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

std::vector<Index3> parse_pyramid(const std::string& text) {
  std::vector<Index3> out;
  std::stringstream ss(text);
  std::string level;
  while (std::getline(ss, level, ';')) {
    const std::vector<int> f = parse_int_list(level);
    if (f.size() != 3) throw std::runtime_error("pyramid level needs 3 factors: '" + level + "'");
    out.push_back({f[0], f[1], f[2]});
  }
  return out;
}

Real3 parse_real3(const std::string& text) {
  std::stringstream ss(text);
  std::string tok;
  Real3 out{};
  for (int d = 0; d < 3; ++d) {
    if (!std::getline(ss, tok, ',')) throw std::runtime_error("expected 3 components: " + text);
    out[d] = std::stod(tok);
  }
  return out;
}

Volume3D crop_volume(const Volume3D& v, const std::array<int, 6>& b) {
  for (int d = 0; d < 3; ++d) {
    if (b[2 * d] < 0 || b[2 * d + 1] > v.dims[d] || b[2 * d + 1] - b[2 * d] < 2) {
      throw std::runtime_error("crop bounds out of range on axis " + std::to_string(d));
    }
  }
  const Index3 dims{b[1] - b[0], b[3] - b[2], b[5] - b[4]};
  Volume3D out = Volume3D::filled(dims, 0.0, v.spacing_mm, v.origin_mm);
  for (int d = 0; d < 3; ++d) {
    out.origin_mm[d] = v.origin_mm[d] + b[2 * d] * v.spacing_mm[d];
  }
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i) out.at(i, j, k) = v.at(i + b[0], j + b[2], k + b[4]);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_loss_trace_csv(const std::string& path, const std::vector<LossBreakdown>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iteration,regist_ab,regist_ba,cycle,identity,total\n";
  char buf[256];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, trace[i].regist_ab,
                  trace[i].regist_ba, trace[i].cycle, trace[i].identity, trace[i].total);
    out << buf;
  }
}

int thread_default() {
  if (const char* env = std::getenv("CYCREG_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

struct RegisterArgs {
  std::string moving_path, fixed_path, out_dir, config_path;
  std::string fixed_landmarks, moving_landmarks;
  std::optional<double> lambda, alpha, beta, learning_rate;
  std::string iterations, pyramid, sim_mode, reg_mode, crop;
  std::optional<std::uint64_t> seed;
  bool normalize = false;
  int threads = 1;
};

SolverConfig build_config(const RegisterArgs& args) {
  SolverConfig cfg;
  if (!args.config_path.empty()) cfg = load_solver_config(args.config_path);
  if (args.lambda) cfg.weights.lambda = *args.lambda;
  if (args.alpha) cfg.weights.alpha = *args.alpha;
  if (args.beta) cfg.weights.beta = *args.beta;
  if (args.learning_rate) cfg.learning_rate = *args.learning_rate;
  if (!args.iterations.empty()) cfg.iterations_per_level = parse_int_list(args.iterations);
  if (!args.pyramid.empty()) cfg.pyramid_factors = parse_pyramid(args.pyramid);
  if (!args.sim_mode.empty()) cfg.sim_mode = sim_mode_from_string(args.sim_mode);
  if (!args.reg_mode.empty()) cfg.reg_mode = reg_mode_from_string(args.reg_mode);
  if (args.seed) cfg.seed = *args.seed;
  validate_config(cfg);
  return cfg;
}

int cmd_register(const RegisterArgs& args, const std::string& command_line) {
  const std::string started = iso8601_now();
  set_thread_count(args.threads);
  const SolverConfig cfg = build_config(args);

  Volume3D moving = load_volume(args.moving_path);
  Volume3D fixed = load_volume(args.fixed_path);
  if (!args.crop.empty()) {
    const std::vector<int> b = parse_int_list(args.crop);
    if (b.size() != 6) throw std::runtime_error("--crop needs x0,x1,y0,y1,z0,z1");
    const std::array<int, 6> bounds{b[0], b[1], b[2], b[3], b[4], b[5]};
    moving = crop_volume(moving, bounds);
    fixed = crop_volume(fixed, bounds);
  }
  if (args.normalize) {
    moving = normalize_max(moving);
    fixed = normalize_max(fixed);
  }
  if (moving.dims != fixed.dims) {
    throw std::runtime_error(
        "dimension mismatch: moving " + std::to_string(moving.dims[0]) + "x" +
        std::to_string(moving.dims[1]) + "x" + std::to_string(moving.dims[2]) + " vs fixed " +
        std::to_string(fixed.dims[0]) + "x" + std::to_string(fixed.dims[1]) + "x" +
        std::to_string(fixed.dims[2]));
  }

  std::optional<std::pair<LandmarkSet, LandmarkSet>> landmarks;
  if (!args.fixed_landmarks.empty() || !args.moving_landmarks.empty()) {
    if (args.fixed_landmarks.empty() || args.moving_landmarks.empty()) {
      throw std::runtime_error("--fixed-landmarks and --moving-landmarks must come together");
    }
    landmarks = std::make_pair(load_landmarks(args.fixed_landmarks),
                               load_landmarks(args.moving_landmarks));
  }

  std::filesystem::create_directories(args.out_dir);
  const auto out = [&](const char* name) {
    return (std::filesystem::path(args.out_dir) / name).string();
  };

  RegistrationResult result;
  try {
    result = register_pair(moving, fixed, cfg);
  } catch (const divergence_error& e) {
    write_loss_trace_csv(out("loss_trace.csv"), e.partial_trace);
    std::fprintf(stderr, "error: %s (partial trace written)\n", e.what());
    return 3;
  }

  save_field(result.phi_ab, out("phi_ab"), moving.spacing_mm, moving.origin_mm);
  save_field(result.phi_ba, out("phi_ba"), moving.spacing_mm, moving.origin_mm);
  save_volume(warp(moving, result.phi_ab), out("warped_ab"));
  save_volume(warp(fixed, result.phi_ba), out("warped_ba"));
  write_loss_trace_csv(out("loss_trace.csv"), result.loss_trace);

  const MetricReport report = evaluate(moving, fixed, result, landmarks);
  write_text(out("report.json"), metric_report_to_json(report));

  json manifest;
  manifest["command"] = command_line;
  manifest["config"] = json::parse(solver_config_to_json_string(cfg));
  manifest["inputs"] = {{"moving", args.moving_path}, {"fixed", args.fixed_path}};
  if (landmarks) {
    manifest["inputs"]["fixed_landmarks"] = args.fixed_landmarks;
    manifest["inputs"]["moving_landmarks"] = args.moving_landmarks;
  }
  manifest["outputs"] = {{"phi_ab", out("phi_ab.json")},
                         {"phi_ba", out("phi_ba.json")},
                         {"warped_ab", out("warped_ab.json")},
                         {"warped_ba", out("warped_ba.json")},
                         {"loss_trace", out("loss_trace.csv")},
                         {"report", out("report.json")}};
  manifest["tool_version"] = kToolVersion;
  manifest["started_at"] = started;
  manifest["finished_at"] = iso8601_now();
  write_text(out("manifest.json"), manifest.dump(2) + "\n");
  return 0;
}

int cmd_warp(const std::string& volume_path, const std::string& field_path,
             const std::string& out_path, int threads) {
  set_thread_count(threads);
  const Volume3D v = load_volume(volume_path);
  const DisplacementField f = load_field(field_path);
  save_volume(warp(v, f), out_path);
  return 0;
}

int cmd_jacobian(const std::string& field_path, const std::string& out_det,
                 const std::string& out_report) {
  const DisplacementField f = load_field(field_path);
  const JacobianStats st = jacobian_stats(f);
  if (!out_det.empty()) save_volume(st.det_volume, out_det);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "{\n  \"folding_percent\": %.17g,\n  \"nonpositive_fraction\": %.17g\n}\n",
                100.0 * st.nonpositive_fraction, st.nonpositive_fraction);
  if (!out_report.empty()) {
    write_text(out_report, buf);
  }
  std::fputs(buf, stdout);
  return 0;
}

int cmd_tre(const std::string& fixed_csv, const std::string& moving_csv,
            const std::string& field_path, const std::string& spacing_text,
            const std::string& volume_path, const std::string& out_path) {
  const DisplacementField f = load_field(field_path);
  Real3 spacing{1.0, 1.0, 1.0};
  if (!spacing_text.empty()) {
    spacing = parse_real3(spacing_text);
  } else if (!volume_path.empty()) {
    spacing = load_volume(volume_path).spacing_mm;
  }
  const auto [mean, per] = tre(load_landmarks(fixed_csv), load_landmarks(moving_csv), f, spacing);
  std::string text = "{\n  \"tre_mm\": ";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g", mean);
  text += buf;
  text += ",\n  \"per_landmark_tre_mm\": [";
  for (std::size_t i = 0; i < per.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s\n    {\"id\": \"%s\", \"tre_mm\": %.17g}",
                  i ? "," : "", per[i].id.c_str(), per[i].tre_mm);
    text += buf;
  }
  text += "\n  ]\n}\n";
  if (!out_path.empty()) write_text(out_path, text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_phantom(const std::string& spec_path, const std::string& out_dir) {
  const PhantomSpec spec = load_phantom_spec(spec_path);
  const PhantomData data = generate(spec);
  std::filesystem::create_directories(out_dir);
  const auto out = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  save_volume(data.moving, out("moving"));
  save_volume(data.fixed, out("fixed"));
  save_field(data.truth, out("truth_field"));
  json manifest;
  manifest["spec"] = json::parse(phantom_spec_to_json_string(spec));
  manifest["seed"] = spec.seed;
  manifest["paths"] = {{"moving", out("moving.json")},
                       {"fixed", out("fixed.json")},
                       {"truth_field", out("truth_field.json")}};
  write_text(out("truth.json"), manifest.dump(2) + "\n");
  return 0;
}

int cmd_selfcheck(std::uint64_t seed, int instances) {
  const GradCheckReport report = run_gradient_selfcheck(seed, instances);
  for (const auto& line : report.lines) std::printf("%s\n", line.c_str());
  std::printf("%d coordinates over %d instances, max rel err %.3e, %.2f s: %s\n",
              report.coordinates_checked, report.instances, report.max_rel_err, report.seconds,
              report.passed() ? "PASS" : "FAIL");
  return report.passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cycreg: cycle-consistent deformable 3D registration"};
  app.require_subcommand(1);

  std::string command_line;
  for (int i = 0; i < argc; ++i) {
    if (i) command_line += ' ';
    command_line += argv[i];
  }

  RegisterArgs reg;
  reg.threads = thread_default();
  auto* reg_cmd = app.add_subcommand("register", "register a moving/fixed volume pair");
  reg_cmd->add_option("--moving", reg.moving_path, "moving volume container")->required();
  reg_cmd->add_option("--fixed", reg.fixed_path, "fixed volume container")->required();
  reg_cmd->add_option("--out", reg.out_dir, "output directory")->required();
  reg_cmd->add_option("--config", reg.config_path, "solver config JSON");
  reg_cmd->add_option("--lambda", reg.lambda, "regularization weight");
  reg_cmd->add_option("--alpha", reg.alpha, "cycle loss weight");
  reg_cmd->add_option("--beta", reg.beta, "identity loss weight");
  reg_cmd->add_option("--learning-rate", reg.learning_rate, "Adam learning rate");
  reg_cmd->add_option("--iterations", reg.iterations, "per-level iteration counts, e.g. 2000,800,300");
  reg_cmd->add_option("--pyramid", reg.pyramid, "per-level factors, e.g. 4,4,2;2,2,1;1,1,1");
  reg_cmd->add_option("--sim-mode", reg.sim_mode, "as-written|normalized");
  reg_cmd->add_option("--reg-mode", reg.reg_mode, "magnitude|gradient");
  reg_cmd->add_option("--seed", reg.seed, "config seed recorded in the manifest");
  reg_cmd->add_option("--threads", reg.threads, "voxel-parallel worker cap (env CYCREG_THREADS)");
  reg_cmd->add_option("--fixed-landmarks", reg.fixed_landmarks, "fixed-image landmark CSV");
  reg_cmd->add_option("--moving-landmarks", reg.moving_landmarks, "moving-image landmark CSV");
  reg_cmd->add_option("--crop", reg.crop, "crop bounds x0,x1,y0,y1,z0,z1 applied to both inputs");
  reg_cmd->add_flag("--normalize", reg.normalize, "scale each input by 1/max before registering");

  std::string warp_volume, warp_field, warp_out;
  int warp_threads = thread_default();
  auto* warp_cmd = app.add_subcommand("warp", "apply a stored field to a volume");
  warp_cmd->add_option("--volume", warp_volume, "input volume container")->required();
  warp_cmd->add_option("--field", warp_field, "displacement field container")->required();
  warp_cmd->add_option("--out", warp_out, "output volume container")->required();
  warp_cmd->add_option("--threads", warp_threads, "voxel-parallel worker cap");

  std::string jac_field, jac_out_det, jac_out_report;
  auto* jac_cmd = app.add_subcommand("jacobian", "jacobian determinant analysis of a field");
  jac_cmd->add_option("--field", jac_field, "displacement field container")->required();
  jac_cmd->add_option("--out-det", jac_out_det, "write the determinant volume here");
  jac_cmd->add_option("--out-report", jac_out_report, "write the folding report JSON here");

  std::string tre_fixed, tre_moving, tre_field, tre_spacing, tre_volume, tre_out;
  auto* tre_cmd = app.add_subcommand("tre", "target registration error of landmark sets");
  tre_cmd->add_option("--fixed-landmarks", tre_fixed, "fixed-image landmark CSV")->required();
  tre_cmd->add_option("--moving-landmarks", tre_moving, "moving-image landmark CSV")->required();
  tre_cmd->add_option("--field", tre_field, "displacement field container")->required();
  tre_cmd->add_option("--spacing", tre_spacing, "voxel spacing in mm, e.g. 0.7,0.7,5.0");
  tre_cmd->add_option("--volume", tre_volume, "read spacing from this volume container");
  tre_cmd->add_option("--out", tre_out, "write the TRE report JSON here");

  std::string phantom_spec, phantom_out;
  auto* phantom_cmd = app.add_subcommand("phantom", "generate a synthetic ground-truth dataset");
  phantom_cmd->add_option("--spec", phantom_spec, "phantom spec JSON")->required();
  phantom_cmd->add_option("--out", phantom_out, "output directory")->required();

  std::uint64_t sc_seed = 20240901;
  int sc_instances = 20;
  auto* selfcheck_cmd =
      app.add_subcommand("selfcheck", "finite-difference check of the analytic gradients");
  selfcheck_cmd->add_option("--seed", sc_seed, "suite seed");
  selfcheck_cmd->add_option("--instances", sc_instances, "number of random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      return app.exit(e);  // --help
    }
    app.exit(e);
    return 1;
  }

  try {
    if (reg_cmd->parsed()) return cmd_register(reg, command_line);
    if (warp_cmd->parsed()) return cmd_warp(warp_volume, warp_field, warp_out, warp_threads);
    if (jac_cmd->parsed()) return cmd_jacobian(jac_field, jac_out_det, jac_out_report);
    if (tre_cmd->parsed())
      return cmd_tre(tre_fixed, tre_moving, tre_field, tre_spacing, tre_volume, tre_out);
    if (phantom_cmd->parsed()) return cmd_phantom(phantom_spec, phantom_out);
    if (selfcheck_cmd->parsed()) return cmd_selfcheck(sc_seed, sc_instances);
  } catch (const divergence_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
