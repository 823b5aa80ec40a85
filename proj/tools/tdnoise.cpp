#include "tdnoise/cloud.hpp"
#include "tdnoise/config.hpp"
#include "tdnoise/error.hpp"
#include "tdnoise/eval.hpp"
#include "tdnoise/meshio.hpp"
#include "tdnoise/net.hpp"
#include "tdnoise/noise.hpp"
#include "tdnoise/parallel.hpp"
#include "tdnoise/toy.hpp"
#include "tdnoise/train.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace tdn;

namespace {

constexpr int kExitData = 2;
constexpr int kExitInvariant = 3;

// Options every subcommand shares: config file, key overrides, seed.
struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--set", c.overrides, "override one config key (key=value), repeatable");
  sub->add_option("--seed", c.seed, "master seed");
}

// Defaults, then the file, then --set, then the subcommand's own flags.
RunConfig resolve(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg.load_file(c.config_path);
  for (const std::string& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  for (const auto& [k, v] : flags) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

void echo_config(const RunConfig& cfg, const fs::path& dir, const std::string& command) {
  fs::create_directories(dir);
  const fs::path p = dir / ("tdnoise-" + command + ".cfg");
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << "# tdnoise " << command << "\n" << cfg.dump();
  spdlog::info("resolved config written to {}", p.string());
}

fs::path dir_of(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

GeometryFormat format_for(const fs::path& path, bool ascii) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".ply") return ascii ? GeometryFormat::PlyAscii : GeometryFormat::PlyBinaryLittleEndian;
  if (ext == ".off") return GeometryFormat::Off;
  if (ext == ".xyz" || ext == ".txt") return GeometryFormat::Xyz;
  throw DataError("cannot infer an output format from '" + path.string() + "' (use .ply, .off or .xyz)");
}

void write_cloud(const PointCloud& cloud, const fs::path& path, std::vector<std::string> comments = {},
                 bool ascii = false) {
  fs::create_directories(dir_of(path));
  write_pointcloud(cloud, path, format_for(path, ascii), comments);
  spdlog::info("wrote {} points to {}", cloud.size(), path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(dir_of(path));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

PointCloud from_points(const std::vector<Vec3>& pts) {
  PointCloud c;
  c.positions = pts;
  return c;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

// Training directory: every geometry file is a noisy cloud except those
// named <stem>_clean.* (its clean counterpart) and <stem>_mesh.off.
struct DataItem {
  fs::path noisy;
  std::optional<fs::path> clean;
  std::optional<fs::path> mesh;
};

bool is_geometry(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".ply" || ext == ".off" || ext == ".xyz";
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<DataItem> scan_data_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("data directory not found: " + dir.string());
  std::map<std::string, fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_geometry(e.path())) files[e.path().stem().string()] = e.path();
  }
  std::vector<DataItem> out;
  for (const auto& [stem, path] : files) {
    if (ends_with(stem, "_clean") || ends_with(stem, "_mesh")) continue;
    DataItem it{path, std::nullopt, std::nullopt};
    if (auto c = files.find(stem + "_clean"); c != files.end()) it.clean = c->second;
    if (auto m = files.find(stem + "_mesh"); m != files.end()) it.mesh = m->second;
    out.push_back(std::move(it));
  }
  if (out.empty()) throw DataError("no point clouds in " + dir.string());
  return out;
}

// ---------------------------------------------------------------- sample

int cmd_sample(const RunConfig& cfg, const fs::path& mesh_path, const fs::path& out, bool ascii) {
  const TriangleMesh mesh = read_mesh(mesh_path);
  const std::uint64_t seed = cfg.train.seed;
  SurfaceSamples s = cfg.sample.min_dist > 0.0 ? poisson_disk_sample_with_normals(mesh, cfg.sample.min_dist, seed)
                                               : poisson_disk_sample_count(mesh, cfg.sample.count, seed);
  PointCloud cloud = cfg.sample.shade ? shade_lambertian(s.cloud, s.normals, seed) : std::move(s.cloud);
  spdlog::info("sampled {} points from {} (diagonal {:.6g})", cloud.size(), mesh_path.string(),
               bbox_diagonal(cloud));
  write_cloud(cloud, out,
              {"tdnoise sample source=" + mesh_path.filename().string() + " seed=" + std::to_string(seed) +
               (cfg.sample.shade ? " shaded" : "")},
              ascii);
  echo_config(cfg, dir_of(out), "sample");
  return 0;
}

// ---------------------------------------------------------------- corrupt

int cmd_corrupt(const RunConfig& cfg, const fs::path& in, const fs::path& out, bool ascii) {
  const PointCloud cloud = read_pointcloud(in);
  const NoiseSpec spec = cfg.noise.spec(cfg.train.seed);
  const PointCloud noisy = corrupt(cloud, spec);
  spdlog::info("{}: diagonal {:.6g}, noise std {:.6g}", in.string(), bbox_diagonal(cloud),
               cfg.noise.level * bbox_diagonal(cloud));
  write_cloud(noisy, out, {"tdnoise noise " + spec.describe()}, ascii);
  echo_config(cfg, dir_of(out), "corrupt");
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& run_dir,
              const std::optional<fs::path>& resume_path, std::optional<std::uint64_t> stop_after) {
  const auto items = scan_data_dir(data_dir);
  const bool supervised = cfg.train.mode == TrainMode::Supervised;
  std::vector<PointCloud> noisy;
  std::vector<std::optional<PointCloud>> clean;
  std::vector<std::optional<TriangleMesh>> meshes;
  for (const DataItem& it : items) {
    noisy.push_back(read_pointcloud(it.noisy));
    if (supervised && !it.clean)
      throw DataError("supervised mode needs a clean pair for " + it.noisy.filename().string() + " (" +
                      it.noisy.stem().string() + "_clean.*)");
    clean.push_back(it.clean ? std::optional(read_pointcloud(*it.clean)) : std::nullopt);
    meshes.push_back(it.mesh ? std::optional(read_mesh(*it.mesh)) : std::nullopt);
    const double diag = bbox_diagonal(noisy.back());
    spdlog::info("{}: {} points, diagonal {:.6g}, prior radius {:.6g}, receptive radii {:.6g} / {:.6g}",
                 it.noisy.filename().string(), noisy.back().size(), diag, cfg.train.prior_radius_frac * diag,
                 cfg.train.arch.levels[0].receptive_frac * diag, cfg.train.arch.levels[1].receptive_frac * diag);
  }
  echo_config(cfg, run_dir, "train");

  const bool can_eval = std::all_of(clean.begin(), clean.end(), [](const auto& c) { return c.has_value(); });
  auto error_of = [&](const ModelParams& params) {
    double s = 0.0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      PointCloud in = noisy[i];
      in.colors.reset();
      const PointCloud out = denoise(params, in, cfg.denoise).cloud;
      s += meshes[i] ? chamfer(out, *meshes[i], *clean[i]).chamfer : chamfer_sampled(out, *clean[i]).chamfer;
    }
    return s / static_cast<double>(noisy.size());
  };

  std::optional<TrainState> resume;
  std::size_t first_epoch = 1;
  if (resume_path) {
    Checkpoint ck = read_checkpoint(*resume_path);
    if (!ck.adam) throw DataError("checkpoint " + resume_path->string() + " has no optimizer state to resume from");
    require_same_arch(cfg.train.arch, ck.params.arch());
    resume = TrainState{std::move(ck.params), std::move(*ck.adam), ck.meta.epoch, ck.meta.step};
    first_epoch = ck.meta.epoch + 1;
    spdlog::info("resuming after epoch {}", ck.meta.epoch);
  }

  const fs::path ckpt_path = run_dir / "checkpoint.tdn";
  TrainHooks hooks;
  if (can_eval) hooks.evaluate = error_of;
  hooks.stop_after_epoch = stop_after;
  hooks.on_epoch_end = [&](const TrainState& st) {
    write_checkpoint(ckpt_path, Checkpoint{st.params, st.adam, TrainMeta{st.epoch, st.step, cfg.train.seed}});
  };
  double initial_error = std::numeric_limits<double>::quiet_NaN();
  if (can_eval && !resume) initial_error = error_of(ModelParams::init(cfg.train.arch, cfg.train.seed));

  TrainResult r;
  if (supervised) {
    std::vector<std::pair<PointCloud, PointCloud>> pairs;
    for (std::size_t i = 0; i < noisy.size(); ++i) pairs.emplace_back(noisy[i], *clean[i]);
    r = train_supervised(pairs, cfg.train, hooks, std::move(resume));
  } else {
    r = train_unsupervised(noisy, cfg.train, hooks, std::move(resume));
  }
  write_text(run_dir / "report.csv", r.report.to_csv(first_epoch));
  std::cout << "epochs " << r.state.epoch << " steps " << r.state.step;
  if (!r.report.loss.empty()) std::cout << " final_loss " << num(r.report.loss.back());
  if (can_eval) {
    if (!std::isnan(initial_error)) std::cout << " initial_error " << num(initial_error);
    if (!r.report.eval_error.empty() && !std::isnan(r.report.eval_error.back()))
      std::cout << " final_error " << num(r.report.eval_error.back());
  }
  std::cout << "\ncheckpoint " << ckpt_path.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- denoise

int cmd_denoise(const RunConfig& cfg, const fs::path& ckpt_path, const fs::path& in, const fs::path& out,
                bool ascii) {
  const Checkpoint ck = read_checkpoint(ckpt_path);
  if (cfg.any_assigned_with_prefix("arch.")) require_same_arch(cfg.train.arch, ck.params.arch());
  const PointCloud cloud = read_pointcloud(in);
  const double diag = bbox_diagonal(cloud);
  spdlog::info("{}: {} points, diagonal {:.6g}, low-frequency radius {:.6g}", in.string(), cloud.size(), diag,
               cfg.denoise.lowfreq_radius_frac * diag);
  const DenoiseResult r = denoise(ck.params, cloud, cfg.denoise);
  for (std::size_t k = 0; k < r.mean_displacement.size(); ++k) {
    spdlog::info("iteration {}: mean displacement {:.6g}", k + 1, r.mean_displacement[k]);
    std::cout << "iteration " << k + 1 << " mean_displacement " << num(r.mean_displacement[k]) << "\n";
  }
  write_cloud(r.cloud, out, {"tdnoise denoise iterations=" + std::to_string(cfg.denoise.iterations)}, ascii);
  echo_config(cfg, dir_of(out), "denoise");
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const RunConfig& cfg, const fs::path& pred_path, const fs::path& mesh_path, const fs::path& clean_path,
             const fs::path& out_dir, int bins) {
  const PointCloud pred = read_pointcloud(pred_path);
  const TriangleMesh mesh = read_mesh(mesh_path);
  const PointCloud clean = read_pointcloud(clean_path);
  const EvalReport r = chamfer(pred, mesh, clean, bins);
  fs::create_directories(out_dir);
  write_text(out_dir / "report.json", r.to_json() + "\n");
  write_text(out_dir / "distances.csv", r.distances_csv());
  write_text(out_dir / "histogram.csv", r.histogram_csv());
  write_cloud(error_colorize(pred, r.distances, r.diagonal), out_dir / "error.ply");
  echo_config(cfg, out_dir, "eval");
  std::cout << "chamfer " << num(r.chamfer) << " term1 " << num(r.term1) << " term2 " << num(r.term2)
            << " percent_of_diagonal " << num(r.percent(r.chamfer)) << "\n";
  return 0;
}

// ---------------------------------------------------------------- baseline

std::vector<EvalCase> load_cases(const fs::path& dir) {
  std::vector<EvalCase> cases;
  for (const DataItem& it : scan_data_dir(dir)) {
    if (!it.clean || !it.mesh)
      throw DataError("tuning needs <stem>_clean.* and <stem>_mesh.off next to " + it.noisy.string());
    cases.push_back({read_pointcloud(it.noisy), read_mesh(*it.mesh), read_pointcloud(*it.clean)});
  }
  return cases;
}

int cmd_baseline(RunConfig cfg, const std::optional<fs::path>& in, const std::optional<fs::path>& tune_dir,
                 const std::optional<fs::path>& out, bool ascii) {
  if (in.has_value() != out.has_value()) throw ConfigError("baseline needs both an input cloud and -o");
  if (!in && !tune_dir) throw ConfigError("baseline needs an input cloud, --tune, or both");
  if (tune_dir) {
    const FilterTuning t = tune_filter(load_cases(*tune_dir), cfg.filter_kind);
    cfg.set("filter.radius", num(t.config.radius));
    cfg.set("filter.sigma_d", num(t.config.sigma_d));
    cfg.set("filter.sigma_n", num(t.config.sigma_n));
    cfg.set("filter.iterations", std::to_string(t.config.iterations));
    cfg.set("filter.mean_weighting", t.config.mean_weighting == MeanWeighting::Uniform ? "uniform" : "gaussian");
    std::cout << "# tuned on " << tune_dir->string() << ", mean chamfer " << num(t.chamfer) << "\n";
    for (const char* k : {"filter.kind", "filter.radius", "filter.sigma_d", "filter.sigma_n", "filter.iterations",
                          "filter.mean_weighting"})
      std::cout << k << " = " << cfg.get(k) << "\n";
  }
  if (in) {
    const PointCloud cloud = read_pointcloud(*in);
    const PointCloud filtered = apply_filter(cloud, cfg.filter_kind, cfg.filter);
    write_cloud(filtered, *out, {"tdnoise baseline " + cfg.get("filter.kind")}, ascii);
    echo_config(cfg, dir_of(*out), "baseline");
  } else if (!cfg.paths.output.empty()) {
    echo_config(cfg, cfg.paths.output, "baseline");
  }
  return 0;
}

// ---------------------------------------------------------------- toy

int toy_modes(const fs::path& dir, std::uint64_t seed, std::optional<double> sigma_opt, std::size_t count) {
  std::vector<double> sigmas = sigma_opt ? std::vector<double>{*sigma_opt} : std::vector<double>{0.3, 0.01};
  std::string summary = "sigma,bandwidth,analytic_radius,mean_mode_radius,relative_error,modes,non_converged\n";
  for (double sigma : sigmas) {
    const double h = sigma / 3.0;
    const toy::ModesToyResult r = toy::circle_modes(sigma, count, h, seed);
    const std::string tag = "sigma_" + num(sigma);
    write_cloud(r.noisy, dir / ("noisy_" + tag + ".xyz"));
    write_cloud(from_points(r.mode_points), dir / ("modes_" + tag + ".xyz"));
    std::string radii = "index,radius\n";
    for (std::size_t i = 0; i < r.mode_points.size(); ++i)
      radii += std::to_string(i) + "," + num(r.mode_points[i].norm()) + "\n";
    write_text(dir / ("mode_radii_" + tag + ".csv"), radii);
    summary += num(sigma) + "," + num(h) + "," + num(r.analytic_radius) + "," + num(r.mean_mode_radius) + "," +
               num(r.relative_error) + "," + std::to_string(r.modes) + "," + std::to_string(r.non_converged) + "\n";
    std::cout << "modes sigma " << num(sigma) << " bandwidth " << num(h) << " analytic_r " << num(r.analytic_radius)
              << " blur_free_r " << num(circle_mode_radius(1.0, sigma)) << " mean_mode_r "
              << num(r.mean_mode_radius) << " relative_error " << num(r.relative_error) << "\n";
  }
  write_text(dir / "modes_summary.csv", summary);
  return 0;
}

int toy_anneal(const fs::path& dir, std::uint64_t seed) {
  const toy::AnnealToyResult r = toy::anneal_study(seed);
  auto traj = [](const std::vector<std::pair<double, double>>& t) {
    std::string s = "step,gamma,c\n";
    for (std::size_t i = 0; i < t.size(); ++i) s += std::to_string(i + 1) + "," + num(t[i].first) + "," + num(t[i].second) + "\n";
    return s;
  };
  write_text(dir / "anneal_gamma2.csv", traj(r.trajectory_gamma2));
  write_text(dir / "anneal_annealed.csv", traj(r.trajectory_annealed));
  write_text(dir / "anneal_summary.csv", "sample_mean,fit_gamma2,majority_mode,fit_annealed\n" + num(r.sample_mean) +
                                             "," + num(r.fit_gamma2) + "," + num(r.majority_mode) + "," +
                                             num(r.fit_annealed) + "\n");
  std::cout << "anneal sample_mean " << num(r.sample_mean) << " fit_gamma2 " << num(r.fit_gamma2)
            << " majority_mode " << num(r.majority_mode) << " fit_annealed " << num(r.fit_annealed) << "\n";
  return 0;
}

int toy_bicolor(const fs::path& dir, std::uint64_t seed, int epochs, double beta) {
  const toy::BicolorResult r = toy::bicolor_separation(seed, beta, epochs);
  write_cloud(r.noisy, dir / "bicolor_noisy.ply", {}, true);
  write_cloud(r.denoised_without_color, dir / "bicolor_beta0.ply", {}, true);
  write_cloud(r.denoised_with_color, dir / "bicolor_beta.ply", {}, true);
  write_text(dir / "bicolor_summary.csv", "beta,cross_beta0,cross_beta,ratio\n" + num(r.beta) + "," +
                                              num(r.cross_without_color) + "," + num(r.cross_with_color) + "," +
                                              num(r.ratio) + "\n");
  std::cout << "bicolor beta " << num(r.beta) << " cross_beta0 " << num(r.cross_without_color) << " cross_beta "
            << num(r.cross_with_color) << " ratio " << num(r.ratio) << "\n";
  return 0;
}

int toy_denoising(const fs::path& dir, const std::string& which, std::uint64_t seed, int epochs, int iterations) {
  const toy::DenoiseToyResult r = which == "circle" ? toy::circle_denoising(seed, epochs, iterations)
                                                    : toy::sphere_denoising(seed, epochs, iterations);
  write_cloud(r.held_noisy, dir / (which + "_noisy.xyz"));
  write_cloud(r.held_clean, dir / (which + "_clean.xyz"));
  write_cloud(r.denoised, dir / (which + "_denoised.xyz"));
  write_cloud(from_points(r.modes), dir / (which + "_modes.xyz"));
  std::string loss = "epoch,loss\n";
  for (std::size_t i = 0; i < r.loss.size(); ++i) loss += std::to_string(i + 1) + "," + num(r.loss[i]) + "\n";
  write_text(dir / (which + "_loss.csv"), loss);
  std::cout << which << " noisy_chamfer " << num(r.noisy_chamfer) << " chamfer_1 " << num(r.chamfer_1)
            << " chamfer " << num(r.chamfer) << " reduction " << num(r.reduction()) << " mode_radius "
            << num(r.mode_radius) << " noisy_mode_distance " << num(r.noisy_mode_distance)
            << " denoised_mode_distance " << num(r.denoised_mode_distance) << " seconds " << num(r.seconds) << "\n";
  return 0;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("tdnoise");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tdnoise: unsupervised point-cloud denoising"};
  app.require_subcommand(1);
  unsigned threads = 0;
  std::string log_level = "warn";
  app.add_option("--threads", threads, "worker thread cap (default: TDNOISE_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  bool ascii = false;
  app.add_flag("--ascii", ascii, "write PLY outputs as ASCII");

  std::function<int()> run;

  // sample
  Common sample_c;
  std::string sample_mesh, sample_out;
  std::optional<std::size_t> sample_count;
  std::optional<double> sample_min_dist;
  bool sample_shade = false;
  auto* sample = app.add_subcommand("sample", "Poisson-disk sample a mesh surface");
  add_common(sample, sample_c);
  sample->add_option("mesh", sample_mesh, "input mesh (OFF/PLY)")->required();
  sample->add_option("--count", sample_count, "target point count");
  sample->add_option("--min-dist", sample_min_dist, "absolute Poisson-disk distance");
  sample->add_flag("--shade", sample_shade, "attach Lambertian colors");
  sample->add_option("-o,--output", sample_out, "output cloud")->required();
  sample->callback([&] {
    run = [&] {
      std::vector<std::pair<std::string, std::string>> f;
      if (sample_count) f.emplace_back("sample.count", std::to_string(*sample_count));
      if (sample_min_dist) f.emplace_back("sample.min_dist", num(*sample_min_dist));
      if (sample_shade) f.emplace_back("sample.shade", "true");
      return cmd_sample(resolve(sample_c, f), sample_mesh, sample_out, ascii);
    };
  });

  // corrupt
  Common corrupt_c;
  std::string corrupt_in, corrupt_out;
  std::optional<std::string> noise_kind;
  std::optional<double> noise_level, noise_bias;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "add synthetic noise to a cloud");
  add_common(corrupt_cmd, corrupt_c);
  corrupt_cmd->add_option("cloud", corrupt_in, "input cloud")->required();
  corrupt_cmd->add_option("--noise", noise_kind, "gaussian or scanner");
  corrupt_cmd->add_option("--level", noise_level, "noise std, fraction of the diagonal");
  corrupt_cmd->add_option("--bias", noise_bias, "scanner per-ring bias std, fraction of the diagonal");
  corrupt_cmd->add_option("-o,--output", corrupt_out, "output cloud")->required();
  corrupt_cmd->callback([&] {
    run = [&] {
      std::vector<std::pair<std::string, std::string>> f;
      if (noise_kind) f.emplace_back("noise.kind", *noise_kind);
      if (noise_level) f.emplace_back("noise.level", num(*noise_level));
      if (noise_bias) f.emplace_back("noise.bias", num(*noise_bias));
      return cmd_corrupt(resolve(corrupt_c, f), corrupt_in, corrupt_out, ascii);
    };
  });

  // train
  Common train_c;
  std::optional<std::string> train_data, train_out, train_mode, train_resume;
  std::optional<int> train_epochs;
  std::optional<std::uint64_t> train_stop;
  auto* train = app.add_subcommand("train", "train a denoiser on a directory of noisy clouds");
  add_common(train, train_c);
  train->add_option("data_dir", train_data, "directory of clouds (default: paths.data)");
  train->add_option("--mode", train_mode, "unsupervised (full), supervised, noprior or nocolor");
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--resume", train_resume, "checkpoint to continue from");
  train->add_option("--stop-after", train_stop, "stop after this many completed epochs");
  train->add_option("-o,--output", train_out, "run directory (default: paths.output)");
  train->callback([&] {
    run = [&] {
      std::vector<std::pair<std::string, std::string>> f;
      if (train_mode) f.emplace_back("train.mode", *train_mode);
      if (train_epochs) f.emplace_back("train.epochs", std::to_string(*train_epochs));
      if (train_data) f.emplace_back("paths.data", *train_data);
      if (train_out) f.emplace_back("paths.output", *train_out);
      const RunConfig cfg = resolve(train_c, f);
      if (cfg.paths.data.empty()) throw ConfigError("train needs a data directory");
      if (cfg.paths.output.empty()) throw ConfigError("train needs an output directory (-o)");
      std::optional<fs::path> resume;
      if (train_resume) resume = *train_resume;
      return cmd_train(cfg, cfg.paths.data, cfg.paths.output, resume, train_stop);
    };
  });

  // denoise
  Common denoise_c;
  std::string dn_ckpt, dn_in, dn_out;
  std::optional<int> dn_iters;
  auto* dn = app.add_subcommand("denoise", "denoise a cloud with a trained checkpoint");
  add_common(dn, denoise_c);
  dn->add_option("checkpoint", dn_ckpt, "checkpoint file")->required();
  dn->add_option("cloud", dn_in, "noisy cloud")->required();
  dn->add_option("--iterations", dn_iters, "test-time iterations");
  dn->add_option("-o,--output", dn_out, "output cloud")->required();
  dn->callback([&] {
    run = [&] {
      std::vector<std::pair<std::string, std::string>> f;
      if (dn_iters) f.emplace_back("denoise.iterations", std::to_string(*dn_iters));
      return cmd_denoise(resolve(denoise_c, f), dn_ckpt, dn_in, dn_out, ascii);
    };
  });

  // eval
  Common eval_c;
  std::string ev_pred, ev_mesh, ev_clean, ev_out;
  int ev_bins = 20;
  auto* ev = app.add_subcommand("eval", "Chamfer evaluation against a mesh and its clean samples");
  add_common(ev, eval_c);
  ev->add_option("prediction", ev_pred, "predicted cloud")->required();
  ev->add_option("mesh", ev_mesh, "ground-truth mesh")->required();
  ev->add_option("clean", ev_clean, "clean samples of the mesh")->required();
  ev->add_option("--bins", ev_bins, "histogram bins over [0, 2%] of the diagonal")->check(CLI::PositiveNumber);
  ev->add_option("-o,--output", ev_out, "report directory")->required();
  ev->callback([&] {
    run = [&] { return cmd_eval(resolve(eval_c, {}), ev_pred, ev_mesh, ev_clean, ev_out, ev_bins); };
  });

  // baseline
  Common bl_c;
  std::optional<std::string> bl_in, bl_out, bl_tune, bl_filter;
  auto* bl = app.add_subcommand("baseline", "mean or bilateral filter, optionally tuned on a data set");
  add_common(bl, bl_c);
  bl->add_option("cloud", bl_in, "cloud to filter");
  bl->add_option("--filter", bl_filter, "mean or bilateral");
  bl->add_option("--tune", bl_tune, "grid-search parameters on <stem>/<stem>_clean/<stem>_mesh triples");
  bl->add_option("-o,--output", bl_out, "output cloud");
  bl->callback([&] {
    run = [&] {
      std::vector<std::pair<std::string, std::string>> f;
      if (bl_filter) f.emplace_back("filter.kind", *bl_filter);
      std::optional<fs::path> in, out, tune;
      if (bl_in) in = *bl_in;
      if (bl_out) out = *bl_out;
      if (bl_tune) tune = *bl_tune;
      return cmd_baseline(resolve(bl_c, f), in, tune, out, ascii);
    };
  });

  // toy
  Common toy_c;
  std::string toy_exp, toy_out;
  std::optional<double> toy_sigma, toy_beta;
  std::size_t toy_count = 20000;
  std::optional<int> toy_epochs, toy_iters;
  auto* toy = app.add_subcommand("toy", "packaged 2D/3D experiments writing point sets and CSV curves");
  add_common(toy, toy_c);
  toy->add_option("-e,--experiment", toy_exp, "modes, bicolor, anneal, circle or sphere")
      ->required()
      ->check(CLI::IsMember({"modes", "bicolor", "anneal", "circle", "sphere"}));
  toy->add_option("--sigma", toy_sigma, "modes: circle noise std (default: 0.3 and 0.01)");
  toy->add_option("--count", toy_count, "modes: points on the noisy circle");
  toy->add_option("--beta", toy_beta, "bicolor: appearance weight of the colored run");
  toy->add_option("--epochs", toy_epochs, "training epochs for bicolor / circle / sphere");
  toy->add_option("--iterations", toy_iters, "circle / sphere: test-time iterations");
  toy->add_option("-o,--output", toy_out, "output directory")->required();
  toy->callback([&] {
    run = [&] {
      std::vector<std::pair<std::string, std::string>> f;
      if (toy_epochs) f.emplace_back("train.epochs", std::to_string(*toy_epochs));
      if (toy_iters) f.emplace_back("denoise.iterations", std::to_string(*toy_iters));
      if (toy_beta) f.emplace_back("prior.beta", num(*toy_beta));
      const RunConfig cfg = resolve(toy_c, f);
      const fs::path dir = toy_out;
      fs::create_directories(dir);
      echo_config(cfg, dir, "toy");
      const std::uint64_t seed = cfg.train.seed;
      if (toy_exp == "modes") return toy_modes(dir, seed, toy_sigma, toy_count);
      if (toy_exp == "anneal") return toy_anneal(dir, seed);
      if (toy_exp == "bicolor") return toy_bicolor(dir, seed, cfg.train.epochs, cfg.train.prior.beta);
      return toy_denoising(dir, toy_exp, seed, cfg.train.epochs, cfg.denoise.iterations);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitData;
  }

  try {
    setup_logging(log_level);
    if (threads > 0) set_thread_cap(threads);
    return run();
  } catch (const InvariantError& e) {
    std::cerr << "tdnoise: internal error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const Error& e) {
    std::cerr << "tdnoise: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "tdnoise: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "tdnoise: internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
}
