#include "tdnoise/toy.hpp"

#include "tdnoise/cloud.hpp"
#include "tdnoise/error.hpp"
#include "tdnoise/meshio.hpp"
#include "tdnoise/noise.hpp"
#include "tdnoise/shapes.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

namespace tdn::toy {

namespace {

constexpr double kCircleNoise = 0.05;
constexpr std::size_t kCirclePoints = 500;
constexpr std::size_t kSpherePoints = 2000;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PointCloud sample_count(const TriangleMesh& mesh, std::size_t target, std::uint64_t seed,
                        std::vector<Vec3>* normals = nullptr) {
  SurfaceSamples s = poisson_disk_sample_count(mesh, target, seed);
  if (normals) *normals = std::move(s.normals);
  return std::move(s.cloud);
}

PointCloud isotropic_noise(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  PointCloud out = cloud;
  for (Vec3& p : out.positions) {
    for (int a = 0; a < 3; ++a) p[a] += g(rng);
  }
  return out;
}

// Both toys are rotationally symmetric about the origin, so the mode
// manifold is the circle / sphere at the mean mode radius.
void fill_mode_distances(DenoiseToyResult& r, double bandwidth) {
  const ModeResult modes = self_seeded_modes(r.held_noisy, bandwidth);
  if (modes.modes.empty()) throw InvariantError("mean shift produced no modes");
  r.modes = modes.modes;
  double s = 0.0;
  for (const Vec3& m : r.modes) s += m.norm();
  r.mode_radius = s / static_cast<double>(r.modes.size());
  auto mean_gap = [&](const PointCloud& c) {
    double g = 0.0;
    for (const Vec3& p : c.positions) g += std::abs(p.norm() - r.mode_radius);
    return g / static_cast<double>(c.size());
  };
  r.noisy_mode_distance = mean_gap(r.held_noisy);
  r.denoised_mode_distance = mean_gap(r.denoised);
}

template <typename EvalFn>
DenoiseToyResult run_denoising(const PointCloud& train, PointCloud held_noisy, PointCloud held_clean, EvalFn&& eval,
                               std::uint64_t seed, int epochs, int iterations, double mode_bandwidth) {
  DenoiseToyResult r;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult tr = train_unsupervised({train}, toy_train_config(seed, epochs));
  r.loss = tr.report.loss;
  r.params = tr.state.params;
  DenoiseOptions one;
  one.iterations = 1;
  DenoiseOptions many;
  many.iterations = iterations;
  r.chamfer_1 = eval(denoise(tr.state.params, held_noisy, one).cloud);
  r.denoised = denoise(tr.state.params, held_noisy, many).cloud;
  r.chamfer = eval(r.denoised);
  r.noisy_chamfer = eval(held_noisy);
  r.held_noisy = std::move(held_noisy);
  r.held_clean = std::move(held_clean);
  fill_mode_distances(r, mode_bandwidth);
  r.seconds = seconds_since(t0);
  return r;
}

}  // namespace

TrainConfig toy_train_config(std::uint64_t seed, int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  c.prior.include_self = false;
  c.prior_radius_frac = 0.1;
  c.lr_decay = 0.5;
  return c;
}

PointCloud jitter_in_plane(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  PointCloud out = cloud;
  for (Vec3& p : out.positions) {
    p.x() += g(rng);
    p.y() += g(rng);
  }
  return out;
}

ModeResult self_seeded_modes(const PointCloud& noisy, double bandwidth) {
  return mode_manifold(noisy, bandwidth, noisy.positions);
}

DenoiseToyResult circle_denoising(std::uint64_t seed, int epochs, int iterations) {
  const TriangleMesh ribbon = shapes::circle_ribbon(1.0, 4096, 1e-6);
  const PointCloud train = jitter_in_plane(shapes::circle_points(1.0, kCirclePoints, seed), kCircleNoise,
                                           ad::hash_combine(seed, 11));
  PointCloud held_clean = shapes::circle_points(1.0, kCirclePoints, ad::hash_combine(seed, 2));
  PointCloud held = jitter_in_plane(held_clean, kCircleNoise, ad::hash_combine(seed, 12));
  auto eval = [&](const PointCloud& c) { return chamfer(c, ribbon, held_clean).chamfer; };
  return run_denoising(train, held, held_clean, eval, seed, epochs, iterations, kCircleNoise);
}

DenoiseToyResult sphere_denoising(std::uint64_t seed, int epochs, int iterations) {
  const TriangleMesh mesh = shapes::sphere(1.0, 5);
  const PointCloud train = isotropic_noise(sample_count(mesh, kSpherePoints, seed), kCircleNoise,
                                           ad::hash_combine(seed, 11));
  PointCloud held_clean = sample_count(mesh, kSpherePoints, ad::hash_combine(seed, 2));
  PointCloud held = isotropic_noise(held_clean, kCircleNoise, ad::hash_combine(seed, 12));
  auto eval = [&](const PointCloud& c) { return chamfer(c, mesh, held_clean).chamfer; };
  return run_denoising(train, held, held_clean, eval, seed, epochs, iterations, kCircleNoise);
}

ModesToyResult circle_modes(double sigma, std::size_t count, double bandwidth, std::uint64_t seed,
                            std::size_t seeds) {
  if (!(sigma > 0.0) || !(bandwidth > 0.0)) throw DataError("sigma and bandwidth must be > 0");
  if (count == 0 || seeds == 0) throw DataError("mode experiment needs points and seeds");
  ModesToyResult r;
  r.sigma = sigma;
  r.bandwidth = bandwidth;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> g(0.0, sigma);
  for (std::size_t i = 0; i < count; ++i) {
    const double a = angle(rng);
    r.noisy.positions.emplace_back(std::cos(a) + g(rng), std::sin(a) + g(rng), 0.0);
  }
  // seeds on the unit circle: the modes should move off it
  std::vector<Vec3> starts;
  for (std::size_t i = 0; i < seeds; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seeds);
    starts.emplace_back(std::cos(a), std::sin(a), 0.0);
  }
  const ModeResult m = mode_manifold(r.noisy, bandwidth, starts);
  r.mode_points = m.modes;
  r.modes = m.modes.size();
  r.non_converged = m.non_converged;
  double s = 0.0;
  for (const Vec3& p : m.modes) s += p.head<2>().norm();
  r.mean_mode_radius = m.modes.empty() ? 0.0 : s / static_cast<double>(m.modes.size());
  // the kernel density estimate is the sample density blurred once more
  r.analytic_radius = circle_mode_radius(1.0, std::hypot(sigma, bandwidth));
  r.relative_error = std::abs(r.mean_mode_radius - r.analytic_radius) / r.analytic_radius;
  return r;
}

PointCloud bicolor_corner(std::size_t per_arm, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, sigma);
  PointCloud c;
  c.id = "bicolor";
  c.colors.emplace();
  for (std::size_t i = 0; i < per_arm; ++i) {
    const double t = (static_cast<double>(i) + u(rng)) / static_cast<double>(per_arm);
    c.positions.emplace_back(-t + g(rng), 0.0, g(rng));
    c.colors->emplace_back(1.0, 0.0, 0.0);
  }
  for (std::size_t i = 0; i < per_arm; ++i) {
    const double t = (static_cast<double>(i) + u(rng)) / static_cast<double>(per_arm);
    c.positions.emplace_back(g(rng), 0.0, t + g(rng));
    c.colors->emplace_back(0.0, 0.0, 1.0);
  }
  return c;
}

double cross_boundary_displacement(const PointCloud& before, const PointCloud& after, double band) {
  if (!before.colors || before.size() != after.size()) throw DataError("labelled before/after clouds required");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const Vec3& p = before.positions[i];
    const Vec3 d = after.positions[i] - p;
    const bool red = (*before.colors)[i].x() > (*before.colors)[i].z();
    if ((red ? -p.x() : p.z()) > band) continue;
    // red lives on z = 0 with blue above it; blue lives on x = 0 with red at -x
    s += red ? d.z() : -d.x();
    ++n;
  }
  if (n == 0) throw DataError("no points near the color boundary");
  return s / static_cast<double>(n);
}

BicolorResult bicolor_separation(std::uint64_t seed, double beta, int epochs) {
  constexpr std::size_t kPerArm = 400;
  constexpr double kSigma = 0.02;
  constexpr double kBand = 0.1;
  BicolorResult r;
  r.beta = beta;
  const PointCloud train = bicolor_corner(kPerArm, kSigma, ad::hash_combine(seed, 1));
  r.noisy = bicolor_corner(kPerArm, kSigma, ad::hash_combine(seed, 2));
  PointCloud input = r.noisy;
  input.colors.reset();
  for (double b : {0.0, beta}) {
    TrainConfig cfg = toy_train_config(seed, epochs);
    cfg.prior.beta = b;
    const TrainResult tr = train_unsupervised({train}, cfg);
    PointCloud out = denoise(tr.state.params, input).cloud;
    out.colors = r.noisy.colors;
    const double cross = cross_boundary_displacement(r.noisy, out, kBand);
    if (b == 0.0) {
      r.cross_without_color = cross;
      r.denoised_without_color = std::move(out);
    } else {
      r.cross_with_color = cross;
      r.denoised_with_color = std::move(out);
    }
  }
  r.ratio = r.cross_without_color != 0.0 ? r.cross_with_color / r.cross_without_color : 0.0;
  return r;
}

AnnealToyResult anneal_study(std::uint64_t seed, std::size_t samples) {
  if (samples < 10) throw DataError("anneal study needs at least 10 samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<double> xs;
  const std::size_t majority = samples * 7 / 10;
  for (std::size_t i = 0; i < samples; ++i) xs.push_back((i < majority ? 0.0 : 1.0) + g(rng));
  AnnealToyResult r;
  for (double x : xs) r.sample_mean += x;
  r.sample_mean /= static_cast<double>(xs.size());
  r.majority_mode = 0.0;
  ConstantFitOptions o;
  o.init = 0.5;
  r.fit_gamma2 = fit_constant(xs, o, &r.trajectory_gamma2);
  o.gamma_end = 0.0;
  r.fit_annealed = fit_constant(xs, o, &r.trajectory_annealed);
  return r;
}

std::vector<ShapeCase> mini_dataset(std::size_t points, double noise_frac, std::uint64_t seed) {
  std::vector<ShapeCase> out;
  std::uint64_t k = 0;
  for (const std::string& name : shapes::mini_dataset_names()) {
    ShapeCase c;
    c.name = name;
    c.mesh = shapes::by_name(name);
    std::vector<Vec3> normals;
    const std::uint64_t s = ad::hash_combine(seed, ++k);
    const PointCloud sampled = sample_count(c.mesh, points, s, &normals);
    c.clean = shade_lambertian(sampled, normals, s);
    c.clean.id = name;
    c.noisy = corrupt_gaussian(c.clean, noise_frac, ad::hash_combine(s, 7));
    out.push_back(std::move(c));
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

AblationResult ablation_study(const std::vector<std::uint64_t>& seeds, std::size_t points, double noise_frac,
                              int epochs) {
  if (seeds.empty()) throw DataError("ablation needs at least one seed");
  AblationResult r;
  const auto train_set = mini_dataset(points, noise_frac, 1);
  const auto test_set = mini_dataset(points, noise_frac, 2);
  std::vector<PointCloud> train_clouds;
  std::vector<EvalCase> tune_cases;
  for (const ShapeCase& c : train_set) {
    train_clouds.push_back(c.noisy);
    tune_cases.push_back({c.noisy, c.mesh, c.clean});
  }
  auto mean_chamfer = [&](auto&& predict) {
    double s = 0.0;
    for (const ShapeCase& c : test_set) s += chamfer(predict(c.noisy), c.mesh, c.clean).chamfer;
    return s / static_cast<double>(test_set.size());
  };
  r.noisy = mean_chamfer([](const PointCloud& y) { return y; });

  r.mean_tuning = tune_filter(tune_cases, FilterKind::Mean);
  r.bilateral_tuning = tune_filter(tune_cases, FilterKind::Bilateral);
  const double mean_f = mean_chamfer([&](const PointCloud& y) {
    return apply_filter(y, FilterKind::Mean, r.mean_tuning.config);
  });
  const double bil_f = mean_chamfer([&](const PointCloud& y) {
    return apply_filter(y, FilterKind::Bilateral, r.bilateral_tuning.config);
  });

  for (std::uint64_t seed : seeds) {
    auto run = [&](TrainMode mode, double beta) {
      TrainConfig cfg = toy_train_config(seed, epochs);
      cfg.mode = mode;
      cfg.prior.beta = beta;
      const TrainResult tr = train_unsupervised(train_clouds, cfg);
      return mean_chamfer([&](const PointCloud& y) {
        PointCloud in = y;
        in.colors.reset();
        return denoise(tr.state.params, in).cloud;
      });
    };
    r.full.push_back(run(TrainMode::Unsupervised, kDefaultBeta));
    r.no_color.push_back(run(TrainMode::Unsupervised, 0.0));
    r.no_prior.push_back(run(TrainMode::NoPrior, kDefaultBeta));
    // the filters are deterministic; one value per seed keeps the medians aligned
    r.mean_filter.push_back(mean_f);
    r.bilateral_filter.push_back(bil_f);
    spdlog::info("ablation seed {}: full {:.5f} nocolor {:.5f} noprior {:.5f}", seed, r.full.back(),
                 r.no_color.back(), r.no_prior.back());
  }
  return r;
}

}  // namespace tdn::toy
