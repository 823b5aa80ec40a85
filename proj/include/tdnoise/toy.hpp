#pragma once

#include "tdnoise/eval.hpp"
#include "tdnoise/train.hpp"
#include "tdnoise/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tdn::toy {

/// Training settings of the packaged toy runs. Differs from the library
/// defaults in three places: y is not a prior candidate, the prior radius is
/// 10% of the diagonal and the learning rate halves every 20% of training.
TrainConfig toy_train_config(std::uint64_t seed, int epochs = 300);

/// Adds N(0, sigma^2) to x and y only (2D noise for planar toys).
PointCloud jitter_in_plane(const PointCloud& cloud, double sigma, std::uint64_t seed);

/// Mean-shift modes of a cloud, seeded at its own points. Bandwidth is in
/// absolute units.
ModeResult self_seeded_modes(const PointCloud& noisy, double bandwidth);

struct DenoiseToyResult {
  double noisy_chamfer = 0.0;
  double chamfer_1 = 0.0;  ///< after one denoise iteration
  double chamfer = 0.0;    ///< after `iterations`
  double mode_radius = 0.0;             ///< mean radius of the mean-shift modes
  double noisy_mode_distance = 0.0;     ///< mean | |y| - mode_radius |
  double denoised_mode_distance = 0.0;
  double seconds = 0.0;
  std::vector<double> loss;
  PointCloud held_noisy, held_clean, denoised;
  std::vector<Vec3> modes;
  ModelParams params;  ///< trained weights

  double reduction() const { return noisy_chamfer > 0.0 ? 1.0 - chamfer / noisy_chamfer : 0.0; }
};

/// 500-point unit circle with in-plane noise of std 0.05 (5% of the radius);
/// trains on one noise realization, evaluates on another one.
DenoiseToyResult circle_denoising(std::uint64_t seed, int epochs = 300, int iterations = 2);

/// ~2K Poisson-disk samples of the unit sphere with isotropic noise of std
/// 0.05 per coordinate; same protocol as the circle.
DenoiseToyResult sphere_denoising(std::uint64_t seed, int epochs = 300, int iterations = 2);

struct ModesToyResult {
  double sigma = 0.0;
  double bandwidth = 0.0;
  double analytic_radius = 0.0;   ///< r* for sqrt(sigma^2 + bandwidth^2)
  double mean_mode_radius = 0.0;
  double relative_error = 0.0;
  std::size_t modes = 0;
  std::size_t non_converged = 0;
  PointCloud noisy;
  std::vector<Vec3> mode_points;
};

/// Unit circle blurred by isotropic 2D noise of std sigma, mean shift with a
/// Gaussian bandwidth, modes compared with the analytic maximizer.
ModesToyResult circle_modes(double sigma, std::size_t count, double bandwidth, std::uint64_t seed,
                            std::size_t seeds = 400);

/// Red arm along -x on z = 0 and blue arm along +z on x = 0, meeting at the
/// origin, with isotropic in-plane noise.
PointCloud bicolor_corner(std::size_t per_arm, double sigma, std::uint64_t seed);

struct BicolorResult {
  double beta = 0.0;
  double cross_without_color = 0.0;  ///< beta = 0 run
  double cross_with_color = 0.0;
  double ratio = 0.0;
  PointCloud noisy, denoised_without_color, denoised_with_color;
};

/// Mean displacement towards the other arm's plane, over held-out points
/// within `band` of the corner. Colors are used only to label the points.
double cross_boundary_displacement(const PointCloud& before, const PointCloud& after, double band);

/// Trains once with beta = 0 and once with `beta` on the same noisy corner
/// and compares cross-boundary displacement on a held-out realization.
BicolorResult bicolor_separation(std::uint64_t seed, double beta, int epochs = 300);

struct AnnealToyResult {
  double sample_mean = 0.0;
  double fit_gamma2 = 0.0;
  double majority_mode = 0.0;
  double fit_annealed = 0.0;
  std::vector<std::pair<double, double>> trajectory_gamma2;
  std::vector<std::pair<double, double>> trajectory_annealed;
};

/// 1D constant fits on a 70/30 mixture around 0 and 1: gamma fixed at 2 and
/// gamma annealed 2 -> 0.
AnnealToyResult anneal_study(std::uint64_t seed, std::size_t samples = 1000);

/// One clean/noisy/mesh triple of the mini dataset.
struct ShapeCase {
  std::string name;
  TriangleMesh mesh;
  PointCloud clean;  ///< shaded
  PointCloud noisy;  ///< shaded, colors copied from clean
};

/// The five mini-dataset shapes sampled with ~`points` points, Lambertian
/// colors and Gaussian noise of std `noise_frac` of the diagonal.
std::vector<ShapeCase> mini_dataset(std::size_t points, double noise_frac, std::uint64_t seed);

struct AblationResult {
  /// Mean Chamfer over test shapes, one entry per seed.
  std::vector<double> full, no_color, no_prior, mean_filter, bilateral_filter;
  double noisy = 0.0;
  FilterTuning mean_tuning, bilateral_tuning;
};

double median(std::vector<double> v);

/// Trains Full / NoColor / NoPrior on the noisy training shapes per seed and
/// evaluates on a second noise realization. Filters are tuned on the
/// training shapes.
AblationResult ablation_study(const std::vector<std::uint64_t>& seeds, std::size_t points, double noise_frac,
                              int epochs);

}  // namespace tdn::toy
