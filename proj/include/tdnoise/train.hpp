#pragma once

#include "tdnoise/net.hpp"
#include "tdnoise/prior.hpp"
#include "tdnoise/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tdn {

enum class TrainMode { Unsupervised, Supervised, NoPrior };
enum class LossKind { AnnealedL0, L2 };

std::string_view to_string(TrainMode mode);
std::string_view to_string(LossKind kind);
TrainMode parse_train_mode(std::string_view name);
LossKind parse_loss_kind(std::string_view name);

struct TrainConfig {
  int epochs = 300;
  double lr = 0.005;
  double lr_decay = 0.7;        ///< multiplier applied every decay_every_frac of training
  double decay_every_frac = 0.2;
  double eps = 1e-8;
  double gamma_start = 2.0;
  double gamma_end = 0.0;
  LossKind loss = LossKind::AnnealedL0;
  double repulsion_weight = 0.05;
  double repulsion_sign = 1.0;  ///< +1 as printed (pulls patches together), -1 repels
  /// Patch radius as a fraction of the cloud diagonal; <= 0 uses the prior radius.
  double repulsion_radius_frac = 0.0;
  /// Prior support radius as a fraction of each cloud's diagonal.
  double prior_radius_frac = 0.05;
  PriorConfig prior;  ///< prior.radius is overwritten per cloud
  TrainMode mode = TrainMode::Unsupervised;
  ArchSpec arch;
  std::uint64_t seed = 1;
  int eval_every = 1;  ///< epochs between evaluation-hook calls

  void validate() const;
};

/// gamma after `step` of `total_steps`, linear from gamma_start to gamma_end.
double gamma_at(const TrainConfig& config, std::uint64_t step, std::uint64_t total_steps);

/// sum_c (|pred_c - target_c| + eps)^gamma.
double annealed_l0_loss(const Vec3& pred, const Vec3& target, double gamma, double eps);
/// d/d(pred) of annealed_l0_loss; zero where pred_c == target_c.
Vec3 annealed_l0_grad(const Vec3& pred, const Vec3& target, double gamma, double eps);

/// Mean over points of the largest distance from f(y) to f(y') for y' in the
/// patch of y. `patches[i]` lists neighbour ids of point i in the noisy
/// cloud; an empty patch contributes 0. Writes d/d(preds) when grad != null.
double repulsion_term(std::span<const Vec3> preds, const std::vector<std::vector<PointId>>& patches,
                      std::vector<Vec3>* grad = nullptr);

/// Radius-r neighbour lists (self excluded) of a cloud.
std::vector<std::vector<PointId>> radius_patches(std::span<const Vec3> points, double radius);

struct TrainReport {
  std::vector<double> loss;        ///< see train_unsupervised for units
  std::vector<double> eval_error;  ///< NaN for epochs without evaluation
  std::vector<double> seconds;
  std::vector<std::size_t> masked;  ///< points without a prior sample, summed over the epoch
  std::filesystem::path checkpoint;

  /// epoch,loss,eval_error,seconds
  std::string to_csv(std::size_t first_epoch = 1) const;
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  std::uint64_t epoch = 0;  ///< completed epochs
  std::uint64_t step = 0;   ///< optimizer steps taken (skipped steps included)
};

struct TrainHooks {
  /// Held-out error of the current parameters (e.g. Chamfer); optional.
  std::function<double(const ModelParams&)> evaluate;
  std::function<void(const TrainState&)> on_epoch_end;
  /// Stop after this many completed epochs (simulated interruption).
  std::optional<std::uint64_t> stop_after_epoch;
};

struct TrainResult {
  TrainState state;
  TrainReport report;
};

/// Unsupervised training (and the NoPrior ablation when config.mode is
/// NoPrior). One step per cloud per epoch, the batch being the whole cloud.
/// Reported loss is in length units: the power mean (mean (|e|+eps)^gamma)^(1/gamma)
/// of per-coordinate errors (geometric mean at gamma = 0; RMS for L2) plus
/// the weighted repulsion term, so epochs with different gamma compare.
TrainResult train_unsupervised(const std::vector<PointCloud>& dataset, const TrainConfig& config,
                               const TrainHooks& hooks = {}, std::optional<TrainState> resume = std::nullopt);

/// Supervised comparator: the target of each noisy point is its nearest clean point.
TrainResult train_supervised(const std::vector<std::pair<PointCloud, PointCloud>>& pairs, const TrainConfig& config,
                             const TrainHooks& hooks = {}, std::optional<TrainState> resume = std::nullopt);

/// Nearest clean point for each noisy point.
std::vector<PointId> nearest_targets(const PointCloud& noisy, const PointCloud& clean);

/// d'(y) = d(y) - Gaussian-weighted mean of d over the radius neighbourhood
/// of y (bandwidth radius / 2, y included).
std::vector<Vec3> remove_low_frequency(std::span<const Vec3> displacements, std::span<const Vec3> positions,
                                       double radius);

struct DenoiseOptions {
  int iterations = 2;
  double lowfreq_radius_frac = 0.1;  ///< fraction of the input diagonal
  std::uint64_t pool_seed = 0;
};

struct DenoiseResult {
  PointCloud cloud;
  std::vector<double> mean_displacement;  ///< per iteration, after shrink removal
};

/// Repeated y <- y + remove_low_frequency(f(y)); colors pass through and are
/// never network input.
DenoiseResult denoise(const ModelParams& params, const PointCloud& cloud, const DenoiseOptions& options = {});

/// Adam fit of one scalar c to samples under sum_i (|c - s_i| + eps)^gamma
/// with gamma linear from gamma_start to gamma_end over the steps.
struct ConstantFitOptions {
  double gamma_start = 2.0;
  double gamma_end = 2.0;
  int steps = 4000;
  double lr = 0.01;
  double eps = 1e-8;
  double init = 0.0;
};
/// `trajectory`, when given, receives (gamma, c) after every step.
double fit_constant(std::span<const double> samples, const ConstantFitOptions& options,
                    std::vector<std::pair<double, double>>* trajectory = nullptr);

}  // namespace tdn
