#pragma once

#include "tdnoise/autodiff.hpp"
#include "tdnoise/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tdn {

/// One encoder level. Radii are fractions of the input cloud's bbox diagonal.
struct LevelSpec {
  double receptive_frac = 0.05;
  double pool_frac = 0.025;
  int width = 32;

  bool operator==(const LevelSpec&) const = default;
};

struct ArchSpec {
  int in_width = 3;
  std::array<LevelSpec, 2> levels{LevelSpec{0.05, 0.025, 32}, LevelSpec{0.10, 0.05, 64}};
  int kernel_hidden = 8;
  double leaky_slope = 0.1;
  /// Exclude each full-resolution point from its own level-1 neighbourhood.
  bool blind_spot = true;

  void validate() const;
  std::string describe() const;
  bool operator==(const ArchSpec&) const = default;
};

struct TensorSlot {
  std::string name;
  std::size_t offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Flat parameter vector with a named tensor layout derived from the arch.
class ModelParams {
 public:
  ModelParams() = default;
  /// Random weights, unit kernel-MLP output bias, zero output layer: the
  /// network starts as the identity denoiser.
  static ModelParams init(const ArchSpec& arch, std::uint64_t seed);
  /// Layout only, all values zero.
  static ModelParams zeros(const ArchSpec& arch);

  const ArchSpec& arch() const { return arch_; }
  std::size_t count() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<TensorSlot>& layout() const { return layout_; }
  const TensorSlot& slot(std::string_view name) const;
  /// "enc1.mix.w[3,7]" for a flat index.
  std::string path_of(std::size_t flat_index) const;
  bool all_finite() const;

 private:
  ArchSpec arch_;
  std::vector<TensorSlot> layout_;
  std::vector<double> values_;
};

/// Scalar parameter count of an architecture without allocating it.
std::size_t parameter_count(const ArchSpec& arch);

/// Neighbour structure of one Monte Carlo convolution. Pairs are stored per
/// output point in lexicographic position order; `rel` holds (p_j - x) / radius.
struct ConvGeometry {
  std::size_t in_count = 0;
  std::size_t out_count = 0;
  double radius = 0.0;
  std::vector<std::size_t> offsets;  ///< out_count + 1
  std::vector<PointId> neighbors;
  std::vector<Vec3> rel;
  std::vector<double> inv_density;   ///< per input point
  // pairs regrouped by input point, for the feature gradient
  std::vector<std::size_t> t_offsets;
  std::vector<std::size_t> t_pairs;
  std::vector<PointId> pair_out;
  std::size_t empty_outputs = 0;     ///< output points with no neighbour
};

/// Neighbour counts within radius divided by their mean (uniform cloud ~ 1).
std::vector<double> estimate_density(std::span<const Vec3> points, double radius);

/// `self_of_out[i]`, when set, is an input id excluded from output i's
/// neighbourhood (the blind spot).
ConvGeometry build_conv_geometry(std::span<const Vec3> in_points, std::span<const Vec3> out_points,
                                 double radius, std::span<const double> densities,
                                 const std::vector<std::optional<PointId>>* self_of_out = nullptr);

struct KernelVars {
  ad::Var w1, b1, w2, b2;
};

/// out_i = 1/|N_i| sum_j kappa(rel_ij) * f_j / rho_j with kappa a one-hidden-
/// layer leaky-ReLU MLP from the 3D offset to one weight per input channel.
/// Output points without neighbours get zeros.
ad::Var mc_conv(ad::Tape& tape, ad::Var features, const ConvGeometry& geom, const KernelVars& kernel,
                double slope);

/// Resolved per-cloud structure: pooled subsets and the five convolutions.
struct NetworkGeometry {
  std::vector<PointId> level1;  ///< indices into the input cloud
  std::vector<PointId> level2;  ///< indices into level1
  double scale = 1.0;           ///< absolute level-1 receptive radius; output unit
  bool degenerate = false;      ///< pooling collapsed, single-level fallback
  ConvGeometry enc1, enc2, mid, dec2, dec1;
};

NetworkGeometry build_network_geometry(const ArchSpec& arch, std::span<const Vec3> positions,
                                       std::uint64_t pool_seed, bool blind_spot);

/// Records the forward pass on `tape` (params must be bound to it by the
/// caller) and returns the N x 3 displacement node. Input features default
/// to constant ones.
ad::Var network_forward(ad::Tape& tape, const ModelParams& params, const NetworkGeometry& geom,
                        const ad::Matrix* input_features = nullptr);

/// Inference convenience: displacement per point, no gradients kept. The
/// blind spot follows the architecture.
std::vector<Vec3> predict_displacements(const ModelParams& params, std::span<const Vec3> positions,
                                        std::uint64_t pool_seed);

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 1.0;               ///< lr multiplier applied every decay_interval steps
  std::uint64_t decay_interval = 0; ///< 0 disables decay
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static AdamState for_size(std::size_t n, const AdamConfig& config);
  double current_lr() const;
};

/// One bias-corrected Adam update. A non-finite gradient rejects the whole
/// step (params and state untouched) and throws InvariantError naming the
/// first offending entry via `path`.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const std::function<std::string(std::size_t)>& path = {});
void adam_step(AdamState& state, ModelParams& params, std::span<const double> grads);

struct TrainMeta {
  std::uint64_t epoch = 0;  ///< completed epochs
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  ModelParams params;
  std::optional<AdamState> adam;
  TrainMeta meta;
};

/// Binary container: magic, version, arch, little-endian doubles, metadata,
/// optional Adam state.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Throws DataError with both descriptions when the archs differ.
void require_same_arch(const ArchSpec& expected, const ArchSpec& found);

}  // namespace tdn
