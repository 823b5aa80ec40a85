#pragma once

#include "tdnoise/cloud.hpp"
#include "tdnoise/types.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace tdn {

enum class KernelKind { Gaussian, Wendland, InverseMultiQuadric };

std::string_view to_string(KernelKind kind);
/// Accepts gaussian, wendland, imq / inverse_multiquadric.
KernelKind parse_kernel(std::string_view name);

/// Default appearance weight: 4 over the RGB cube diagonal.
inline const double kDefaultBeta = 4.0 / std::sqrt(3.0);

/// Proximity/appearance prior q(z|y) sampled by rejection.
struct PriorConfig {
  KernelKind kernel = KernelKind::Gaussian;
  double radius = 0.05;  ///< support radius r in model units
  double alpha = 0.5;    ///< spatial weight is 1 / (alpha r)
  double beta = kDefaultBeta;
  double sigma = 1.0;    ///< Gaussian bandwidth; other kernels ignore it
  int max_tries = 16;
  bool include_self = true;  ///< y itself is a candidate

  void validate() const;
};

/// Kernel value as a function of the squared weighted distance ||W d||^2.
/// Every kernel returns 1 at zero.
double kernel_profile(KernelKind kind, double weighted_sq_dist, double sigma = 1.0);

/// k(d) for a difference vector in position (3) or position+color (6) space.
/// Throws DataError when the dimensions of `weights` and `d` differ.
double kernel_eval(KernelKind kind, std::span<const double> weights, std::span<const double> d,
                   double sigma = 1.0);

/// Diagonal of W: three spatial rows 1/(alpha r), then three appearance rows
/// beta when has_color.
std::vector<double> make_weights(const PriorConfig& config, bool has_color);

struct PriorSample {
  PointId id = 0;
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> color;
  int rejections = 0;
};

/// Rejection sampler for q(z|y): up to max_tries times draw a candidate
/// uniformly among the radius neighbours of y and accept it when
/// k(candidate - y) > xi, xi ~ U(0,1). Colors enter the kernel only when the
/// cloud has them. Returns nullopt when nothing is accepted.
std::optional<PriorSample> sample_prior(const PointCloud& cloud, const NeighborIndex& index, PointId y,
                                        const PriorConfig& config, std::mt19937_64& rng);

/// Per-point seeded stream: seed xor point id, so batches are reproducible
/// regardless of evaluation order.
inline std::mt19937_64 point_stream(std::uint64_t seed, PointId id) {
  return std::mt19937_64(seed ^ static_cast<std::uint64_t>(id));
}

/// One prior sample per point (in parallel). Entry i is empty when point i
/// had no acceptance.
std::vector<std::optional<PriorSample>> sample_prior_batch(const PointCloud& cloud,
                                                           const NeighborIndex& index,
                                                           const PriorConfig& config,
                                                           std::uint64_t seed);

}  // namespace tdn
