#include "tdnoise/prior.hpp"

#include "tdnoise/error.hpp"
#include "tdnoise/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace tdn {

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Gaussian:
      return "gaussian";
    case KernelKind::Wendland:
      return "wendland";
    case KernelKind::InverseMultiQuadric:
      return "imq";
  }
  return "unknown";
}

KernelKind parse_kernel(std::string_view name) {
  if (name == "gaussian") return KernelKind::Gaussian;
  if (name == "wendland") return KernelKind::Wendland;
  if (name == "imq" || name == "inverse_multiquadric") return KernelKind::InverseMultiQuadric;
  throw DataError("unknown prior kernel '" + std::string(name) + "'");
}

void PriorConfig::validate() const {
  if (!(radius > 0.0)) throw DataError("prior radius must be > 0");
  if (!(alpha > 0.0)) throw DataError("prior alpha must be > 0");
  if (!(beta >= 0.0)) throw DataError("prior beta must be >= 0");
  if (!(sigma > 0.0)) throw DataError("prior sigma must be > 0");
  if (max_tries < 1) throw DataError("prior max_tries must be >= 1");
}

double kernel_profile(KernelKind kind, double s, double sigma) {
  switch (kind) {
    case KernelKind::Gaussian:
      return std::exp(-s / (2.0 * sigma * sigma));
    case KernelKind::Wendland: {
      if (s >= 1.0) return 0.0;
      const double a = 1.0 - s;
      return a * a * a * a * (1.0 + 4.0 * s);
    }
    case KernelKind::InverseMultiQuadric:
      return 1.0 / std::sqrt(1.0 + 25.0 * s * s);
  }
  return 0.0;
}

double kernel_eval(KernelKind kind, std::span<const double> weights, std::span<const double> d, double sigma) {
  if (weights.size() != d.size()) {
    throw DataError("kernel dimension mismatch: " + std::to_string(weights.size()) + " weights for a " +
                    std::to_string(d.size()) + "-vector");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double v = weights[i] * d[i];
    s += v * v;
  }
  return kernel_profile(kind, s, sigma);
}

std::vector<double> make_weights(const PriorConfig& config, bool has_color) {
  config.validate();
  const double spatial = 1.0 / (config.alpha * config.radius);
  std::vector<double> w(3, spatial);
  if (has_color) w.insert(w.end(), 3, config.beta);
  return w;
}

std::optional<PriorSample> sample_prior(const PointCloud& cloud, const NeighborIndex& index, PointId y,
                                        const PriorConfig& config, std::mt19937_64& rng) {
  const Vec3& center = cloud.positions.at(y);
  std::vector<PointId> candidates =
      index.radius_query(center, config.radius, config.include_self ? std::nullopt : std::optional<PointId>(y));
  if (candidates.empty()) return std::nullopt;
  std::sort(candidates.begin(), candidates.end());

  const std::vector<double> w = make_weights(config, cloud.has_colors());
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  std::uniform_real_distribution<double> xi(0.0, 1.0);
  std::array<double, 6> d{};
  for (int attempt = 0; attempt < config.max_tries; ++attempt) {
    const PointId q = candidates[pick(rng)];
    const double threshold = xi(rng);
    const Vec3 dp = cloud.positions[q] - center;
    for (int a = 0; a < 3; ++a) d[a] = dp[a];
    if (cloud.has_colors()) {
      const Vec3 dc = (*cloud.colors)[q] - (*cloud.colors)[y];
      for (int a = 0; a < 3; ++a) d[3 + a] = dc[a];
    }
    const double k = kernel_eval(config.kernel, w, std::span<const double>(d.data(), w.size()), config.sigma);
    if (k > threshold) {
      PriorSample s;
      s.id = q;
      s.position = cloud.positions[q];
      if (cloud.has_colors()) s.color = (*cloud.colors)[q];
      s.rejections = attempt;
      return s;
    }
  }
  return std::nullopt;
}

std::vector<std::optional<PriorSample>> sample_prior_batch(const PointCloud& cloud, const NeighborIndex& index,
                                                           const PriorConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<std::optional<PriorSample>> out(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    auto rng = point_stream(seed, static_cast<PointId>(i));
    out[i] = sample_prior(cloud, index, static_cast<PointId>(i), config, rng);
  }, 64);
  return out;
}

}  // namespace tdn
