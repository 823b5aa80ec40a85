#pragma once

#include "tdnoise/types.hpp"

#include <cstdint>
#include <string>
#include <variant>

namespace tdn {

struct GaussianNoise {
  double std_frac = 0.01;  ///< per-coordinate std as a fraction of the bbox diagonal
};

/// Range-only scanner model: every point moves along its ray from the origin
/// by a per-ring bias plus per-ray Gaussian noise.
struct ScannerNoise {
  Vec3 origin = Vec3::Zero();
  double bias_std_frac = 0.005;
  double ray_std_frac = 0.005;
  int ring_count = 64;
};

struct NoiseSpec {
  std::variant<GaussianNoise, ScannerNoise> kind;
  std::uint64_t seed = 0;

  void validate() const;
  /// One-line description, recorded as metadata in written clouds.
  std::string describe() const;
};

PointCloud corrupt_gaussian(const PointCloud& cloud, double std_frac, std::uint64_t seed);

PointCloud corrupt_scanner(const PointCloud& cloud, const ScannerNoise& spec, std::uint64_t seed);

/// Index of the elevation bucket of a unit ray among ring_count equal bins
/// over [-pi/2, pi/2].
int scanner_ring(const Vec3& unit_ray, int ring_count);

PointCloud corrupt(const PointCloud& cloud, const NoiseSpec& spec);

}  // namespace tdn
