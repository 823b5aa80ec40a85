#include "tdnoise/noise.hpp"

#include "tdnoise/cloud.hpp"
#include "tdnoise/error.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace tdn {

void NoiseSpec::validate() const {
  if (const auto* g = std::get_if<GaussianNoise>(&kind)) {
    if (!(g->std_frac >= 0.0) || !std::isfinite(g->std_frac)) throw DataError("noise level must be >= 0");
    return;
  }
  const auto& s = std::get<ScannerNoise>(kind);
  if (!(s.bias_std_frac >= 0.0) || !(s.ray_std_frac >= 0.0) || !std::isfinite(s.bias_std_frac) ||
      !std::isfinite(s.ray_std_frac)) {
    throw DataError("scanner noise fractions must be >= 0");
  }
  if (s.ring_count < 1) throw DataError("scanner ring count must be >= 1");
  if (!s.origin.allFinite()) throw DataError("scanner origin must be finite");
}

std::string NoiseSpec::describe() const {
  std::ostringstream s;
  s.precision(17);
  if (const auto* g = std::get_if<GaussianNoise>(&kind)) {
    s << "noise=gaussian std_frac=" << g->std_frac;
  } else {
    const auto& sc = std::get<ScannerNoise>(kind);
    s << "noise=scanner origin=" << sc.origin.x() << ',' << sc.origin.y() << ',' << sc.origin.z()
      << " bias_std_frac=" << sc.bias_std_frac << " ray_std_frac=" << sc.ray_std_frac
      << " rings=" << sc.ring_count;
  }
  s << " seed=" << seed;
  return s.str();
}

PointCloud corrupt_gaussian(const PointCloud& cloud, double std_frac, std::uint64_t seed) {
  if (!(std_frac >= 0.0)) throw DataError("noise level must be >= 0");
  PointCloud out = cloud;
  if (std_frac == 0.0 || cloud.empty()) return out;
  const double sigma = std_frac * bbox_diagonal(cloud);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Vec3& p : out.positions) {
    for (int a = 0; a < 3; ++a) p[a] += sigma * g(rng);
  }
  return out;
}

int scanner_ring(const Vec3& unit_ray, int ring_count) {
  const double elevation = std::asin(std::clamp(unit_ray.z(), -1.0, 1.0));
  const double t = (elevation + std::numbers::pi / 2) / std::numbers::pi;
  return std::clamp(static_cast<int>(t * ring_count), 0, ring_count - 1);
}

PointCloud corrupt_scanner(const PointCloud& cloud, const ScannerNoise& spec, std::uint64_t seed) {
  NoiseSpec{spec, seed}.validate();
  PointCloud out = cloud;
  const double diag = cloud.empty() ? 0.0 : bbox_diagonal(cloud);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  // one bias per laser ring, drawn before any per-ray noise
  std::vector<double> bias(static_cast<std::size_t>(spec.ring_count));
  for (double& b : bias) b = spec.bias_std_frac * diag * g(rng);
  const double ray_sigma = spec.ray_std_frac * diag;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Vec3& p = out.positions[i];
    const Vec3 ray = p - spec.origin;
    const double len = ray.norm();
    if (!(len > 0.0)) throw DataError("point " + std::to_string(i) + " coincides with the scanner origin");
    const Vec3 u = ray / len;
    const double offset = bias[static_cast<std::size_t>(scanner_ring(u, spec.ring_count))] + ray_sigma * g(rng);
    p += offset * u;
  }
  return out;
}

PointCloud corrupt(const PointCloud& cloud, const NoiseSpec& spec) {
  spec.validate();
  if (const auto* g = std::get_if<GaussianNoise>(&spec.kind)) return corrupt_gaussian(cloud, g->std_frac, spec.seed);
  return corrupt_scanner(cloud, std::get<ScannerNoise>(spec.kind), spec.seed);
}

}  // namespace tdn
