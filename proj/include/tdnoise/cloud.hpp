#pragma once

#include "tdnoise/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace tdn {

/// Uniform hash grid over a fixed set of positions for fixed-radius queries.
///
/// The index keeps a non-owning view of the positions it was built from; the
/// caller keeps them alive and unchanged for the lifetime of the index. After
/// construction the index is immutable and safe to query concurrently.
class NeighborIndex {
 public:
  NeighborIndex(std::span<const Vec3> points, double cell_size);

  double cell_size() const noexcept { return cell_; }
  std::size_t size() const noexcept { return points_.size(); }
  std::size_t occupied_cells() const noexcept { return cells_.size(); }
  std::span<const Vec3> points() const noexcept { return points_; }

  /// Ids within Euclidean distance <= radius of center, minus `exclude`.
  std::vector<PointId> radius_query(const Vec3& center, double radius,
                                    std::optional<PointId> exclude = std::nullopt) const;

  /// Calls visit(id, squared_distance) for every point within radius.
  template <typename Visit>
  void for_each_within(const Vec3& center, double radius, Visit&& visit) const;

  /// Number of points within radius (including a point at center itself).
  std::size_t count_within(const Vec3& center, double radius) const;

  /// Closest indexed point, searching shells of cells outward. Returns
  /// nullopt only when the index is empty or every point is excluded.
  std::optional<std::pair<PointId, double>> nearest(
      const Vec3& center, std::optional<PointId> exclude = std::nullopt) const;

 private:
  struct Range {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  std::array<std::int64_t, 3> cell_of(const Vec3& p) const;
  std::uint64_t key(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::uint64_t>(x) +
           dims_[0] * (static_cast<std::uint64_t>(y) + dims_[1] * static_cast<std::uint64_t>(z));
  }
  template <typename Visit>
  void scan_cells(const std::array<std::int64_t, 3>& lo, const std::array<std::int64_t, 3>& hi,
                  Visit&& visit) const;

  std::span<const Vec3> points_;
  double cell_ = 0.0;
  Vec3 origin_ = Vec3::Zero();
  std::array<std::uint64_t, 3> dims_{1, 1, 1};
  std::vector<PointId> sorted_ids_;
  std::unordered_map<std::uint64_t, Range> cells_;
};

/// Builds an index over a cloud. Rejects empty clouds, non-finite
/// coordinates and non-positive cell sizes with DataError.
NeighborIndex build_index(const PointCloud& cloud, double cell_size);

double bbox_diagonal(std::span<const Vec3> points);
inline double bbox_diagonal(const PointCloud& cloud) { return bbox_diagonal(cloud.positions); }

/// Poisson-disk samples on a mesh together with the interpolated surface
/// normal and the source triangle of every sample.
struct SurfaceSamples {
  PointCloud cloud;
  std::vector<Vec3> normals;
  std::vector<PointId> triangle;
};

/// Dart throwing over area-weighted random surface points with grid-based
/// rejection. A dart phase stops after 30 consecutive failures and is
/// followed by a sweep over a dense candidate pool that closes remaining
/// gaps. Deterministic for a fixed seed.
SurfaceSamples poisson_disk_sample_with_normals(const TriangleMesh& mesh, double min_dist,
                                                std::uint64_t seed);

inline PointCloud poisson_disk_sample(const TriangleMesh& mesh, double min_dist,
                                      std::uint64_t seed) {
  return poisson_disk_sample_with_normals(mesh, min_dist, seed).cloud;
}

/// Minimum distance that yields roughly `count` samples on a surface of the
/// given area (random sequential packing density).
double min_dist_for_count(double surface_area, std::size_t count);

/// Poisson-disk samples near a target count: one run at the packing
/// estimate, then a rerun with the distance corrected by sqrt(got / target).
SurfaceSamples poisson_disk_sample_count(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

/// Greedy Poisson-disk subset of a point set, visited in seeded random
/// order. Returns ids into `points` in ascending order.
std::vector<PointId> poisson_subsample(std::span<const Vec3> points, double radius,
                                       std::uint64_t seed);

// ---------------------------------------------------------------------------

template <typename Visit>
void NeighborIndex::scan_cells(const std::array<std::int64_t, 3>& lo,
                               const std::array<std::int64_t, 3>& hi, Visit&& visit) const {
  for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y) {
      for (std::int64_t x = lo[0]; x <= hi[0]; ++x) {
        auto it = cells_.find(key(x, y, z));
        if (it == cells_.end()) continue;
        for (std::uint32_t k = it->second.begin; k < it->second.end; ++k) visit(sorted_ids_[k]);
      }
    }
  }
}

template <typename Visit>
void NeighborIndex::for_each_within(const Vec3& center, double radius, Visit&& visit) const {
  const double r2 = radius * radius;
  auto test = [&](PointId id) {
    const double d2 = (points_[id] - center).squaredNorm();
    if (d2 <= r2) visit(id, d2);
  };
  std::array<std::int64_t, 3> lo{}, hi{};
  std::uint64_t scanned = 1;
  for (int a = 0; a < 3; ++a) {
    const double top = static_cast<double>(dims_[a]) - 1.0;
    const double l = std::clamp(std::floor((center[a] - radius - origin_[a]) / cell_), -1.0, top + 1.0);
    const double h = std::clamp(std::floor((center[a] + radius - origin_[a]) / cell_), -1.0, top + 1.0);
    lo[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(l));
    hi[a] = std::min<std::int64_t>(static_cast<std::int64_t>(top), static_cast<std::int64_t>(h));
    if (hi[a] < lo[a]) return;
    scanned *= static_cast<std::uint64_t>(hi[a] - lo[a] + 1);
  }
  if (scanned > 2 * cells_.size()) {
    // very large radius: a linear scan is cheaper than probing empty cells
    for (PointId id = 0; id < points_.size(); ++id) test(id);
    return;
  }
  scan_cells(lo, hi, test);
}

}  // namespace tdn
