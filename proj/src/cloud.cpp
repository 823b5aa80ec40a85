#include "tdnoise/cloud.hpp"

#include "tdnoise/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace tdn {

namespace {
constexpr std::uint64_t kMaxCellsPerAxis = 1u << 21;
}

NeighborIndex::NeighborIndex(std::span<const Vec3> points, double cell_size)
    : points_(points), cell_(cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw DataError("neighbor index cell size must be positive and finite");
  }
  if (points.empty()) throw DataError("cannot index an empty point set");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) {
      throw DataError("point " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  const Aabb box = bounds(points);
  origin_ = box.lo;
  for (int a = 0; a < 3; ++a) {
    const double cells = std::floor(box.extent()[a] / cell_) + 1.0;
    if (cells > static_cast<double>(kMaxCellsPerAxis)) {
      throw DataError("cell size too small for the extent of the point set");
    }
    dims_[a] = static_cast<std::uint64_t>(cells);
  }

  std::vector<std::uint64_t> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = cell_of(points[i]);
    keys[i] = key(c[0], c[1], c[2]);
  }
  sorted_ids_.resize(points.size());
  std::iota(sorted_ids_.begin(), sorted_ids_.end(), PointId{0});
  std::stable_sort(sorted_ids_.begin(), sorted_ids_.end(),
                   [&](PointId a, PointId b) { return keys[a] < keys[b]; });
  cells_.reserve(points.size());
  for (std::uint32_t k = 0; k < sorted_ids_.size();) {
    const std::uint64_t cell = keys[sorted_ids_[k]];
    std::uint32_t end = k;
    while (end < sorted_ids_.size() && keys[sorted_ids_[end]] == cell) ++end;
    cells_.emplace(cell, Range{k, end});
    k = end;
  }
}

std::array<std::int64_t, 3> NeighborIndex::cell_of(const Vec3& p) const {
  std::array<std::int64_t, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const auto v = static_cast<std::int64_t>(std::floor((p[a] - origin_[a]) / cell_));
    c[a] = std::clamp<std::int64_t>(v, 0, static_cast<std::int64_t>(dims_[a]) - 1);
  }
  return c;
}

std::vector<PointId> NeighborIndex::radius_query(const Vec3& center, double radius,
                                                 std::optional<PointId> exclude) const {
  std::vector<PointId> out;
  for_each_within(center, radius, [&](PointId id, double) {
    if (!exclude || *exclude != id) out.push_back(id);
  });
  return out;
}

std::size_t NeighborIndex::count_within(const Vec3& center, double radius) const {
  std::size_t n = 0;
  for_each_within(center, radius, [&](PointId, double) { ++n; });
  return n;
}

std::optional<std::pair<PointId, double>> NeighborIndex::nearest(
    const Vec3& center, std::optional<PointId> exclude) const {
  std::optional<std::pair<PointId, double>> best;
  double best_d2 = std::numeric_limits<double>::infinity();
  auto consider = [&](PointId id) {
    if (exclude && *exclude == id) return;
    const double d2 = (points_[id] - center).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && best && id < best->first)) {
      best_d2 = d2;
      best = std::make_pair(id, 0.0);
    }
  };

  // Clamp the query into the grid; distance from the clamped cell to the
  // real center is accounted for in the termination bound.
  std::array<std::int64_t, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double v = std::floor((center[a] - origin_[a]) / cell_);
    c[a] = static_cast<std::int64_t>(
        std::clamp(v, 0.0, static_cast<double>(dims_[a]) - 1.0));
  }
  const std::int64_t max_ring = static_cast<std::int64_t>(
      std::max({dims_[0], dims_[1], dims_[2]}));
  for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
    std::array<std::int64_t, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max<std::int64_t>(0, c[a] - ring);
      hi[a] = std::min<std::int64_t>(static_cast<std::int64_t>(dims_[a]) - 1, c[a] + ring);
    }
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
      for (std::int64_t y = lo[1]; y <= hi[1]; ++y) {
        for (std::int64_t x = lo[0]; x <= hi[0]; ++x) {
          const bool shell = std::abs(x - c[0]) == ring || std::abs(y - c[1]) == ring ||
                             std::abs(z - c[2]) == ring;
          if (!shell) continue;
          auto it = cells_.find(key(x, y, z));
          if (it == cells_.end()) continue;
          for (std::uint32_t k = it->second.begin; k < it->second.end; ++k) consider(sorted_ids_[k]);
        }
      }
    }
    if (best) {
      // Every cell not yet scanned lies outside the box of rings <= ring.
      double gap = std::numeric_limits<double>::infinity();
      for (int a = 0; a < 3; ++a) {
        const double box_lo = origin_[a] + static_cast<double>(c[a] - ring) * cell_;
        const double box_hi = origin_[a] + static_cast<double>(c[a] + ring + 1) * cell_;
        gap = std::min({gap, center[a] - box_lo, box_hi - center[a]});
      }
      if (gap >= 0.0 && gap * gap >= best_d2) break;
    }
  }
  if (best) best->second = std::sqrt(best_d2);
  return best;
}

NeighborIndex build_index(const PointCloud& cloud, double cell_size) {
  return NeighborIndex(cloud.positions, cell_size);
}

double bbox_diagonal(std::span<const Vec3> points) { return bounds(points).diagonal(); }

double min_dist_for_count(double surface_area, std::size_t count) {
  if (count == 0 || !(surface_area > 0.0)) throw DataError("need a positive area and count");
  // random sequential adsorption jams at ~0.547 coverage of disks of
  // diameter min_dist: N = 0.547 * A / (pi d^2 / 4)
  return std::sqrt(0.547 * 4.0 / std::numbers::pi * surface_area / static_cast<double>(count));
}

namespace {

/// Growable grid used while sampling: points are inserted one at a time.
class DynamicGrid {
 public:
  DynamicGrid(const Vec3& origin, double cell) : origin_(origin), cell_(cell) {}

  bool conflicts(const Vec3& p, double r2, std::span<const Vec3> pts) const {
    const auto c = cell_of(p);
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          auto it = cells_.find(pack(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == cells_.end()) continue;
          for (PointId id : it->second) {
            if ((pts[id] - p).squaredNorm() < r2) return true;
          }
        }
      }
    }
    return false;
  }

  void insert(const Vec3& p, PointId id) {
    const auto c = cell_of(p);
    cells_[pack(c[0], c[1], c[2])].push_back(id);
  }

 private:
  std::array<std::int64_t, 3> cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor((p[0] - origin_[0]) / cell_)),
            static_cast<std::int64_t>(std::floor((p[1] - origin_[1]) / cell_)),
            static_cast<std::int64_t>(std::floor((p[2] - origin_[2]) / cell_))};
  }
  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    constexpr std::int64_t bias = 1 << 20;
    return (static_cast<std::uint64_t>(x + bias) & 0x1FFFFF) |
           ((static_cast<std::uint64_t>(y + bias) & 0x1FFFFF) << 21) |
           ((static_cast<std::uint64_t>(z + bias) & 0x1FFFFF) << 42);
  }

  Vec3 origin_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<PointId>> cells_;
};

struct SurfacePoint {
  Vec3 position;
  Vec3 normal;
  PointId triangle;
};

class SurfaceSampler {
 public:
  explicit SurfaceSampler(const TriangleMesh& mesh) : mesh_(mesh) {
    cdf_.reserve(mesh.triangles.size());
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
      total += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                         .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]])
                         .norm();
      cdf_.push_back(total);
    }
    area_ = total;
  }

  double area() const { return area_; }

  template <typename Rng>
  SurfacePoint draw(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double pick = u(rng) * area_;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), pick);
    const auto tri = static_cast<PointId>(
        std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
    double s = u(rng);
    double t = u(rng);
    if (s + t > 1.0) {
      s = 1.0 - s;
      t = 1.0 - t;
    }
    const auto& f = mesh_.triangles[tri];
    const Vec3& a = mesh_.vertices[f[0]];
    const Vec3& b = mesh_.vertices[f[1]];
    const Vec3& c = mesh_.vertices[f[2]];
    SurfacePoint out{a + s * (b - a) + t * (c - a), Vec3::Zero(), tri};
    if (mesh_.normals) {
      const auto& n = *mesh_.normals;
      out.normal = (1.0 - s - t) * n[f[0]] + s * n[f[1]] + t * n[f[2]];
    }
    if (!(out.normal.norm() > 1e-12)) out.normal = (b - a).cross(c - a);
    out.normal.normalize();
    return out;
  }

 private:
  const TriangleMesh& mesh_;
  std::vector<double> cdf_;
  double area_ = 0.0;
};

}  // namespace

SurfaceSamples poisson_disk_sample_with_normals(const TriangleMesh& mesh, double min_dist,
                                                std::uint64_t seed) {
  if (mesh.empty() || mesh.vertices.empty()) throw DataError("cannot sample an empty mesh");
  mesh.validate();
  if (!(min_dist > 0.0)) throw DataError("min_dist must be positive");
  const SurfaceSampler sampler(mesh);
  if (!(sampler.area() > 0.0)) throw DataError("mesh has zero surface area");

  std::mt19937_64 rng(seed);
  const Aabb box = bounds(mesh.vertices);
  DynamicGrid grid(box.lo, min_dist);
  const double r2 = min_dist * min_dist;

  SurfaceSamples out;
  auto try_add = [&](const SurfacePoint& sp) {
    if (grid.conflicts(sp.position, r2, out.cloud.positions)) return false;
    grid.insert(sp.position, static_cast<PointId>(out.cloud.positions.size()));
    out.cloud.positions.push_back(sp.position);
    out.normals.push_back(sp.normal);
    out.triangle.push_back(sp.triangle);
    return true;
  };

  constexpr int kMaxFailures = 30;
  for (int failures = 0; failures < kMaxFailures;) {
    failures = try_add(sampler.draw(rng)) ? 0 : failures + 1;
  }

  // Coverage sweep: a pool with ~30 candidates per disk of radius min_dist
  // leaves a gap wider than 2 min_dist with probability ~exp(-30).
  const double disks = sampler.area() / (std::numbers::pi * r2);
  const auto pool = static_cast<std::size_t>(
      std::min(5.0e7, std::max(256.0, std::ceil(30.0 * disks))));
  for (std::size_t i = 0; i < pool; ++i) try_add(sampler.draw(rng));
  return out;
}

std::vector<PointId> poisson_subsample(std::span<const Vec3> points, double radius,
                                       std::uint64_t seed) {
  if (points.empty()) return {};
  if (!(radius > 0.0)) throw DataError("pooling radius must be positive");
  std::vector<PointId> order(points.size());
  std::iota(order.begin(), order.end(), PointId{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit index draw so the permutation does not
  // depend on the standard library's shuffle implementation.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  DynamicGrid grid(bounds(points).lo, radius);
  std::vector<Vec3> kept_pos;
  std::vector<PointId> kept;
  const double r2 = radius * radius;
  for (PointId id : order) {
    if (grid.conflicts(points[id], r2, kept_pos)) continue;
    grid.insert(points[id], static_cast<PointId>(kept_pos.size()));
    kept_pos.push_back(points[id]);
    kept.push_back(id);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

SurfaceSamples poisson_disk_sample_count(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  double md = min_dist_for_count(mesh.area(), count);
  SurfaceSamples s = poisson_disk_sample_with_normals(mesh, md, seed);
  // packing density varies with the shape; one correction step lands close
  md *= std::sqrt(static_cast<double>(s.cloud.size()) / static_cast<double>(count));
  return poisson_disk_sample_with_normals(mesh, md, seed);
}

}  // namespace tdn
