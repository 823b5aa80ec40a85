#pragma once

// Brute-force geometry oracles shared by the eval tests and the acceptance
// binary: every triangle is visited, no acceleration structure.

#include "tdnoise/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace tdn::testing {

// Point-to-triangle distance by minimizing over a barycentric parametrization:
// interior projection if it lands inside, else the best of the three segments.
inline double seg_dist(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

inline double tri_dist_oracle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const Vec3 q = p - n.dot(p - a) / n.squaredNorm() * n;
  const double area = n.norm();
  const double u = (c - b).cross(q - b).dot(n) / (area * area);
  const double v = (a - c).cross(q - c).dot(n) / (area * area);
  const double w = 1.0 - u - v;
  if (u >= 0 && v >= 0 && w >= 0) return (p - q).norm();
  return std::min({seg_dist(p, a, b), seg_dist(p, b, c), seg_dist(p, c, a)});
}

inline double mesh_dist_oracle(const Vec3& p, const TriangleMesh& m) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : m.triangles) best = std::min(best, tri_dist_oracle(p, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]));
  return best;
}

inline double chamfer_oracle(const PointCloud& pred, const TriangleMesh& m, const PointCloud& clean) {
  double t1 = 0.0, t2 = 0.0;
  for (const Vec3& y : pred.positions) t1 += mesh_dist_oracle(y, m);
  for (const Vec3& x : clean.positions) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& y : pred.positions) best = std::min(best, (x - y).norm());
    t2 += best;
  }
  return t1 / static_cast<double>(pred.size()) + t2 / static_cast<double>(clean.size());
}

inline TriangleMesh random_soup(std::size_t triangles, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 0.1);
  TriangleMesh m;
  for (std::size_t t = 0; t < triangles; ++t) {
    const Vec3 c(u(rng), u(rng), u(rng));
    for (int k = 0; k < 3; ++k) m.vertices.push_back(c + Vec3(g(rng), g(rng), g(rng)));
    const auto b = static_cast<PointId>(3 * t);
    m.triangles.push_back({b, b + 1, b + 2});
  }
  return m;
}

inline PointCloud random_cloud(std::size_t n, double extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.positions.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

}  // namespace tdn::testing
