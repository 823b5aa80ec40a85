#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tdn {

using Vec3 = Eigen::Vector3d;
using PointId = std::uint32_t;

/// XYZ positions with optional per-point RGB appearance in [0,1].
struct PointCloud {
  std::vector<Vec3> positions;
  std::optional<std::vector<Vec3>> colors;
  std::string id;

  std::size_t size() const noexcept { return positions.size(); }
  bool empty() const noexcept { return positions.empty(); }
  bool has_colors() const noexcept { return colors.has_value(); }

  /// Throws DataError when coordinates are non-finite or colors are
  /// malformed.
  void validate() const;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<PointId, 3>> triangles;
  std::optional<std::vector<Vec3>> normals;

  bool empty() const noexcept { return triangles.empty(); }

  /// Checks index bounds and finiteness. Throws DataError.
  void validate() const;

  /// Drops zero-area triangles. Returns the number removed.
  std::size_t remove_degenerate();

  double area() const;
};

/// Area-weighted unit vertex normals.
std::vector<Vec3> compute_vertex_normals(const TriangleMesh& mesh);

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  bool valid() const { return (lo.array() <= hi.array()).all(); }
  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return valid() ? extent().norm() : 0.0; }
};

Aabb bounds(std::span<const Vec3> points);

}  // namespace tdn
