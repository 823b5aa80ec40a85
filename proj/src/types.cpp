#include "tdnoise/types.hpp"

#include "tdnoise/error.hpp"

#include <cmath>

namespace tdn {

void PointCloud::validate() const {
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite()) {
      throw DataError("point " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  if (!colors) return;
  if (colors->size() != positions.size()) {
    throw DataError("color count " + std::to_string(colors->size()) +
                    " does not match point count " + std::to_string(positions.size()));
  }
  for (std::size_t i = 0; i < colors->size(); ++i) {
    const Vec3& c = (*colors)[i];
    if (!c.allFinite() || (c.array() < 0.0).any() || (c.array() > 1.0).any()) {
      throw DataError("color of point " + std::to_string(i) + " outside [0,1]");
    }
  }
}

void TriangleMesh::validate() const {
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (!vertices[i].allFinite()) {
      throw DataError("vertex " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (PointId v : triangles[t]) {
      if (v >= vertices.size()) {
        throw DataError("triangle " + std::to_string(t) + " references vertex " +
                        std::to_string(v) + " of " + std::to_string(vertices.size()));
      }
    }
  }
  if (normals && normals->size() != vertices.size()) {
    throw DataError("normal count does not match vertex count");
  }
}

namespace {
double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}
}  // namespace

std::size_t TriangleMesh::remove_degenerate() {
  const std::size_t before = triangles.size();
  std::erase_if(triangles, [&](const std::array<PointId, 3>& t) {
    return !(triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) > 0.0);
  });
  return before - triangles.size();
}

double TriangleMesh::area() const {
  double total = 0.0;
  for (const auto& t : triangles) total += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
  return total;
}

std::vector<Vec3> compute_vertex_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> n(mesh.vertices.size(), Vec3::Zero());
  for (const auto& t : mesh.triangles) {
    // cross product length is twice the area, so this is area weighted
    const Vec3 face = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                          .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (PointId v : t) n[v] += face;
  }
  for (Vec3& v : n) {
    const double len = v.norm();
    v = len > 0.0 ? Vec3(v / len) : Vec3(0.0, 0.0, 1.0);
  }
  return n;
}

Aabb bounds(std::span<const Vec3> points) {
  Aabb box;
  for (const Vec3& p : points) box.extend(p);
  return box;
}

}  // namespace tdn
