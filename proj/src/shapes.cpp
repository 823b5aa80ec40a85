#include "tdnoise/shapes.hpp"

#include "tdnoise/error.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>

namespace tdn::shapes {

namespace {
using Tri = std::array<PointId, 3>;

PointId add(TriangleMesh& m, const Vec3& v) {
  m.vertices.push_back(v);
  return static_cast<PointId>(m.vertices.size() - 1);
}

void quad(TriangleMesh& m, PointId a, PointId b, PointId c, PointId d) {
  m.triangles.push_back({a, b, c});
  m.triangles.push_back({a, c, d});
}

void finish(TriangleMesh& m) { m.normals = compute_vertex_normals(m); }
}  // namespace

TriangleMesh plane(double size, int cells) {
  TriangleMesh m;
  const double h = size / cells;
  for (int j = 0; j <= cells; ++j) {
    for (int i = 0; i <= cells; ++i) add(m, Vec3(i * h, j * h, 0.0));
  }
  const auto id = [&](int i, int j) { return static_cast<PointId>(j * (cells + 1) + i); };
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) quad(m, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
  }
  finish(m);
  return m;
}

TriangleMesh cube(double size) {
  // Each face gets its own vertices so vertex normals stay face normals.
  TriangleMesh m;
  const double s = size;
  const std::array<std::array<Vec3, 4>, 6> faces{{
      {Vec3(0, 0, 0), Vec3(0, s, 0), Vec3(s, s, 0), Vec3(s, 0, 0)},
      {Vec3(0, 0, s), Vec3(s, 0, s), Vec3(s, s, s), Vec3(0, s, s)},
      {Vec3(0, 0, 0), Vec3(s, 0, 0), Vec3(s, 0, s), Vec3(0, 0, s)},
      {Vec3(0, s, 0), Vec3(0, s, s), Vec3(s, s, s), Vec3(s, s, 0)},
      {Vec3(0, 0, 0), Vec3(0, 0, s), Vec3(0, s, s), Vec3(0, s, 0)},
      {Vec3(s, 0, 0), Vec3(s, s, 0), Vec3(s, s, s), Vec3(s, 0, s)},
  }};
  for (const auto& f : faces) {
    const PointId a = add(m, f[0]), b = add(m, f[1]), c = add(m, f[2]), d = add(m, f[3]);
    quad(m, a, b, c, d);
  }
  finish(m);
  return m;
}

TriangleMesh sphere(double radius, int subdivisions) {
  TriangleMesh m;
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::array<Vec3, 12> base{Vec3(-1, t, 0), Vec3(1, t, 0),   Vec3(-1, -t, 0), Vec3(1, -t, 0),
                                  Vec3(0, -1, t), Vec3(0, 1, t),   Vec3(0, -1, -t), Vec3(0, 1, -t),
                                  Vec3(t, 0, -1), Vec3(t, 0, 1),   Vec3(-t, 0, -1), Vec3(-t, 0, 1)};
  for (const Vec3& v : base) add(m, v.normalized());
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<PointId, PointId>, PointId> mid;
    auto midpoint = [&](PointId a, PointId b) {
      const auto k = std::minmax(a, b);
      auto it = mid.find(k);
      if (it != mid.end()) return it->second;
      const PointId id = add(m, (m.vertices[a] + m.vertices[b]).normalized());
      mid.emplace(k, id);
      return id;
    };
    std::vector<Tri> next;
    next.reserve(m.triangles.size() * 4);
    for (const Tri& f : m.triangles) {
      const PointId ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.triangles = std::move(next);
  }
  for (Vec3& v : m.vertices) v *= radius;
  m.normals = std::vector<Vec3>();
  for (const Vec3& v : m.vertices) m.normals->push_back(v.normalized());
  return m;
}

TriangleMesh cylinder(double radius, double height, int segments) {
  TriangleMesh m;
  std::vector<PointId> bottom, top;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    bottom.push_back(add(m, Vec3(radius * std::cos(a), radius * std::sin(a), 0.0)));
    top.push_back(add(m, Vec3(radius * std::cos(a), radius * std::sin(a), height)));
  }
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    quad(m, bottom[i], bottom[j], top[j], top[i]);
  }
  // caps use separate vertices so the side normals stay radial
  const PointId cb = add(m, Vec3(0, 0, 0));
  const PointId ct = add(m, Vec3(0, 0, height));
  std::vector<PointId> cap_b, cap_t;
  for (int i = 0; i < segments; ++i) {
    cap_b.push_back(add(m, m.vertices[bottom[i]]));
    cap_t.push_back(add(m, m.vertices[top[i]]));
  }
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.triangles.push_back({cb, cap_b[j], cap_b[i]});
    m.triangles.push_back({ct, cap_t[i], cap_t[j]});
  }
  finish(m);
  return m;
}

TriangleMesh torus(double major, double minor, int major_segments, int minor_segments) {
  TriangleMesh m;
  for (int i = 0; i < major_segments; ++i) {
    const double u = 2.0 * std::numbers::pi * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const double v = 2.0 * std::numbers::pi * j / minor_segments;
      const double rr = major + minor * std::cos(v);
      add(m, Vec3(rr * std::cos(u), rr * std::sin(u), minor * std::sin(v)));
    }
  }
  const auto id = [&](int i, int j) {
    return static_cast<PointId>((i % major_segments) * minor_segments + (j % minor_segments));
  };
  for (int i = 0; i < major_segments; ++i) {
    for (int j = 0; j < minor_segments; ++j) quad(m, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
  }
  finish(m);
  return m;
}

TriangleMesh cone(double radius, double height, int segments) {
  TriangleMesh m;
  std::vector<PointId> rim, cap;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    const Vec3 p(radius * std::cos(a), radius * std::sin(a), 0.0);
    rim.push_back(add(m, p));
    cap.push_back(add(m, p));
  }
  const PointId apex = add(m, Vec3(0, 0, height));
  const PointId base = add(m, Vec3(0, 0, 0));
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.triangles.push_back({rim[i], rim[j], apex});
    m.triangles.push_back({base, cap[j], cap[i]});
  }
  finish(m);
  return m;
}

TriangleMesh by_name(const std::string& name) {
  if (name == "plane") return plane(1.0, 1);
  if (name == "cube") return cube();
  if (name == "sphere") return sphere(0.5, 3);
  if (name == "cylinder") return cylinder();
  if (name == "torus") return torus();
  if (name == "cone") return cone();
  throw DataError("unknown shape '" + name + "'");
}

std::vector<std::string> mini_dataset_names() { return {"cube", "sphere", "cylinder", "torus", "cone"}; }

TriangleMesh circle_ribbon(double radius, int segments, double width) {
  TriangleMesh m;
  std::vector<PointId> lo, hi;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    const Vec3 p(radius * std::cos(a), radius * std::sin(a), 0.0);
    lo.push_back(add(m, p - Vec3(0, 0, width / 2)));
    hi.push_back(add(m, p + Vec3(0, 0, width / 2)));
  }
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    quad(m, lo[i], lo[j], hi[j], hi[i]);
  }
  finish(m);
  return m;
}

PointCloud circle_points(double radius, std::size_t count, std::uint64_t seed) {
  PointCloud c;
  c.id = "circle";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  for (std::size_t i = 0; i < count; ++i) {
    const double a = 2.0 * std::numbers::pi * (static_cast<double>(i) + jitter(rng)) /
                     static_cast<double>(count);
    c.positions.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return c;
}

}  // namespace tdn::shapes
