#include "doctest.h"

#include "tdnoise/error.hpp"
#include "tdnoise/meshio.hpp"
#include "tdnoise/shapes.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace tdn;
namespace fs = std::filesystem;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, bool colors) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.positions.emplace_back(g(rng), g(rng), g(rng));
  if (colors) {
    c.colors.emplace();
    // bytes survive the uchar encoding exactly
    for (std::size_t i = 0; i < n; ++i) {
      c.colors->emplace_back(std::round(u(rng) * 255) / 255, std::round(u(rng) * 255) / 255,
                             std::round(u(rng) * 255) / 255);
    }
  }
  return c;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tdnoise_meshio_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("minimal ascii OFF") {
  const auto f = parse_geometry("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2");
  REQUIRE(f.is_mesh());
  CHECK(f.format == GeometryFormat::Off);
  CHECK(f.mesh().vertices.size() == 3);
  CHECK(f.mesh().triangles.size() == 1);
}

TEST_CASE("OFF polygons are fan triangulated and degenerates dropped") {
  const auto f = parse_geometry(
      "OFF # a comment\n5 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n2 2 0\n4 0 1 2 3\n3 0 0 1\n");
  CHECK(f.mesh().triangles.size() == 2);
  CHECK(f.comments.size() == 1);
}

TEST_CASE("smallest ascii PLY") {
  const auto f = parse_geometry(
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
      "property float z\nend_header\n1 2 3\n");
  REQUIRE_FALSE(f.is_mesh());
  CHECK(f.cloud().size() == 1);
  CHECK_FALSE(f.cloud().has_colors());
  CHECK(f.cloud().positions[0] == Vec3(1, 2, 3));
}

TEST_CASE("PLY uchar colors map to [0,1]") {
  const auto f = parse_geometry(
      "ply\nformat ascii 1.0\ncomment hello\nelement vertex 1\nproperty float x\nproperty float y\n"
      "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 255 0 0\n3 0 0 0\n");
  REQUIRE(f.cloud().has_colors());
  CHECK((*f.cloud().colors)[0] == Vec3(1, 0, 0));
  CHECK(f.comments == std::vector<std::string>{"hello"});
}

TEST_CASE("parse errors carry positions") {
  SUBCASE("out of range OFF index names its line") {
    try {
      parse_geometry("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 7);
    }
  }
  CHECK_THROWS_AS(parse_geometry(""), ParseError);
  CHECK_THROWS_AS(parse_geometry("OFF\n3 1 0\n0 0 0\n"), ParseError);
  CHECK_THROWS_AS(parse_geometry("ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_geometry("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n"
                                 "property float y\nproperty float z\nend_header\n1 2 3\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_geometry("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_geometry("1 2 nan\n"), ParseError);
  CHECK_THROWS_AS(parse_geometry("1 2 3\n4 5\n"), ParseError);
  CHECK_THROWS_AS(parse_geometry("1 2 3 0.5 0.5 2\n"), ParseError);
}

TEST_CASE("binary PLY round trip is bit exact") {
  const auto cloud = random_cloud(1000, 3, true);
  const auto path = temp_path("rt.ply");
  write_pointcloud(cloud, path, GeometryFormat::PlyBinaryLittleEndian);
  const auto back = read_geometry(path);
  CHECK(back.format == GeometryFormat::PlyBinaryLittleEndian);
  REQUIRE(back.cloud().size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(back.cloud().positions[i] == cloud.positions[i]);
    CHECK(((*back.cloud().colors)[i] - (*cloud.colors)[i]).norm() < 1e-12);
  }
}

TEST_CASE("ascii PLY header declares uchar colors") {
  const auto cloud = random_cloud(4, 1, true);
  const std::string text = serialize_pointcloud(cloud, GeometryFormat::PlyAscii);
  CHECK(text.find("property uchar red\nproperty uchar green\nproperty uchar blue\n") != std::string::npos);
  CHECK(text.rfind("ply\nformat ascii 1.0\n", 0) == 0);
}

TEST_CASE("XYZ has one line per point and no header") {
  PointCloud c;
  c.positions = {Vec3(1, 2, 3), Vec3(0.5, -1, 2.25)};
  const std::string text = serialize_pointcloud(c, GeometryFormat::Xyz);
  CHECK(text == "1 2 3\n0.5 -1 2.25\n");
}

TEST_CASE("write-read-write is idempotent for every point format") {
  for (const auto fmt : {GeometryFormat::PlyAscii, GeometryFormat::PlyBinaryLittleEndian, GeometryFormat::Xyz}) {
    for (const bool colors : {false, true}) {
      const auto cloud = random_cloud(50, 7, colors);
      const std::string once = serialize_pointcloud(cloud, fmt, std::vector<std::string>{"meta"});
      const auto parsed = parse_geometry(once);
      const std::string twice = serialize_pointcloud(parsed.cloud(), fmt, parsed.comments);
      CHECK(once == twice);
      // ascii output uses shortest round-trip formatting, so positions are exact
      for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(parsed.cloud().positions[i] == cloud.positions[i]);
    }
  }
}

TEST_CASE("OFF mesh writer round trip") {
  const auto mesh = shapes::torus();
  const auto path = temp_path("torus.off");
  write_mesh_off(mesh, path);
  const auto back = read_mesh(path);
  CHECK(back.vertices == mesh.vertices);
  CHECK(back.triangles == mesh.triangles);
}

TEST_CASE("missing file is an IoError naming the path") {
  try {
    read_geometry("/nonexistent/dir/file.ply");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/file.ply") != std::string::npos);
  }
}

TEST_CASE("parser survives mutated input") {
  const std::vector<std::string> seeds{
      serialize_pointcloud(random_cloud(20, 1, true), GeometryFormat::PlyAscii),
      serialize_pointcloud(random_cloud(20, 2, true), GeometryFormat::PlyBinaryLittleEndian),
      "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n",
  };
  std::mt19937_64 rng(5);
  std::size_t structured = 0;
  for (int i = 0; i < 600; ++i) {
    std::string s = seeds[i % seeds.size()];
    const int edits = 1 + static_cast<int>(rng() % 8);
    for (int e = 0; e < edits && !s.empty(); ++e) {
      const std::size_t pos = rng() % s.size();
      switch (rng() % 4) {
        case 0: s[pos] = static_cast<char>(rng()); break;
        case 1: s.erase(pos, 1 + rng() % 16); break;
        case 2: s.insert(pos, std::to_string(rng())); break;
        default: s.resize(pos); break;
      }
    }
    try {
      parse_geometry(s);
    } catch (const Error&) {
      ++structured;
    }
  }
  CHECK(structured > 0);
}

TEST_CASE("Lambertian shading") {
  const std::vector<Vec3> up{Vec3(0, 0, 1)};
  const std::vector<DirectionalLight> white{{Vec3(0, 0, 1), Vec3(1, 1, 1)}};
  CHECK(shade(up, white)[0] == Vec3(1, 1, 1));

  const std::vector<DirectionalLight> grazing{{Vec3(1, 0, 0), Vec3(1, 1, 1)},
                                              {Vec3(0, 1, 0), Vec3(1, 1, 1)},
                                              {Vec3(0, -1, 0), Vec3(0.5, 0.5, 0.5)}};
  CHECK(shade(up, grazing)[0] == Vec3(0, 0, 0));

  const std::vector<Vec3> bad{Vec3(0, 0, 2)};
  CHECK_THROWS_AS(shade(bad, white), DataError);
}

TEST_CASE("shade_lambertian is deterministic and in range") {
  const auto mesh = shapes::sphere(1.0, 2);
  PointCloud cloud;
  cloud.positions = mesh.vertices;
  const auto a = shade_lambertian(cloud, *mesh.normals, 9);
  const auto b = shade_lambertian(cloud, *mesh.normals, 9);
  REQUIRE(a.has_colors());
  CHECK(*a.colors == *b.colors);
  for (const Vec3& c : *a.colors) {
    CHECK((c.array() >= 0.0).all());
    CHECK((c.array() <= 1.0).all());
  }
  const auto lights = random_lights(cloud, 9);
  REQUIRE(lights.size() == 3);
  for (const auto& l : lights) {
    CHECK(std::abs(l.direction.norm() - 1.0) < 1e-12);
    CHECK((l.albedo.array() >= 0.3).all());
    CHECK((l.albedo.array() <= 1.0).all());
  }
}
