#pragma once

#include "tdnoise/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tdn {

enum class GeometryFormat { Off, PlyAscii, PlyBinaryLittleEndian, Xyz };

std::string_view to_string(GeometryFormat format);
/// Accepts "off", "ply-ascii", "ply-binary"/"ply", "xyz". Throws DataError.
GeometryFormat parse_format(std::string_view name);

struct GeometryFile {
  GeometryFormat format = GeometryFormat::Xyz;
  std::variant<TriangleMesh, PointCloud> payload;
  /// Header comments (PLY `comment` lines, `#` lines in XYZ/OFF).
  std::vector<std::string> comments;

  bool is_mesh() const { return std::holds_alternative<TriangleMesh>(payload); }
  const TriangleMesh& mesh() const { return std::get<TriangleMesh>(payload); }
  const PointCloud& cloud() const { return std::get<PointCloud>(payload); }
};

/// Parses a geometry file held in memory. The format is sniffed from the
/// content. Throws ParseError (with byte offset and line) on malformed input
/// and DataError on semantically invalid payloads.
GeometryFile parse_geometry(std::string_view bytes);

/// Reads and parses a file. Throws IoError when it cannot be read.
GeometryFile read_geometry(const std::filesystem::path& path);

/// Reads a file and returns its point payload. Meshes yield their vertices.
PointCloud read_pointcloud(const std::filesystem::path& path);
/// Reads a file that must contain a triangle mesh (OFF).
TriangleMesh read_mesh(const std::filesystem::path& path);

std::string serialize_pointcloud(const PointCloud& cloud, GeometryFormat format,
                                 std::span<const std::string> comments = {});
void write_pointcloud(const PointCloud& cloud, const std::filesystem::path& path,
                      GeometryFormat format, std::span<const std::string> comments = {});
void write_mesh_off(const TriangleMesh& mesh, const std::filesystem::path& path);

struct DirectionalLight {
  Vec3 direction;  ///< unit vector pointing towards the light
  Vec3 albedo;     ///< per-channel reflectance
};

/// Three seed-deterministic lights: directions uniform on the hemisphere
/// around the principal axis of the cloud, albedos uniform in [0.3, 1].
std::vector<DirectionalLight> random_lights(const PointCloud& cloud, std::uint64_t seed);

/// color_c = clamp(sum_k albedo_k,c * max(0, <n, l_k>), 0, 1).
/// Throws DataError when a normal is not unit length.
std::vector<Vec3> shade(std::span<const Vec3> normals, std::span<const DirectionalLight> lights);

PointCloud shade_lambertian(const PointCloud& cloud, std::span<const Vec3> normals,
                            std::uint64_t seed);

}  // namespace tdn
