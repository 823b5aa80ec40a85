#pragma once

#include "tdnoise/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Procedural meshes and 2D toy sets used by the toy experiments, the
// acceptance suite and the `toy` CLI subcommand.
namespace tdn::shapes {

/// Axis-aligned square [0,size]^2 in the z=0 plane, two triangles per cell.
TriangleMesh plane(double size = 1.0, int cells = 1);
/// Unit cube [0,1]^3 with outward faces.
TriangleMesh cube(double size = 1.0);
/// Icosphere of the given radius centred at the origin.
TriangleMesh sphere(double radius = 1.0, int subdivisions = 3);
/// Closed cylinder along z.
TriangleMesh cylinder(double radius = 0.5, double height = 1.0, int segments = 48);
TriangleMesh torus(double major = 0.7, double minor = 0.25, int major_segments = 48,
                   int minor_segments = 24);
/// Closed cone along z with apex at the top.
TriangleMesh cone(double radius = 0.5, double height = 1.0, int segments = 48);

/// Named shape lookup: plane, cube, sphere, cylinder, torus, cone.
TriangleMesh by_name(const std::string& name);
std::vector<std::string> mini_dataset_names();

/// Thin ribbon mesh following a closed circle of radius R in the z=0 plane.
/// The ribbon has zero height: it is a polyline embedded as degenerate-free
/// triangles of width `width` along z, which lets the 3D Chamfer machinery
/// measure distance to the circle.
TriangleMesh circle_ribbon(double radius, int segments, double width);

/// `count` points evenly spaced (with seeded phase jitter) on a circle of
/// radius R in the z=0 plane.
PointCloud circle_points(double radius, std::size_t count, std::uint64_t seed);

}  // namespace tdn::shapes
