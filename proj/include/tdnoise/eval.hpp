#pragma once

#include "tdnoise/filters.hpp"
#include "tdnoise/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tdn {

/// Closest point of triangle abc to p (vertex, edge and face regions).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Uniform grid over triangle bounding boxes for nearest-surface queries.
class TriangleGrid {
 public:
  explicit TriangleGrid(const TriangleMesh& mesh);

  /// Exact distance from p to the closest triangle.
  double distance(const Vec3& p) const;
  const TriangleMesh& mesh() const { return *mesh_; }

 private:
  const TriangleMesh* mesh_;
  Vec3 lo_ = Vec3::Zero();
  double cell_ = 1.0;
  std::array<std::int64_t, 3> dims_{1, 1, 1};
  std::vector<std::uint32_t> offsets_;
  std::vector<PointId> tris_;

  std::int64_t flat(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return (z * dims_[1] + y) * dims_[0] + x;
  }
};

double point_to_mesh_distance(const Vec3& p, const TriangleMesh& mesh, const TriangleGrid& grid);

/// Counts of distance / diagonal over `bins` equal bins on [0, max_frac],
/// plus one overflow bin at the end.
struct Histogram {
  std::vector<double> edges;          ///< bins + 1 edges, fractions of the diagonal
  std::vector<std::size_t> counts;    ///< bins + 1 entries, last is overflow
  std::size_t total() const;
};

Histogram error_histogram(std::span<const double> distances, double diagonal, int bins, double max_frac = 0.02);

struct EvalReport {
  double chamfer = 0.0;
  double term1 = 0.0;  ///< prediction -> surface mean
  double term2 = 0.0;  ///< clean -> prediction mean
  double diagonal = 0.0;  ///< clean bbox diagonal
  Histogram histogram;
  std::vector<double> distances;  ///< per predicted point, to the surface

  double percent(double v) const { return diagonal > 0.0 ? 100.0 * v / diagonal : 0.0; }
  std::string to_json() const;
  /// Per-point distances as CSV (index,distance,fraction_of_diagonal).
  std::string distances_csv() const;
  std::string histogram_csv() const;
};

/// d = mean_y min_s |y - s| + mean_x min_y |y - x|. Term 1 is measured
/// against the mesh surface.
EvalReport chamfer(const PointCloud& pred, const TriangleMesh& surface, const PointCloud& clean, int bins = 20);
/// Mesh-less fallback: term 1 is measured against the clean samples.
EvalReport chamfer_sampled(const PointCloud& pred, const PointCloud& clean, int bins = 20);

/// Blue at zero distance to yellow at 2% of the diagonal, clamped.
Vec3 error_color(double distance, double diagonal);
PointCloud error_colorize(const PointCloud& cloud, const TriangleMesh& mesh);
PointCloud error_colorize(const PointCloud& cloud, std::span<const double> distances, double diagonal);

struct ModeResult {
  std::vector<Vec3> modes;
  std::vector<std::size_t> seed_index;  ///< which seed each mode came from
  std::size_t non_converged = 0;
};

/// Gaussian mean shift on the point density from each seed until the step
/// drops below 1e-6 of the diagonal or 500 iterations pass. Seeds that do
/// not converge (or start with no support) are excluded and counted.
ModeResult mode_manifold(const PointCloud& noisy, double bandwidth, std::span<const Vec3> seeds);

/// Radius of the density maximum of a circle of radius R blurred by an
/// isotropic Gaussian of std sigma: argmax_r I0(r R / s^2) exp(-(r^2 + R^2) / (2 s^2)).
double circle_mode_radius(double R, double sigma);

/// Mean distance from each point to the nearest of `targets`.
double mean_nearest_distance(std::span<const Vec3> points, std::span<const Vec3> targets);

struct EvalCase {
  PointCloud noisy;
  TriangleMesh mesh;
  PointCloud clean;
};

enum class FilterKind { Mean, Bilateral };

struct FilterTuning {
  FilterKind kind = FilterKind::Mean;
  FilterConfig config;  ///< radius and sigmas in fractions of each cloud's diagonal
  double chamfer = 0.0; ///< mean over cases
};

/// Applies a filter with diagonal-relative parameters to one cloud.
PointCloud apply_filter(const PointCloud& cloud, FilterKind kind, const FilterConfig& relative);

/// Grid search minimizing mean Chamfer over the cases.
FilterTuning tune_filter(const std::vector<EvalCase>& cases, FilterKind kind);

}  // namespace tdn
