#include "tdnoise/eval.hpp"

#include "tdnoise/cloud.hpp"
#include "tdnoise/error.hpp"
#include "tdnoise/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace tdn {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

TriangleGrid::TriangleGrid(const TriangleMesh& mesh) : mesh_(&mesh) {
  if (mesh.empty()) throw DataError("surface mesh has no triangles");
  const Aabb box = bounds(mesh.vertices);
  lo_ = box.lo;
  const Vec3 ext = box.extent();
  const double maxext = ext.maxCoeff();
  const auto per_axis = std::clamp<std::int64_t>(
      static_cast<std::int64_t>(std::ceil(std::cbrt(4.0 * static_cast<double>(mesh.triangles.size())))), 1, 128);
  cell_ = maxext > 0.0 ? maxext / static_cast<double>(per_axis) : 1.0;
  for (int a = 0; a < 3; ++a) {
    dims_[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ext[a] / cell_)));
  }
  const std::int64_t cells = dims_[0] * dims_[1] * dims_[2];
  auto cell_range = [&](const Vec3& lo, const Vec3& hi, std::array<std::int64_t, 3>& a, std::array<std::int64_t, 3>& b) {
    for (int k = 0; k < 3; ++k) {
      a[k] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((lo[k] - lo_[k]) / cell_)), 0, dims_[k] - 1);
      b[k] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((hi[k] - lo_[k]) / cell_)), 0, dims_[k] - 1);
    }
  };
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(cells) + 1, 0);
  auto for_cells = [&](std::size_t t, auto&& fn) {
    const auto& tri = mesh.triangles[t];
    const Vec3& v0 = mesh.vertices[tri[0]];
    const Vec3& v1 = mesh.vertices[tri[1]];
    const Vec3& v2 = mesh.vertices[tri[2]];
    std::array<std::int64_t, 3> a{}, b{};
    cell_range(v0.cwiseMin(v1).cwiseMin(v2), v0.cwiseMax(v1).cwiseMax(v2), a, b);
    for (std::int64_t z = a[2]; z <= b[2]; ++z) {
      for (std::int64_t y = a[1]; y <= b[1]; ++y) {
        for (std::int64_t x = a[0]; x <= b[0]; ++x) fn(flat(x, y, z));
      }
    }
  };
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for_cells(t, [&](std::int64_t c) { ++counts[static_cast<std::size_t>(c) + 1]; });
  }
  for (std::size_t c = 0; c < static_cast<std::size_t>(cells); ++c) counts[c + 1] += counts[c];
  offsets_ = counts;
  tris_.resize(offsets_.back());
  std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for_cells(t, [&](std::int64_t c) { tris_[fill[static_cast<std::size_t>(c)]++] = static_cast<PointId>(t); });
  }
}

double TriangleGrid::distance(const Vec3& p) const {
  const TriangleMesh& m = *mesh_;
  std::array<std::int64_t, 3> c{};
  for (int k = 0; k < 3; ++k) {
    c[k] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((p[k] - lo_[k]) / cell_)), 0, dims_[k] - 1);
  }
  const std::int64_t max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  double best2 = std::numeric_limits<double>::infinity();
  auto visit_cell = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    const std::size_t f = static_cast<std::size_t>(flat(x, y, z));
    for (std::uint32_t k = offsets_[f]; k < offsets_[f + 1]; ++k) {
      const auto& t = m.triangles[tris_[k]];
      const Vec3 q = closest_point_on_triangle(p, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
      best2 = std::min(best2, (q - p).squaredNorm());
    }
  };
  for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
    // every cell of this ring is at least (ring - 1) cells away from p's
    // (clamped) cell, and clamping onto the box never increases distances
    if (ring > 0 && std::isfinite(best2)) {
      const double gap = static_cast<double>(ring - 1) * cell_;
      if (gap * gap > best2) break;
    }
    const std::int64_t z0 = std::max<std::int64_t>(0, c[2] - ring), z1 = std::min(dims_[2] - 1, c[2] + ring);
    const std::int64_t y0 = std::max<std::int64_t>(0, c[1] - ring), y1 = std::min(dims_[1] - 1, c[1] + ring);
    const std::int64_t x0 = std::max<std::int64_t>(0, c[0] - ring), x1 = std::min(dims_[0] - 1, c[0] + ring);
    for (std::int64_t z = z0; z <= z1; ++z) {
      for (std::int64_t y = y0; y <= y1; ++y) {
        const bool edge_zy = std::abs(z - c[2]) == ring || std::abs(y - c[1]) == ring;
        if (edge_zy) {
          for (std::int64_t x = x0; x <= x1; ++x) visit_cell(x, y, z);
        } else {
          if (c[0] - ring >= 0) visit_cell(c[0] - ring, y, z);
          if (ring > 0 && c[0] + ring < dims_[0]) visit_cell(c[0] + ring, y, z);
        }
      }
    }
  }
  return std::sqrt(best2);
}

double point_to_mesh_distance(const Vec3& p, const TriangleMesh& mesh, const TriangleGrid& grid) {
  if (&grid.mesh() != &mesh) throw InvariantError("triangle grid was built for a different mesh");
  return grid.distance(p);
}

std::size_t Histogram::total() const {
  std::size_t s = 0;
  for (std::size_t c : counts) s += c;
  return s;
}

Histogram error_histogram(std::span<const double> distances, double diagonal, int bins, double max_frac) {
  if (bins < 1) throw DataError("histogram needs at least one bin");
  if (!(diagonal > 0.0)) throw DataError("histogram diagonal must be > 0");
  if (!(max_frac > 0.0)) throw DataError("histogram range must be > 0");
  Histogram h;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(max_frac * b / bins);
  h.counts.assign(static_cast<std::size_t>(bins) + 1, 0);
  for (double d : distances) {
    const double f = d / diagonal;
    std::size_t b;
    if (!(f < max_frac)) {
      b = static_cast<std::size_t>(bins);
    } else {
      b = std::min(static_cast<std::size_t>(bins - 1), static_cast<std::size_t>(std::max(0.0, f / max_frac * bins)));
    }
    ++h.counts[b];
  }
  return h;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["chamfer"] = chamfer;
  j["term1"] = term1;
  j["term2"] = term2;
  j["diagonal"] = diagonal;
  j["chamfer_percent_of_diagonal"] = percent(chamfer);
  j["term1_percent_of_diagonal"] = percent(term1);
  j["term2_percent_of_diagonal"] = percent(term2);
  j["points"] = distances.size();
  j["histogram"]["edges_fraction_of_diagonal"] = histogram.edges;
  j["histogram"]["counts"] = histogram.counts;
  return j.dump(2) + "\n";
}

std::string EvalReport::distances_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "index,distance,fraction_of_diagonal\n";
  for (std::size_t i = 0; i < distances.size(); ++i) {
    os << i << ',' << distances[i] << ',' << (diagonal > 0.0 ? distances[i] / diagonal : 0.0) << '\n';
  }
  return os.str();
}

std::string EvalReport::histogram_csv() const {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < histogram.counts.size(); ++b) {
    os << histogram.edges[std::min(b, histogram.edges.size() - 1)] << ',';
    if (b + 1 < histogram.edges.size()) {
      os << histogram.edges[b + 1];
    } else {
      os << "inf";
    }
    os << ',' << histogram.counts[b] << '\n';
  }
  return os.str();
}

double mean_nearest_distance(std::span<const Vec3> points, std::span<const Vec3> targets) {
  if (points.empty()) return 0.0;
  if (targets.empty()) throw DataError("nearest-distance target set is empty");
  const double cell = std::max(bbox_diagonal(targets) / std::sqrt(static_cast<double>(targets.size())), 1e-12);
  const NeighborIndex index(targets, cell);
  std::vector<double> d(points.size());
  parallel_for(points.size(), [&](std::size_t i) { d[i] = index.nearest(points[i])->second; });
  double s = 0.0;
  for (double v : d) s += v;
  return s / static_cast<double>(d.size());
}

namespace {

void check_inputs(const PointCloud& pred, const PointCloud& clean) {
  if (pred.empty()) throw DataError("prediction cloud is empty");
  if (clean.empty()) throw DataError("clean cloud is empty");
}

EvalReport finish_report(std::vector<double> d1, const PointCloud& pred, const PointCloud& clean, int bins) {
  EvalReport r;
  r.diagonal = bbox_diagonal(clean);
  double s = 0.0;
  for (double v : d1) s += v;
  r.term1 = s / static_cast<double>(d1.size());
  r.term2 = mean_nearest_distance(clean.positions, pred.positions);
  r.chamfer = r.term1 + r.term2;
  r.histogram = error_histogram(d1, r.diagonal > 0.0 ? r.diagonal : 1.0, bins);
  r.distances = std::move(d1);
  return r;
}

}  // namespace

EvalReport chamfer(const PointCloud& pred, const TriangleMesh& surface, const PointCloud& clean, int bins) {
  check_inputs(pred, clean);
  const TriangleGrid grid(surface);
  std::vector<double> d1(pred.size());
  parallel_for(pred.size(), [&](std::size_t i) { d1[i] = grid.distance(pred.positions[i]); }, 64);
  return finish_report(std::move(d1), pred, clean, bins);
}

EvalReport chamfer_sampled(const PointCloud& pred, const PointCloud& clean, int bins) {
  check_inputs(pred, clean);
  const double cell = std::max(bbox_diagonal(clean) / std::sqrt(static_cast<double>(clean.size())), 1e-12);
  const NeighborIndex index(clean.positions, cell);
  std::vector<double> d1(pred.size());
  parallel_for(pred.size(), [&](std::size_t i) { d1[i] = index.nearest(pred.positions[i])->second; });
  return finish_report(std::move(d1), pred, clean, bins);
}

Vec3 error_color(double distance, double diagonal) {
  const double t = diagonal > 0.0 ? std::clamp(distance / (0.02 * diagonal), 0.0, 1.0) : 0.0;
  return Vec3(t, t, 1.0 - t);
}

PointCloud error_colorize(const PointCloud& cloud, std::span<const double> distances, double diagonal) {
  if (distances.size() != cloud.size()) throw DataError("one distance per point required");
  PointCloud out = cloud;
  out.colors.emplace(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) (*out.colors)[i] = error_color(distances[i], diagonal);
  return out;
}

PointCloud error_colorize(const PointCloud& cloud, const TriangleMesh& mesh) {
  if (cloud.empty()) throw DataError("cloud to colorize is empty");
  const TriangleGrid grid(mesh);
  std::vector<double> d(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) { d[i] = grid.distance(cloud.positions[i]); }, 64);
  return error_colorize(cloud, d, bounds(mesh.vertices).diagonal());
}

ModeResult mode_manifold(const PointCloud& noisy, double bandwidth, std::span<const Vec3> seeds) {
  if (!(bandwidth > 0.0)) throw DataError("mean-shift bandwidth must be > 0");
  ModeResult r;
  if (noisy.empty()) {
    r.non_converged = seeds.size();
    return r;
  }
  const double support = 5.0 * bandwidth;
  const double tol = 1e-6 * bbox_diagonal(noisy);
  const NeighborIndex index(noisy.positions, support);
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  std::vector<std::optional<Vec3>> found(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t s) {
    Vec3 x = seeds[s];
    for (int it = 0; it < 500; ++it) {
      Vec3 acc = Vec3::Zero();
      double wsum = 0.0;
      index.for_each_within(x, support, [&](PointId j, double d2) {
        const double w = std::exp(-d2 * inv);
        acc += w * noisy.positions[j];
        wsum += w;
      });
      if (!(wsum > 0.0)) return;
      const Vec3 next = acc / wsum;
      const double step = (next - x).norm();
      x = next;
      if (step < tol) {
        found[s] = x;
        return;
      }
    }
  }, 16);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (found[s]) {
      r.modes.push_back(*found[s]);
      r.seed_index.push_back(s);
    } else {
      ++r.non_converged;
    }
  }
  return r;
}

namespace {

double log_i0(double x) {
  x = std::abs(x);
  if (x < 50.0) return std::log(std::cyl_bessel_i(0.0, x));
  // large-argument expansion; relative error far below 1e-10 here
  const double inv = 1.0 / x;
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) +
         std::log1p(inv / 8.0 + 9.0 * inv * inv / 128.0 + 225.0 * inv * inv * inv / 3072.0);
}

}  // namespace

double circle_mode_radius(double R, double sigma) {
  if (!(R > 0.0) || !(sigma > 0.0)) throw DataError("circle radius and sigma must be > 0");
  const double s2 = sigma * sigma;
  auto f = [&](double r) { return log_i0(r * R / s2) - (r * r + R * R) / (2.0 * s2); };
  const double hi = R + 6.0 * sigma;
  const int n = 4000;
  int best = 0;
  double fbest = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double v = f(hi * i / n);
    if (v > fbest) {
      fbest = v;
      best = i;
    }
  }
  double a = hi * std::max(0, best - 1) / n, b = hi * std::min(n, best + 1) / n;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && b - a > 1e-14 * hi; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (f(c) > f(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  return 0.5 * (a + b);
}

PointCloud apply_filter(const PointCloud& cloud, FilterKind kind, const FilterConfig& rel) {
  const double diag = bbox_diagonal(cloud);
  const double scale = diag > 0.0 ? diag : 1.0;
  FilterConfig abs = rel;
  abs.radius *= scale;
  abs.sigma_d *= scale;
  abs.sigma_n *= scale;
  if (kind == FilterKind::Mean) {
    PointCloud out = cloud;
    for (int i = 0; i < abs.iterations; ++i) out = mean_filter(out, abs.radius, abs.mean_weighting, abs.sigma_d);
    return out;
  }
  return bilateral_filter(cloud, abs);
}

FilterTuning tune_filter(const std::vector<EvalCase>& cases, FilterKind kind) {
  if (cases.empty()) throw DataError("filter tuning needs at least one case");
  std::vector<FilterConfig> grid;
  if (kind == FilterKind::Mean) {
    for (double r : {0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08}) {
      for (auto w : {MeanWeighting::Uniform, MeanWeighting::Gaussian}) {
        FilterConfig c{r, r / 2.0, r / 2.0, 1, w};
        grid.push_back(c);
      }
    }
  } else {
    for (double r : {0.01, 0.02, 0.03, 0.04, 0.06}) {
      for (double sn : {0.005, 0.01, 0.02}) {
        for (int it : {1, 2, 3}) grid.push_back(FilterConfig{r, r / 2.0, sn, it});
      }
    }
  }
  FilterTuning best;
  best.kind = kind;
  best.chamfer = std::numeric_limits<double>::infinity();
  for (const FilterConfig& cfg : grid) {
    double total = 0.0;
    for (const EvalCase& c : cases) total += chamfer(apply_filter(c.noisy, kind, cfg), c.mesh, c.clean).chamfer;
    const double mean = total / static_cast<double>(cases.size());
    if (mean < best.chamfer) {
      best.chamfer = mean;
      best.config = cfg;
    }
  }
  return best;
}

}  // namespace tdn
