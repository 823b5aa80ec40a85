#include "tdnoise/filters.hpp"

#include "tdnoise/cloud.hpp"
#include "tdnoise/error.hpp"
#include "tdnoise/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace tdn {

void FilterConfig::validate() const {
  if (!(radius > 0.0)) throw DataError("filter radius must be > 0");
  if (!(sigma_d > 0.0)) throw DataError("bilateral sigma_d must be > 0");
  if (!(sigma_n > 0.0)) throw DataError("bilateral sigma_n must be > 0");
  if (iterations < 1) throw DataError("filter iterations must be >= 1");
}

namespace {

Vec3 smallest_axis(const Eigen::Matrix3d& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  return eig.eigenvectors().col(0).normalized();
}

Vec3 canonical_sign(Vec3 n) {
  Eigen::Index k = 0;
  n.cwiseAbs().maxCoeff(&k);
  return n[k] < 0.0 ? Vec3(-n) : n;
}

}  // namespace

std::vector<Vec3> estimate_normals(const PointCloud& cloud, double radius) {
  if (cloud.empty()) return {};
  if (!(radius > 0.0)) throw DataError("normal estimation radius must be > 0");

  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : cloud.positions) mean += p;
  mean /= static_cast<double>(cloud.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : cloud.positions) cov += (p - mean) * (p - mean).transpose();
  const Vec3 fallback = canonical_sign(smallest_axis(cov));

  const NeighborIndex index = build_index(cloud, radius);
  std::vector<Vec3> normals(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    const Vec3& p = cloud.positions[i];
    Vec3 c = Vec3::Zero();
    std::size_t n = 0;
    index.for_each_within(p, radius, [&](PointId id, double) {
      c += cloud.positions[id];
      ++n;
    });
    if (n < 3) {
      normals[i] = fallback;
      return;
    }
    c /= static_cast<double>(n);
    Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
    index.for_each_within(p, radius, [&](PointId id, double) {
      const Vec3 d = cloud.positions[id] - c;
      local += d * d.transpose();
    });
    Vec3 normal = smallest_axis(local);
    const double side = normal.dot(p - c);
    if (std::abs(side) <= 1e-12 * radius) {
      normal = canonical_sign(normal);
    } else if (side < 0.0) {
      normal = -normal;
    }
    normals[i] = normal;
  });
  return normals;
}

PointCloud mean_filter(const PointCloud& cloud, double radius, MeanWeighting weighting, double sigma) {
  if (!(radius > 0.0)) throw DataError("mean filter radius must be > 0");
  if (weighting == MeanWeighting::Gaussian && !(sigma > 0.0)) {
    throw DataError("gaussian mean filter needs sigma > 0");
  }
  PointCloud out = cloud;
  if (cloud.empty()) return out;
  const NeighborIndex index = build_index(cloud, radius);
  const double inv2s2 = weighting == MeanWeighting::Gaussian ? 1.0 / (2.0 * sigma * sigma) : 0.0;
  parallel_for(cloud.size(), [&](std::size_t i) {
    Vec3 sum = Vec3::Zero();
    double wsum = 0.0;
    index.for_each_within(cloud.positions[i], radius, [&](PointId id, double d2) {
      const double w = std::exp(-d2 * inv2s2);
      sum += w * cloud.positions[id];
      wsum += w;
    });
    out.positions[i] = sum / wsum;
  });
  return out;
}

PointCloud bilateral_filter(const PointCloud& cloud, const FilterConfig& config) {
  config.validate();
  PointCloud current = cloud;
  if (cloud.empty()) return current;
  const double inv_d = 1.0 / (2.0 * config.sigma_d * config.sigma_d);
  const double inv_n = 1.0 / (2.0 * config.sigma_n * config.sigma_n);
  for (int it = 0; it < config.iterations; ++it) {
    const std::vector<Vec3> normals = estimate_normals(current, config.radius);
    const NeighborIndex index = build_index(current, config.radius);
    PointCloud next = current;
    parallel_for(current.size(), [&](std::size_t i) {
      const Vec3& p = current.positions[i];
      const Vec3& n = normals[i];
      double num = 0.0, den = 0.0;
      index.for_each_within(p, config.radius, [&](PointId id, double d2) {
        const double h = (current.positions[id] - p).dot(n);
        const double w = std::exp(-d2 * inv_d - h * h * inv_n);
        num += w * h;
        den += w;
      });
      if (den > 0.0) next.positions[i] = p + (num / den) * n;
    });
    current = std::move(next);
  }
  return current;
}

}  // namespace tdn
