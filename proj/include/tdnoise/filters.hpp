#pragma once

#include "tdnoise/types.hpp"

#include <vector>

namespace tdn {

enum class MeanWeighting { Uniform, Gaussian };

struct FilterConfig {
  double radius = 0.02;
  double sigma_d = 0.01;  ///< spatial bandwidth of the bilateral weight
  double sigma_n = 0.01;  ///< range bandwidth along the normal
  int iterations = 1;
  /// Mean filter weighting; Gaussian uses sigma_d as bandwidth.
  MeanWeighting mean_weighting = MeanWeighting::Uniform;

  void validate() const;
};

/// PCA normals over the radius neighbourhood (self included). The normal is
/// the eigenvector of the smallest covariance eigenvalue, oriented away from
/// the neighbourhood centroid. Points with fewer than 3 neighbours get the
/// smallest principal axis of the whole cloud.
std::vector<Vec3> estimate_normals(const PointCloud& cloud, double radius);

/// Replaces every point with the centroid of its radius neighbourhood
/// (self included). Colors pass through.
PointCloud mean_filter(const PointCloud& cloud, double radius,
                       MeanWeighting weighting = MeanWeighting::Uniform, double sigma = 0.0);

/// Normal-displacement bilateral filter: p' = p + delta * n with
/// delta = sum w_d w_n <p_i - p, n> / sum w_d w_n. Normals are re-estimated
/// before every iteration.
PointCloud bilateral_filter(const PointCloud& cloud, const FilterConfig& config);

}  // namespace tdn
