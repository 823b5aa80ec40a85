#pragma once

// Central finite-difference check of the full network, shared by the unit
// tests and the acceptance binary. A coordinate whose +-h perturbation flips
// any leaky-ReLU branch is resampled: the function is not differentiable
// across the kink, so the difference quotient is not an oracle there.

#include "tdnoise/net.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace tdn::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
  std::string worst;
};

inline std::vector<Vec3> random_instance_points(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  const double radius = u(rng);
  const Vec3 center(g(rng), g(rng), g(rng));
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d(g(rng), g(rng), g(rng));
    pts.push_back(center + radius * (d.normalized() + 0.05 * Vec3(g(rng), g(rng), g(rng))));
  }
  return pts;
}

// Random weights everywhere, including the output layer and biases, so no
// gradient is structurally zero.
inline ModelParams random_params(const ArchSpec& arch, std::mt19937_64& rng) {
  ModelParams p = ModelParams::init(arch, rng());
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (const TensorSlot& s : p.layout()) {
    const bool bias = s.rows == 1;
    const bool out = s.name.rfind("head.out", 0) == 0;
    if (!bias && !out) continue;
    for (std::size_t k = 0; k < s.size(); ++k) p.values()[s.offset + k] += u(rng);
  }
  return p;
}

struct ForwardEval {
  double loss;
  std::uint64_t signature;
};

inline ForwardEval eval_linear_loss(const ModelParams& p, const NetworkGeometry& geom, const ad::Matrix& coeff) {
  ad::Tape tape(true);
  const ad::Var out = network_forward(tape, p, geom);
  return {tape.value(out).cwiseProduct(coeff).sum(), tape.signature()};
}

inline GradCheckResult gradcheck_network(std::uint64_t seed, std::size_t points = 64, std::size_t per_tensor = 6,
                                         double h = 1e-5) {
  std::mt19937_64 rng(seed);
  const ArchSpec arch;
  const std::vector<Vec3> pts = random_instance_points(points, rng);
  ModelParams params = random_params(arch, rng);
  const NetworkGeometry geom = build_network_geometry(arch, pts, rng(), seed % 2 == 0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ad::Matrix coeff(static_cast<Eigen::Index>(points), 3);
  for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff.data()[i] = u(rng);

  ad::Tape tape(true);
  const ad::Var out = network_forward(tape, params, geom);
  const std::uint64_t base_sig = tape.signature();
  tape.backward(out, coeff);
  const std::vector<double> analytic = tape.parameter_grad();

  GradCheckResult r;
  for (const TensorSlot& s : params.layout()) {
    std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
    std::size_t done = 0;
    for (std::size_t attempt = 0; done < std::min(per_tensor, s.size()) && attempt < 20 * per_tensor; ++attempt) {
      const std::size_t idx = s.offset + pick(rng);
      const double saved = params.values()[idx];
      params.values()[idx] = saved + h;
      const ForwardEval plus = eval_linear_loss(params, geom, coeff);
      params.values()[idx] = saved - h;
      const ForwardEval minus = eval_linear_loss(params, geom, coeff);
      params.values()[idx] = saved;
      if (plus.signature != base_sig || minus.signature != base_sig) {
        ++r.skipped_kinks;
        continue;
      }
      const double fd = (plus.loss - minus.loss) / (2.0 * h);
      const double a = analytic[idx];
      const double rel = std::abs(a - fd) / (std::abs(a) + 1e-8);
      ++r.checked;
      ++done;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = params.path_of(idx) + " analytic=" + std::to_string(a) + " fd=" + std::to_string(fd);
      }
    }
  }
  return r;
}

}  // namespace tdn::testing
