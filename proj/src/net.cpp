#include "tdnoise/net.hpp"

#include "tdnoise/cloud.hpp"
#include "tdnoise/error.hpp"
#include "tdnoise/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace tdn {

namespace {

constexpr std::size_t kConvGrain = 64;

struct LayerDims {
  std::string name;
  Eigen::Index in;
  Eigen::Index out;
  bool conv;
};

std::vector<LayerDims> layer_dims(const ArchSpec& a) {
  const Eigen::Index c0 = a.in_width;
  const Eigen::Index c1 = a.levels[0].width;
  const Eigen::Index c2 = a.levels[1].width;
  return {
      {"enc1", c0, c1, true},       {"enc1.pw", c1, c1, false}, {"enc2", c1, c2, true},
      {"enc2.pw", c2, c2, false},   {"mid", c2, c2, true},      {"dec2", c2, c2, true},
      {"dec2.pw", c2 + c1, c1, false}, {"dec1", c1, c1, true},  {"head.pw", c1, c1, false},
      {"head.out", c1, 3, false},
  };
}

std::vector<TensorSlot> make_layout(const ArchSpec& a) {
  std::vector<TensorSlot> slots;
  std::size_t offset = 0;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    slots.push_back({std::move(name), offset, rows, cols});
    offset += static_cast<std::size_t>(rows * cols);
  };
  const Eigen::Index h = a.kernel_hidden;
  for (const LayerDims& l : layer_dims(a)) {
    if (l.conv) {
      add(l.name + ".kernel.w1", 3, h);
      add(l.name + ".kernel.b1", 1, h);
      add(l.name + ".kernel.w2", h, l.in);
      add(l.name + ".kernel.b2", 1, l.in);
      add(l.name + ".mix.w", l.in, l.out);
      add(l.name + ".mix.b", 1, l.out);
    } else {
      add(l.name + ".w", l.in, l.out);
      add(l.name + ".b", 1, l.out);
    }
  }
  return slots;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

void ArchSpec::validate() const {
  if (in_width < 1) throw DataError("arch: in_width must be >= 1");
  if (kernel_hidden < 1 || kernel_hidden > 64) throw DataError("arch: kernel_hidden must be in [1, 64]");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw DataError("arch: leaky_slope must be in [0, 1)");
  for (const LevelSpec& l : levels) {
    if (!(l.receptive_frac > 0.0)) throw DataError("arch: receptive field must be > 0");
    if (!(l.pool_frac > 0.0)) throw DataError("arch: pooling radius must be > 0");
    if (l.width < 1) throw DataError("arch: level width must be >= 1");
    if (std::abs(l.pool_frac - 0.5 * l.receptive_frac) > 1e-12) {
      throw DataError("arch: pooling radius must be half the receptive field");
    }
  }
}

std::string ArchSpec::describe() const {
  std::ostringstream os;
  os << "in=" << in_width;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    os << " L" << i + 1 << "(rf=" << levels[i].receptive_frac << " pool=" << levels[i].pool_frac
       << " width=" << levels[i].width << ")";
  }
  os << " hidden=" << kernel_hidden << " slope=" << leaky_slope << " blind_spot=" << (blind_spot ? 1 : 0);
  return os.str();
}

std::size_t parameter_count(const ArchSpec& arch) {
  const auto slots = make_layout(arch);
  return slots.back().offset + slots.back().size();
}

ModelParams ModelParams::zeros(const ArchSpec& arch) {
  arch.validate();
  ModelParams p;
  p.arch_ = arch;
  p.layout_ = make_layout(arch);
  p.values_.assign(p.layout_.back().offset + p.layout_.back().size(), 0.0);
  return p;
}

ModelParams ModelParams::init(const ArchSpec& arch, std::uint64_t seed) {
  ModelParams p = zeros(arch);
  std::mt19937_64 rng(seed);
  for (const TensorSlot& s : p.layout_) {
    double* v = p.values_.data() + s.offset;
    if (s.name.rfind("head.out", 0) == 0) continue;
    if (ends_with(s.name, ".kernel.b2")) {
      std::fill(v, v + s.size(), 1.0);
      continue;
    }
    if (ends_with(s.name, "b1") || ends_with(s.name, ".b")) continue;
    double a = std::sqrt(6.0 / static_cast<double>(s.rows));
    if (ends_with(s.name, ".kernel.w2")) a *= 0.5;
    std::uniform_real_distribution<double> u(-a, a);
    for (std::size_t k = 0; k < s.size(); ++k) v[k] = u(rng);
  }
  return p;
}

const TensorSlot& ModelParams::slot(std::string_view name) const {
  for (const TensorSlot& s : layout_) {
    if (s.name == name) return s;
  }
  throw InvariantError("no parameter tensor named '" + std::string(name) + "'");
}

std::string ModelParams::path_of(std::size_t flat_index) const {
  for (const TensorSlot& s : layout_) {
    if (flat_index >= s.offset && flat_index < s.offset + s.size()) {
      const std::size_t local = flat_index - s.offset;
      return s.name + "[" + std::to_string(local / s.cols) + "," + std::to_string(local % s.cols) + "]";
    }
  }
  return "param[" + std::to_string(flat_index) + "]";
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> estimate_density(std::span<const Vec3> points, double radius) {
  std::vector<double> rho(points.size(), 1.0);
  if (points.empty()) return rho;
  const NeighborIndex index(points, radius);
  parallel_for(points.size(), [&](std::size_t i) {
    rho[i] = static_cast<double>(index.count_within(points[i], radius));
  });
  double mean = 0.0;
  for (double r : rho) mean += r;
  mean /= static_cast<double>(rho.size());
  for (double& r : rho) r /= mean;
  return rho;
}

ConvGeometry build_conv_geometry(std::span<const Vec3> in_points, std::span<const Vec3> out_points, double radius,
                                 std::span<const double> densities,
                                 const std::vector<std::optional<PointId>>* self_of_out) {
  if (!(radius > 0.0)) throw DataError("convolution radius must be > 0");
  if (densities.size() != in_points.size()) throw InvariantError("one density per input point required");
  for (double d : densities) {
    if (!(d > 0.0)) throw DataError("convolution densities must be > 0");
  }
  if (self_of_out && self_of_out->size() != out_points.size()) {
    throw InvariantError("blind-spot map must cover every output point");
  }
  ConvGeometry g;
  g.in_count = in_points.size();
  g.out_count = out_points.size();
  g.radius = radius;
  g.inv_density.resize(densities.size());
  for (std::size_t j = 0; j < densities.size(); ++j) g.inv_density[j] = 1.0 / densities[j];

  std::vector<std::vector<PointId>> lists(out_points.size());
  if (!in_points.empty()) {
    const NeighborIndex index(in_points, radius);
    parallel_for(out_points.size(), [&](std::size_t i) {
      const std::optional<PointId> skip = self_of_out ? (*self_of_out)[i] : std::nullopt;
      auto& l = lists[i];
      index.for_each_within(out_points[i], radius, [&](PointId id, double) {
        if (id != skip) l.push_back(id);
      });
      // position order (id as tie-break) keeps the summation order, and so
      // the result bits, independent of how the input is permuted
      std::sort(l.begin(), l.end(), [&](PointId a, PointId b) {
        const Vec3& pa = in_points[a];
        const Vec3& pb = in_points[b];
        if (pa.x() != pb.x()) return pa.x() < pb.x();
        if (pa.y() != pb.y()) return pa.y() < pb.y();
        if (pa.z() != pb.z()) return pa.z() < pb.z();
        return a < b;
      });
    });
  }
  g.offsets.assign(out_points.size() + 1, 0);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    g.offsets[i + 1] = g.offsets[i] + lists[i].size();
    if (lists[i].empty()) ++g.empty_outputs;
  }
  g.neighbors.resize(g.offsets.back());
  g.rel.resize(g.offsets.back());
  g.pair_out.resize(g.offsets.back());
  const double inv_r = 1.0 / radius;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    std::size_t p = g.offsets[i];
    for (PointId j : lists[i]) {
      g.neighbors[p] = j;
      g.rel[p] = (in_points[j] - out_points[i]) * inv_r;
      g.pair_out[p] = static_cast<PointId>(i);
      ++p;
    }
  }
  g.t_offsets.assign(in_points.size() + 1, 0);
  for (PointId j : g.neighbors) ++g.t_offsets[j + 1];
  for (std::size_t j = 0; j < in_points.size(); ++j) g.t_offsets[j + 1] += g.t_offsets[j];
  g.t_pairs.resize(g.neighbors.size());
  std::vector<std::size_t> fill(g.t_offsets.begin(), g.t_offsets.end() - 1);
  for (std::size_t p = 0; p < g.neighbors.size(); ++p) g.t_pairs[fill[g.neighbors[p]]++] = p;
  return g;
}

namespace {

// Kernel MLP for one offset: hpre = rel W1 + b1, h = lrelu(hpre),
// k = h W2 + b2. Returns the sign mask of hpre.
struct KernelEval {
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;
  Eigen::Index hidden;
  Eigen::Index channels;
  double slope;

  std::uint64_t hidden_layer(const Vec3& rel, double* hpre, double* h) const {
    std::uint64_t mask = 0;
    for (Eigen::Index a = 0; a < hidden; ++a) {
      const double v = rel[0] * w1[a] + rel[1] * w1[hidden + a] + rel[2] * w1[2 * hidden + a] + b1[a];
      hpre[a] = v;
      if (v < 0.0) {
        h[a] = slope * v;
        mask |= (1ull << a);
      } else {
        h[a] = v;
      }
    }
    return mask;
  }

  void output_layer(const double* h, double* k) const {
    for (Eigen::Index c = 0; c < channels; ++c) k[c] = b2[c];
    for (Eigen::Index a = 0; a < hidden; ++a) {
      const double ha = h[a];
      const double* row = w2 + a * channels;
      for (Eigen::Index c = 0; c < channels; ++c) k[c] += ha * row[c];
    }
  }
};

}  // namespace

ad::Var mc_conv(ad::Tape& tape, ad::Var features, const ConvGeometry& geom, const KernelVars& kernel, double slope) {
  const ad::Matrix& F = tape.value(features);
  const ad::Matrix& W1 = tape.value(kernel.w1);
  const ad::Matrix& B1 = tape.value(kernel.b1);
  const ad::Matrix& W2 = tape.value(kernel.w2);
  const ad::Matrix& B2 = tape.value(kernel.b2);
  const Eigen::Index C = F.cols();
  const Eigen::Index H = W1.cols();
  if (static_cast<std::size_t>(F.rows()) != geom.in_count) {
    throw InvariantError("mc_conv: " + std::to_string(F.rows()) + " feature rows for " +
                         std::to_string(geom.in_count) + " input points");
  }
  if (W1.rows() != 3 || B1.cols() != H || W2.rows() != H || W2.cols() != C || B2.cols() != C || H > 64) {
    throw InvariantError("mc_conv: kernel parameter shapes do not match " + std::to_string(C) + " channels");
  }
  const KernelEval ke{W1.data(), B1.data(), W2.data(), B2.data(), H, C, slope};

  ad::Matrix Z = ad::Matrix::Zero(static_cast<Eigen::Index>(geom.out_count), C);
  const std::size_t chunks = chunk_count(geom.out_count, kConvGrain);
  std::vector<std::uint64_t> chunk_sig(chunks, 0);
  parallel_chunks(geom.out_count, kConvGrain, [&](std::size_t b, std::size_t e, std::size_t c) {
    std::vector<double> hpre(H), h(H), k(C);
    std::uint64_t sig = 0;
    for (std::size_t i = b; i < e; ++i) {
      const std::size_t p0 = geom.offsets[i], p1 = geom.offsets[i + 1];
      if (p0 == p1) continue;
      double* z = Z.row(static_cast<Eigen::Index>(i)).data();
      for (std::size_t p = p0; p < p1; ++p) {
        const std::uint64_t mask = ke.hidden_layer(geom.rel[p], hpre.data(), h.data());
        if (mask) sig = ad::hash_combine(sig, (static_cast<std::uint64_t>(p) << 8) ^ mask);
        ke.output_layer(h.data(), k.data());
        const PointId j = geom.neighbors[p];
        const double s = geom.inv_density[j];
        const double* f = F.row(j).data();
        for (Eigen::Index ch = 0; ch < C; ++ch) z[ch] += k[ch] * f[ch] * s;
      }
      const double inv_n = 1.0 / static_cast<double>(p1 - p0);
      for (Eigen::Index ch = 0; ch < C; ++ch) z[ch] *= inv_n;
    }
    chunk_sig[c] = sig;
  });
  if (tape.recording()) {
    for (std::uint64_t s : chunk_sig) tape.mix_signature(s);
  }

  const ConvGeometry* gp = &geom;
  return tape.push(std::move(Z), {features, kernel.w1, kernel.b1, kernel.w2, kernel.b2},
                   [features, kernel, gp, slope](ad::Tape& tp, std::size_t self) {
    const ConvGeometry& g = *gp;
    const ad::Matrix& G = tp.grad(self);
    const ad::Matrix& F = tp.value(features);
    const ad::Matrix& W1 = tp.value(kernel.w1);
    const ad::Matrix& W2 = tp.value(kernel.w2);
    const Eigen::Index C = F.cols();
    const Eigen::Index H = W1.cols();
    const KernelEval ke{W1.data(), tp.value(kernel.b1).data(), W2.data(), tp.value(kernel.b2).data(), H, C, slope};

    // kernel parameters: per-chunk partial sums merged in chunk order
    const std::size_t chunks = chunk_count(g.out_count, kConvGrain);
    const std::size_t block = static_cast<std::size_t>(3 * H + H + H * C + C);
    std::vector<double> partial(chunks * block, 0.0);
    parallel_chunks(g.out_count, kConvGrain, [&](std::size_t b, std::size_t e, std::size_t c) {
      double* dW1 = partial.data() + c * block;
      double* dB1 = dW1 + 3 * H;
      double* dW2 = dB1 + H;
      double* dB2 = dW2 + H * C;
      std::vector<double> hpre(H), h(H), dk(C), dh(H);
      for (std::size_t i = b; i < e; ++i) {
        const std::size_t p0 = g.offsets[i], p1 = g.offsets[i + 1];
        if (p0 == p1) continue;
        const double inv_n = 1.0 / static_cast<double>(p1 - p0);
        const double* gi = G.row(static_cast<Eigen::Index>(i)).data();
        for (std::size_t p = p0; p < p1; ++p) {
          const Vec3& rel = g.rel[p];
          ke.hidden_layer(rel, hpre.data(), h.data());
          const PointId j = g.neighbors[p];
          const double s = g.inv_density[j] * inv_n;
          const double* f = F.row(j).data();
          for (Eigen::Index ch = 0; ch < C; ++ch) {
            dk[ch] = gi[ch] * f[ch] * s;
            dB2[ch] += dk[ch];
          }
          for (Eigen::Index a = 0; a < H; ++a) {
            const double* w2row = W2.data() + a * C;
            double* dw2row = dW2 + a * C;
            double acc = 0.0;
            for (Eigen::Index ch = 0; ch < C; ++ch) {
              dw2row[ch] += h[a] * dk[ch];
              acc += w2row[ch] * dk[ch];
            }
            dh[a] = hpre[a] < 0.0 ? slope * acc : acc;
            dB1[a] += dh[a];
            dW1[a] += rel[0] * dh[a];
            dW1[H + a] += rel[1] * dh[a];
            dW1[2 * H + a] += rel[2] * dh[a];
          }
        }
      }
    });
    std::vector<double> total(block, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
      const double* src = partial.data() + c * block;
      for (std::size_t k = 0; k < block; ++k) total[k] += src[k];
    }
    tp.accumulate(kernel.w1, Eigen::Map<const ad::Matrix>(total.data(), 3, H));
    tp.accumulate(kernel.b1, Eigen::Map<const ad::Matrix>(total.data() + 3 * H, 1, H));
    tp.accumulate(kernel.w2, Eigen::Map<const ad::Matrix>(total.data() + 4 * H, H, C));
    tp.accumulate(kernel.b2, Eigen::Map<const ad::Matrix>(total.data() + 4 * H + H * C, 1, C));

    if (ad::Matrix* dF = tp.grad_buffer(features)) {
      parallel_chunks(g.in_count, kConvGrain, [&](std::size_t b, std::size_t e, std::size_t) {
        std::vector<double> hpre(H), h(H), k(C);
        for (std::size_t j = b; j < e; ++j) {
          double* df = dF->row(static_cast<Eigen::Index>(j)).data();
          for (std::size_t t = g.t_offsets[j]; t < g.t_offsets[j + 1]; ++t) {
            const std::size_t p = g.t_pairs[t];
            const std::size_t i = g.pair_out[p];
            const double inv_n = 1.0 / static_cast<double>(g.offsets[i + 1] - g.offsets[i]);
            const double s = g.inv_density[j] * inv_n;
            ke.hidden_layer(g.rel[p], hpre.data(), h.data());
            ke.output_layer(h.data(), k.data());
            const double* gi = G.row(static_cast<Eigen::Index>(i)).data();
            for (Eigen::Index ch = 0; ch < C; ++ch) df[ch] += k[ch] * gi[ch] * s;
          }
        }
      });
    }
  });
}

NetworkGeometry build_network_geometry(const ArchSpec& arch, std::span<const Vec3> positions, std::uint64_t pool_seed,
                                       bool blind_spot) {
  arch.validate();
  if (positions.empty()) throw DataError("network input cloud is empty");
  double diag = bbox_diagonal(positions);
  if (!(diag > 0.0)) diag = 1.0;
  const double r1 = arch.levels[0].receptive_frac * diag;
  const double r2 = arch.levels[1].receptive_frac * diag;

  NetworkGeometry g;
  g.scale = r1;
  g.level1 = poisson_subsample(positions, arch.levels[0].pool_frac * diag, pool_seed);
  std::vector<Vec3> p1;
  p1.reserve(g.level1.size());
  for (PointId id : g.level1) p1.push_back(positions[id]);
  g.level2 = poisson_subsample(p1, arch.levels[1].pool_frac * diag, ad::hash_combine(pool_seed, 1));
  if (g.level2.size() < 4) {
    spdlog::warn("cloud of {} points is too small for two pooling levels; using a single level",
                 positions.size());
    g.degenerate = true;
    g.level1.resize(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) g.level1[i] = static_cast<PointId>(i);
    p1.assign(positions.begin(), positions.end());
    g.level2 = g.level1;
  }
  std::vector<Vec3> p2;
  p2.reserve(g.level2.size());
  for (PointId id : g.level2) p2.push_back(p1[id]);

  std::vector<std::optional<PointId>> enc1_self, dec1_self;
  if (blind_spot) {
    enc1_self.resize(g.level1.size());
    dec1_self.assign(positions.size(), std::nullopt);
    for (std::size_t k = 0; k < g.level1.size(); ++k) {
      enc1_self[k] = g.level1[k];
      dec1_self[g.level1[k]] = static_cast<PointId>(k);
    }
  }
  const auto rho0 = estimate_density(positions, r1);
  const auto rho1_fine = estimate_density(p1, r1);
  const auto rho1_coarse = estimate_density(p1, r2);
  const auto rho2 = estimate_density(p2, r2);
  g.enc1 = build_conv_geometry(positions, p1, r1, rho0, blind_spot ? &enc1_self : nullptr);
  g.enc2 = build_conv_geometry(p1, p2, r2, rho1_coarse);
  g.mid = build_conv_geometry(p2, p2, r2, rho2);
  g.dec2 = build_conv_geometry(p2, p1, r2, rho2);
  g.dec1 = build_conv_geometry(p1, positions, r1, rho1_fine, blind_spot ? &dec1_self : nullptr);
  return g;
}

ad::Var network_forward(ad::Tape& tape, const ModelParams& params, const NetworkGeometry& geom,
                        const ad::Matrix* input_features) {
  const ArchSpec& arch = params.arch();
  tape.bind_parameters(params.values());
  auto P = [&](const std::string& name) {
    const TensorSlot& s = params.slot(name);
    return tape.parameter(s.offset, s.rows, s.cols);
  };
  const double slope = arch.leaky_slope;
  auto conv = [&](const std::string& name, ad::Var f, const ConvGeometry& g) {
    const KernelVars kv{P(name + ".kernel.w1"), P(name + ".kernel.b1"), P(name + ".kernel.w2"),
                        P(name + ".kernel.b2")};
    const ad::Var z = mc_conv(tape, f, g, kv, slope);
    return ad::leaky_relu(tape, ad::affine(tape, z, P(name + ".mix.w"), P(name + ".mix.b")), slope);
  };
  auto pointwise = [&](const std::string& name, ad::Var f) {
    return ad::leaky_relu(tape, ad::affine(tape, f, P(name + ".w"), P(name + ".b")), slope);
  };

  const auto n = static_cast<Eigen::Index>(geom.enc1.in_count);
  ad::Var x0;
  if (input_features) {
    if (input_features->rows() != n || input_features->cols() != arch.in_width) {
      throw InvariantError("input features must be " + std::to_string(n) + " x " + std::to_string(arch.in_width));
    }
    x0 = tape.constant(*input_features);
  } else {
    x0 = tape.constant(ad::Matrix::Ones(n, arch.in_width));
  }
  const ad::Var e1 = pointwise("enc1.pw", conv("enc1", x0, geom.enc1));
  const ad::Var e2 = pointwise("enc2.pw", conv("enc2", e1, geom.enc2));
  const ad::Var m = conv("mid", e2, geom.mid);
  const ad::Var d2 = pointwise("dec2.pw", ad::concat_cols(tape, conv("dec2", m, geom.dec2), e1));
  const ad::Var d1 = conv("dec1", d2, geom.dec1);
  const ad::Var h = pointwise("head.pw", d1);
  const TensorSlot& ow = params.slot("head.out.w");
  const TensorSlot& ob = params.slot("head.out.b");
  const ad::Var out = ad::affine(tape, h, tape.parameter(ow.offset, ow.rows, ow.cols),
                                 tape.parameter(ob.offset, ob.rows, ob.cols));
  return ad::scale(tape, out, geom.scale);
}

std::vector<Vec3> predict_displacements(const ModelParams& params, std::span<const Vec3> positions,
                                        std::uint64_t pool_seed) {
  const NetworkGeometry geom = build_network_geometry(params.arch(), positions, pool_seed, params.arch().blind_spot);
  ad::Tape tape(false);
  const ad::Matrix& D = tape.value(network_forward(tape, params, geom));
  std::vector<Vec3> out(positions.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = D.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return out;
}

AdamState AdamState::for_size(std::size_t n, const AdamConfig& config) {
  if (!(config.lr > 0.0)) throw DataError("learning rate must be > 0");
  if (!(config.decay > 0.0 && config.decay <= 1.0)) throw DataError("learning-rate decay must be in (0, 1]");
  AdamState s;
  s.config = config;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

double AdamState::current_lr() const {
  if (config.decay_interval == 0) return config.lr;
  return config.lr * std::pow(config.decay, static_cast<double>(step / config.decay_interval));
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const std::function<std::string(std::size_t)>& path) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw InvariantError("adam: parameter, gradient and moment sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw InvariantError("non-finite gradient at " + (path ? path(i) : "param[" + std::to_string(i) + "]") +
                           "; step rejected");
    }
  }
  const AdamConfig& c = state.config;
  const double lr = state.current_lr();
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

void adam_step(AdamState& state, ModelParams& params, std::span<const double> grads) {
  adam_step(state, params.values(), grads, [&](std::size_t i) { return params.path_of(i); });
}

// ---- checkpoint container ----

namespace {

constexpr char kMagic[8] = {'T', 'D', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  std::uint64_t pos() const { return pos_; }
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_, 0);
    }
  }
  std::uint64_t uint(int bytes, const char* what) {
    need(static_cast<std::size_t>(bytes), what);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(uint(1, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(uint(4, what)); }
  std::uint64_t u64(const char* what) { return uint(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(uint(8, what)); }
  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  const ArchSpec& a = ckpt.params.arch();
  w.u32(static_cast<std::uint32_t>(a.in_width));
  for (const LevelSpec& l : a.levels) {
    w.f64(l.receptive_frac);
    w.f64(l.pool_frac);
    w.u32(static_cast<std::uint32_t>(l.width));
  }
  w.u32(static_cast<std::uint32_t>(a.kernel_hidden));
  w.f64(a.leaky_slope);
  w.u8(a.blind_spot ? 1 : 0);
  w.u64(ckpt.meta.epoch);
  w.u64(ckpt.meta.step);
  w.u64(ckpt.meta.seed);
  const auto& vals = ckpt.params.values();
  w.u64(vals.size());
  for (double v : vals) w.f64(v);
  w.u8(ckpt.adam ? 1 : 0);
  if (ckpt.adam) {
    const AdamState& s = *ckpt.adam;
    if (s.m.size() != vals.size() || s.v.size() != vals.size()) {
      throw InvariantError("checkpoint: Adam moments do not match the parameter count");
    }
    w.u64(s.step);
    w.f64(s.config.lr);
    w.f64(s.config.beta1);
    w.f64(s.config.beta2);
    w.f64(s.config.eps);
    w.f64(s.config.decay);
    w.u64(s.config.decay_interval);
    for (double v : s.m) w.f64(v);
    for (double v : s.v) w.f64(v);
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kMagic, "magic") != std::string_view(kMagic, sizeof kMagic)) {
    throw ParseError("not a tdnoise checkpoint (bad magic)", 0, 0);
  }
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), r.pos() - 4, 0);
  }
  ArchSpec a;
  a.in_width = static_cast<int>(r.u32("in_width"));
  for (LevelSpec& l : a.levels) {
    l.receptive_frac = r.f64("receptive field");
    l.pool_frac = r.f64("pool radius");
    l.width = static_cast<int>(r.u32("width"));
  }
  a.kernel_hidden = static_cast<int>(r.u32("kernel_hidden"));
  a.leaky_slope = r.f64("leaky_slope");
  a.blind_spot = r.u8("blind_spot") != 0;
  try {
    a.validate();
  } catch (const DataError& e) {
    throw ParseError(std::string("checkpoint architecture invalid: ") + e.what(), r.pos(), 0);
  }
  Checkpoint ck;
  ck.meta.epoch = r.u64("epoch");
  ck.meta.step = r.u64("step");
  ck.meta.seed = r.u64("seed");
  ck.params = ModelParams::zeros(a);
  const std::uint64_t n = r.u64("parameter count");
  if (n != ck.params.count()) {
    throw ParseError("checkpoint holds " + std::to_string(n) + " parameters but its architecture needs " +
                         std::to_string(ck.params.count()),
                     r.pos() - 8, 0);
  }
  for (double& v : ck.params.values()) v = r.f64("parameters");
  if (r.u8("adam flag")) {
    AdamState s;
    s.step = r.u64("adam step");
    s.config.lr = r.f64("adam lr");
    s.config.beta1 = r.f64("adam beta1");
    s.config.beta2 = r.f64("adam beta2");
    s.config.eps = r.f64("adam eps");
    s.config.decay = r.f64("adam decay");
    s.config.decay_interval = r.u64("adam decay interval");
    s.m.resize(n);
    s.v.resize(n);
    for (double& v : s.m) v = r.f64("adam first moments");
    for (double& v : s.v) v = r.f64("adam second moments");
    ck.adam = std::move(s);
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint", r.pos(), 0);
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_checkpoint(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset(), e.line());
  }
}

void require_same_arch(const ArchSpec& expected, const ArchSpec& found) {
  if (!(expected == found)) {
    throw DataError("architecture mismatch\n  expected: " + expected.describe() + "\n  checkpoint: " +
                    found.describe());
  }
}

}  // namespace tdn
