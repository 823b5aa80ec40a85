#include "tdnoise/train.hpp"

#include "tdnoise/cloud.hpp"
#include "tdnoise/error.hpp"
#include "tdnoise/parallel.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace tdn {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Unsupervised:
      return "unsupervised";
    case TrainMode::Supervised:
      return "supervised";
    case TrainMode::NoPrior:
      return "noprior";
  }
  return "unknown";
}

std::string_view to_string(LossKind kind) { return kind == LossKind::L2 ? "l2" : "l0"; }

TrainMode parse_train_mode(std::string_view name) {
  if (name == "unsupervised" || name == "full") return TrainMode::Unsupervised;
  if (name == "supervised") return TrainMode::Supervised;
  if (name == "noprior") return TrainMode::NoPrior;
  throw DataError("unknown training mode '" + std::string(name) + "'");
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "l0" || name == "annealed_l0") return LossKind::AnnealedL0;
  if (name == "l2") return LossKind::L2;
  throw DataError("unknown loss '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DataError("epochs must be >= 1");
  if (!(lr > 0.0)) throw DataError("learning rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw DataError("lr decay must be in (0, 1]");
  if (!(decay_every_frac > 0.0 && decay_every_frac <= 1.0)) throw DataError("decay interval must be in (0, 1]");
  if (!(eps > 0.0)) throw DataError("epsilon must be > 0");
  for (double g : {gamma_start, gamma_end}) {
    if (!(g >= 0.0 && g <= 2.0)) throw DataError("gamma must stay in [0, 2]");
  }
  if (!(repulsion_weight >= 0.0)) throw DataError("repulsion weight must be >= 0");
  if (repulsion_sign != 1.0 && repulsion_sign != -1.0) throw DataError("repulsion sign must be +1 or -1");
  if (!(prior_radius_frac > 0.0)) throw DataError("prior radius fraction must be > 0");
  if (eval_every < 1) throw DataError("eval_every must be >= 1");
  PriorConfig p = prior;
  p.radius = 1.0;
  p.validate();
  arch.validate();
}

double gamma_at(const TrainConfig& c, std::uint64_t step, std::uint64_t total_steps) {
  if (total_steps <= 1) return c.gamma_start;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps - 1));
  return c.gamma_start + (c.gamma_end - c.gamma_start) * t;
}

double annealed_l0_loss(const Vec3& pred, const Vec3& target, double gamma, double eps) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += std::pow(std::abs(pred[c] - target[c]) + eps, gamma);
  return s;
}

Vec3 annealed_l0_grad(const Vec3& pred, const Vec3& target, double gamma, double eps) {
  Vec3 g = Vec3::Zero();
  if (gamma == 0.0) return g;
  for (int c = 0; c < 3; ++c) {
    const double e = pred[c] - target[c];
    if (e == 0.0) continue;
    g[c] = gamma * std::pow(std::abs(e) + eps, gamma - 1.0) * (e > 0.0 ? 1.0 : -1.0);
  }
  return g;
}

double repulsion_term(std::span<const Vec3> preds, const std::vector<std::vector<PointId>>& patches,
                      std::vector<Vec3>* grad) {
  if (patches.size() != preds.size()) throw InvariantError("one patch per prediction required");
  if (grad) grad->assign(preds.size(), Vec3::Zero());
  if (preds.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(preds.size());
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double best = -1.0;
    PointId arg = 0;
    for (PointId j : patches[i]) {
      const double d = (preds[i] - preds[j]).norm();
      if (d > best) {
        best = d;
        arg = j;
      }
    }
    if (best <= 0.0) continue;
    total += best;
    if (grad) {
      const Vec3 u = (preds[i] - preds[arg]) / best * inv_n;
      (*grad)[i] += u;
      (*grad)[arg] -= u;
    }
  }
  return total * inv_n;
}

std::vector<std::vector<PointId>> radius_patches(std::span<const Vec3> points, double radius) {
  std::vector<std::vector<PointId>> patches(points.size());
  if (points.empty()) return patches;
  const NeighborIndex index(points, radius);
  parallel_for(points.size(), [&](std::size_t i) {
    patches[i] = index.radius_query(points[i], radius, static_cast<PointId>(i));
    std::sort(patches[i].begin(), patches[i].end());
  });
  return patches;
}

std::string TrainReport::to_csv(std::size_t first_epoch) const {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,loss,eval_error,seconds\n";
  for (std::size_t e = 0; e < loss.size(); ++e) {
    os << first_epoch + e << ',' << loss[e] << ',';
    if (e < eval_error.size() && std::isfinite(eval_error[e])) {
      os << eval_error[e];
    } else {
      os << "nan";
    }
    os << ',' << (e < seconds.size() ? seconds[e] : 0.0) << '\n';
  }
  return os.str();
}

std::vector<PointId> nearest_targets(const PointCloud& noisy, const PointCloud& clean) {
  if (clean.empty()) throw DataError("clean cloud is empty");
  const double cell = std::max(bbox_diagonal(clean) / std::sqrt(static_cast<double>(clean.size())), 1e-12);
  const NeighborIndex index(clean.positions, cell);
  std::vector<PointId> out(noisy.size());
  parallel_for(noisy.size(), [&](std::size_t i) { out[i] = index.nearest(noisy.positions[i])->first; });
  return out;
}

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t cloud, std::uint64_t tag) {
  return ad::hash_combine(ad::hash_combine(ad::hash_combine(seed, epoch), cloud), tag);
}

struct CloudData {
  const PointCloud* cloud = nullptr;
  PriorConfig prior;
  std::optional<NeighborIndex> index;
  std::vector<std::vector<PointId>> patches;
  std::vector<Vec3> fixed_targets;  // supervised / noprior
};

struct StepOutcome {
  bool skipped = false;
  double reported = 0.0;
  std::size_t masked = 0;
};

StepOutcome train_step(const CloudData& cd, const TrainConfig& cfg, TrainState& st, std::uint64_t epoch,
                       std::uint64_t cloud_id, double gamma) {
  const PointCloud& Y = *cd.cloud;
  const std::size_t n = Y.size();
  std::vector<Vec3> targets;
  std::vector<char> valid(n, 1);
  StepOutcome out;
  if (cfg.mode == TrainMode::Unsupervised) {
    const auto batch = sample_prior_batch(Y, *cd.index, cd.prior, stream_seed(cfg.seed, epoch, cloud_id, 2));
    targets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (batch[i]) {
        targets[i] = batch[i]->position;
      } else {
        valid[i] = 0;
        ++out.masked;
      }
    }
  } else {
    targets = cd.fixed_targets;
  }
  const std::size_t used = n - out.masked;
  if (used == 0) {
    spdlog::warn("epoch {} cloud {}: every point masked, step skipped", epoch + 1, cloud_id);
    out.skipped = true;
    return out;
  }

  const NetworkGeometry geom =
      build_network_geometry(cfg.arch, Y.positions, stream_seed(cfg.seed, epoch, cloud_id, 1), cfg.arch.blind_spot);
  ad::Tape tape(true);
  const ad::Var dvar = network_forward(tape, st.params, geom);
  const ad::Matrix& D = tape.value(dvar);

  std::vector<Vec3> preds(n);
  for (std::size_t i = 0; i < n; ++i) preds[i] = Y.positions[i] + D.row(static_cast<Eigen::Index>(i)).transpose();

  ad::Matrix G = ad::Matrix::Zero(static_cast<Eigen::Index>(n), 3);
  const double inv_used = 1.0 / static_cast<double>(used);
  double sum = 0.0;       // objective numerator
  double log_sum = 0.0;   // for the geometric mean at gamma ~ 0
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    const Vec3& p = preds[i];
    const Vec3& q = targets[i];
    Vec3 g;
    if (cfg.loss == LossKind::L2) {
      const Vec3 e = p - q;
      sum += e.squaredNorm();
      g = 2.0 * e;
    } else {
      sum += annealed_l0_loss(p, q, gamma, cfg.eps);
      for (int c = 0; c < 3; ++c) log_sum += std::log(std::abs(p[c] - q[c]) + cfg.eps);
      g = annealed_l0_grad(p, q, gamma, cfg.eps);
    }
    G.row(static_cast<Eigen::Index>(i)) = (g * inv_used).transpose();
  }
  const double per_coord = sum * inv_used / 3.0;
  if (cfg.loss == LossKind::L2) {
    out.reported = std::sqrt(per_coord);
  } else if (gamma < 1e-6) {
    out.reported = std::exp(log_sum * inv_used / 3.0);
  } else {
    out.reported = std::exp(std::log(per_coord) / gamma);
  }

  if (cfg.repulsion_weight > 0.0) {
    std::vector<Vec3> rg;
    const double rep = repulsion_term(preds, cd.patches, &rg);
    const double w = cfg.repulsion_weight * cfg.repulsion_sign;
    for (std::size_t i = 0; i < n; ++i) G.row(static_cast<Eigen::Index>(i)) += (w * rg[i]).transpose();
    out.reported += w * rep;
  }

  tape.backward(dvar, G);
  adam_step(st.adam, st.params, tape.parameter_grad());
  return out;
}

TrainResult run_training(std::vector<CloudData>& data, const TrainConfig& cfg, const TrainHooks& hooks,
                         std::optional<TrainState> resume) {
  const std::uint64_t clouds = data.size();
  const std::uint64_t total_steps = static_cast<std::uint64_t>(cfg.epochs) * clouds;
  AdamConfig ac;
  ac.lr = cfg.lr;
  ac.decay = cfg.lr_decay;
  ac.decay_interval =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(cfg.decay_every_frac * total_steps)));

  TrainResult result;
  TrainState& st = result.state;
  if (resume) {
    st = std::move(*resume);
    require_same_arch(cfg.arch, st.params.arch());
    if (st.adam.m.size() != st.params.count()) throw DataError("resume state: Adam moments do not match parameters");
  } else {
    st.params = ModelParams::init(cfg.arch, cfg.seed);
    st.adam = AdamState::for_size(st.params.count(), ac);
  }

  TrainReport& rep = result.report;
  for (std::uint64_t epoch = st.epoch; epoch < static_cast<std::uint64_t>(cfg.epochs); ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t loss_count = 0, masked = 0;
    for (std::uint64_t c = 0; c < clouds; ++c) {
      const double gamma = gamma_at(cfg, st.step, total_steps);
      const StepOutcome o = train_step(data[c], cfg, st, epoch, c, gamma);
      ++st.step;
      masked += o.masked;
      if (!o.skipped) {
        loss_sum += o.reported;
        ++loss_count;
      }
    }
    if (!st.params.all_finite()) throw InvariantError("parameters became non-finite in epoch " + std::to_string(epoch + 1));
    st.epoch = epoch + 1;
    rep.loss.push_back(loss_count ? loss_sum / static_cast<double>(loss_count)
                                  : std::numeric_limits<double>::quiet_NaN());
    rep.masked.push_back(masked);
    const bool last = st.epoch == static_cast<std::uint64_t>(cfg.epochs);
    if (hooks.evaluate && (st.epoch % static_cast<std::uint64_t>(cfg.eval_every) == 0 || last)) {
      rep.eval_error.push_back(hooks.evaluate(st.params));
    } else {
      rep.eval_error.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    rep.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    spdlog::debug("epoch {} loss {:.6g} eval {:.6g} masked {}", st.epoch, rep.loss.back(), rep.eval_error.back(),
                  masked);
    if (hooks.on_epoch_end) hooks.on_epoch_end(st);
    if (hooks.stop_after_epoch && st.epoch >= *hooks.stop_after_epoch) break;
  }
  return result;
}

void check_dataset_nonempty(std::size_t n) {
  if (n == 0) throw DataError("training dataset is empty");
}

}  // namespace

TrainResult train_unsupervised(const std::vector<PointCloud>& dataset, const TrainConfig& config,
                               const TrainHooks& hooks, std::optional<TrainState> resume) {
  config.validate();
  check_dataset_nonempty(dataset.size());
  if (config.mode == TrainMode::Supervised) throw DataError("supervised mode needs clean pairs");
  std::vector<CloudData> data(dataset.size());
  for (std::size_t c = 0; c < dataset.size(); ++c) {
    const PointCloud& y = dataset[c];
    if (y.empty()) throw DataError("training cloud " + std::to_string(c) + " is empty");
    y.validate();
    CloudData& cd = data[c];
    cd.cloud = &y;
    const double diag = bbox_diagonal(y);
    cd.prior = config.prior;
    cd.prior.radius = config.prior_radius_frac * (diag > 0.0 ? diag : 1.0);
    if (config.mode == TrainMode::Unsupervised) {
      cd.index.emplace(y.positions, cd.prior.radius);
    } else {
      cd.fixed_targets = y.positions;
    }
    if (config.repulsion_weight > 0.0) {
      const double pr = config.repulsion_radius_frac > 0.0 ? config.repulsion_radius_frac * diag : cd.prior.radius;
      cd.patches = radius_patches(y.positions, pr);
    }
  }
  return run_training(data, config, hooks, std::move(resume));
}

TrainResult train_supervised(const std::vector<std::pair<PointCloud, PointCloud>>& pairs, const TrainConfig& config,
                             const TrainHooks& hooks, std::optional<TrainState> resume) {
  TrainConfig cfg = config;
  cfg.mode = TrainMode::Supervised;
  cfg.validate();
  check_dataset_nonempty(pairs.size());
  std::vector<CloudData> data(pairs.size());
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    const auto& [noisy, clean] = pairs[c];
    if (noisy.empty()) throw DataError("training cloud " + std::to_string(c) + " is empty");
    if (clean.empty()) throw DataError("clean cloud for pair " + std::to_string(c) + " is empty");
    CloudData& cd = data[c];
    cd.cloud = &noisy;
    const auto ids = nearest_targets(noisy, clean);
    cd.fixed_targets.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) cd.fixed_targets[i] = clean.positions[ids[i]];
    if (cfg.repulsion_weight > 0.0) {
      const double diag = bbox_diagonal(noisy);
      const double pr = cfg.repulsion_radius_frac > 0.0 ? cfg.repulsion_radius_frac : cfg.prior_radius_frac;
      cd.patches = radius_patches(noisy.positions, pr * diag);
    }
  }
  return run_training(data, cfg, hooks, std::move(resume));
}

std::vector<Vec3> remove_low_frequency(std::span<const Vec3> displacements, std::span<const Vec3> positions,
                                       double radius) {
  if (!(radius > 0.0)) throw DataError("low-frequency radius must be > 0");
  if (displacements.size() != positions.size()) throw DataError("one displacement per point required");
  std::vector<Vec3> out(displacements.size());
  if (positions.empty()) return out;
  const NeighborIndex index(positions, radius);
  const double bw = 0.5 * radius;
  const double inv = 1.0 / (2.0 * bw * bw);
  parallel_for(positions.size(), [&](std::size_t i) {
    Vec3 acc = Vec3::Zero();
    double wsum = 0.0;
    index.for_each_within(positions[i], radius, [&](PointId j, double d2) {
      const double w = std::exp(-d2 * inv);
      acc += w * displacements[j];
      wsum += w;
    });
    out[i] = displacements[i] - acc / wsum;
  });
  return out;
}

DenoiseResult denoise(const ModelParams& params, const PointCloud& cloud, const DenoiseOptions& options) {
  if (options.iterations < 1) throw DataError("denoise iterations must be >= 1");
  if (!(options.lowfreq_radius_frac > 0.0)) throw DataError("low-frequency radius fraction must be > 0");
  DenoiseResult r;
  r.cloud = cloud;
  if (cloud.empty()) return r;
  const double diag = bbox_diagonal(cloud);
  const double radius = options.lowfreq_radius_frac * (diag > 0.0 ? diag : 1.0);
  for (int it = 0; it < options.iterations; ++it) {
    const auto d = predict_displacements(params, r.cloud.positions,
                                         ad::hash_combine(options.pool_seed, static_cast<std::uint64_t>(it)));
    const auto dh = remove_low_frequency(d, r.cloud.positions, radius);
    double mean = 0.0;
    for (std::size_t i = 0; i < dh.size(); ++i) {
      r.cloud.positions[i] += dh[i];
      mean += dh[i].norm();
    }
    r.mean_displacement.push_back(mean / static_cast<double>(dh.size()));
  }
  return r;
}

double fit_constant(std::span<const double> samples, const ConstantFitOptions& o,
                    std::vector<std::pair<double, double>>* trajectory) {
  if (samples.empty()) throw DataError("no samples to fit");
  if (o.steps < 1) throw DataError("fit needs at least one step");
  AdamConfig ac;
  ac.lr = o.lr;
  ac.decay = 0.5;
  ac.decay_interval = static_cast<std::uint64_t>(std::max(1, o.steps / 4));
  AdamState st = AdamState::for_size(1, ac);
  std::vector<double> c{o.init};
  if (trajectory) trajectory->clear();
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (int s = 0; s < o.steps; ++s) {
    const double t = o.steps > 1 ? static_cast<double>(s) / (o.steps - 1) : 0.0;
    const double gamma = o.gamma_start + (o.gamma_end - o.gamma_start) * t;
    double g = 0.0;
    if (gamma > 0.0) {
      for (double x : samples) {
        const double e = c[0] - x;
        if (e != 0.0) g += gamma * std::pow(std::abs(e) + o.eps, gamma - 1.0) * (e > 0 ? 1.0 : -1.0);
      }
    }
    const std::vector<double> grad{g * inv};
    adam_step(st, c, grad);
    if (trajectory) trajectory->emplace_back(gamma, c[0]);
  }
  return c[0];
}

}  // namespace tdn
