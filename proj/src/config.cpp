#include "tdnoise/config.hpp"

#include "tdnoise/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace tdn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                    std::string(expected));
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
template <typename Int>
std::string fmt_int(Int v) { return std::to_string(v); }

Vec3 to_vec3(std::string_view key, std::string_view v) {
  Vec3 out;
  std::size_t start = 0;
  for (int c = 0; c < 3; ++c) {
    const std::size_t comma = v.find(',', start);
    if ((c < 2) != (comma != std::string_view::npos)) bad_value(key, v, "x,y,z");
    out[c] = to_double(key, trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start)));
    start = comma + 1;
  }
  return out;
}

// DataError from the enum parsers becomes a ConfigError naming the key.
template <typename F>
auto as_config(std::string_view key, F&& f) {
  try {
    return f();
  } catch (const DataError& e) {
    throw ConfigError("config key '" + std::string(key) + "': " + e.what());
  }
}

struct Entry {
  std::string name;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define TDN_DOUBLE(key, field, text)                                                        \
  Entry{key, text, [](RunConfig& c, std::string_view v) { c.field = to_double(key, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }}
#define TDN_INT(key, field, type, text)                                                         \
  Entry{key, text, [](RunConfig& c, std::string_view v) { c.field = to_int<type>(key, v); }, \
        [](const RunConfig& c) { return fmt_int(c.field); }}
#define TDN_BOOL(key, field, text)                                                        \
  Entry{key, text, [](RunConfig& c, std::string_view v) { c.field = to_bool(key, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t{
        TDN_INT("seed", train.seed, std::uint64_t, "master seed (training, sampling, noise)"),

        Entry{"prior.kernel", "gaussian | wendland | imq",
              [](RunConfig& c, std::string_view v) {
                c.train.prior.kernel = as_config("prior.kernel", [&] { return parse_kernel(v); });
              },
              [](const RunConfig& c) { return std::string(to_string(c.train.prior.kernel)); }},
        TDN_DOUBLE("prior.radius_frac", train.prior_radius_frac, "support radius r, fraction of each cloud's diagonal"),
        TDN_DOUBLE("prior.alpha", train.prior.alpha, "spatial weight is 1 / (alpha r)"),
        TDN_DOUBLE("prior.beta", train.prior.beta, "appearance weight; 0 ignores colors"),
        TDN_DOUBLE("prior.sigma", train.prior.sigma, "Gaussian kernel bandwidth"),
        TDN_INT("prior.max_tries", train.prior.max_tries, int, "rejection attempts per point"),
        TDN_BOOL("prior.include_self", train.prior.include_self, "y itself is a prior candidate"),

        Entry{"train.mode", "unsupervised | supervised | noprior | nocolor",
              [](RunConfig& c, std::string_view v) {
                if (v == "nocolor") {
                  c.train.mode = TrainMode::Unsupervised;
                  c.train.prior.beta = 0.0;
                } else if (v == "full") {
                  c.train.mode = TrainMode::Unsupervised;
                } else {
                  c.train.mode = as_config("train.mode", [&] { return parse_train_mode(v); });
                }
              },
              [](const RunConfig& c) { return std::string(to_string(c.train.mode)); }},
        TDN_INT("train.epochs", train.epochs, int, "passes over the training set"),
        TDN_DOUBLE("train.lr", train.lr, "Adam learning rate"),
        TDN_DOUBLE("train.lr_decay", train.lr_decay, "learning-rate multiplier per decay interval"),
        TDN_DOUBLE("train.decay_every_frac", train.decay_every_frac, "decay interval, fraction of all steps"),
        TDN_DOUBLE("train.eps", train.eps, "epsilon inside the annealed L0 loss"),
        TDN_DOUBLE("train.gamma_start", train.gamma_start, "loss exponent at the first step"),
        TDN_DOUBLE("train.gamma_end", train.gamma_end, "loss exponent at the last step"),
        Entry{"train.loss", "l0 (annealed) | l2",
              [](RunConfig& c, std::string_view v) {
                c.train.loss = as_config("train.loss", [&] { return parse_loss_kind(v); });
              },
              [](const RunConfig& c) { return std::string(to_string(c.train.loss)); }},
        TDN_DOUBLE("train.repulsion_weight", train.repulsion_weight, "weight of the patch-spread regularizer"),
        TDN_DOUBLE("train.repulsion_sign", train.repulsion_sign, "+1 pulls patches together, -1 spreads them"),
        TDN_DOUBLE("train.repulsion_radius_frac", train.repulsion_radius_frac,
                   "patch radius, fraction of the diagonal; 0 uses the prior radius"),
        TDN_INT("train.eval_every", train.eval_every, int, "epochs between held-out evaluations"),

        TDN_DOUBLE("arch.receptive1", train.arch.levels[0].receptive_frac, "level-1 receptive radius, fraction of the diagonal"),
        TDN_DOUBLE("arch.pool1", train.arch.levels[0].pool_frac, "level-1 Poisson pooling radius"),
        TDN_INT("arch.width1", train.arch.levels[0].width, int, "level-1 feature width"),
        TDN_DOUBLE("arch.receptive2", train.arch.levels[1].receptive_frac, "level-2 receptive radius"),
        TDN_DOUBLE("arch.pool2", train.arch.levels[1].pool_frac, "level-2 Poisson pooling radius"),
        TDN_INT("arch.width2", train.arch.levels[1].width, int, "level-2 feature width"),
        TDN_INT("arch.kernel_hidden", train.arch.kernel_hidden, int, "hidden units of each kernel MLP"),
        TDN_DOUBLE("arch.leaky_slope", train.arch.leaky_slope, "leaky ReLU slope"),
        TDN_BOOL("arch.blind_spot", train.arch.blind_spot, "hide each point from its own level-1 neighbourhood"),

        TDN_INT("denoise.iterations", denoise.iterations, int, "test-time iterations"),
        TDN_DOUBLE("denoise.lowfreq_radius_frac", denoise.lowfreq_radius_frac,
                   "low-frequency removal radius, fraction of the diagonal"),

        Entry{"filter.kind", "mean | bilateral",
              [](RunConfig& c, std::string_view v) {
                if (v == "mean") c.filter_kind = FilterKind::Mean;
                else if (v == "bilateral") c.filter_kind = FilterKind::Bilateral;
                else bad_value("filter.kind", v, "mean or bilateral");
              },
              [](const RunConfig& c) { return std::string(c.filter_kind == FilterKind::Mean ? "mean" : "bilateral"); }},
        TDN_DOUBLE("filter.radius", filter.radius, "neighbourhood radius, fraction of the diagonal"),
        TDN_DOUBLE("filter.sigma_d", filter.sigma_d, "spatial bandwidth, fraction of the diagonal"),
        TDN_DOUBLE("filter.sigma_n", filter.sigma_n, "bilateral range bandwidth, fraction of the diagonal"),
        TDN_INT("filter.iterations", filter.iterations, int, "filter passes"),
        Entry{"filter.mean_weighting", "uniform | gaussian",
              [](RunConfig& c, std::string_view v) {
                if (v == "uniform") c.filter.mean_weighting = MeanWeighting::Uniform;
                else if (v == "gaussian") c.filter.mean_weighting = MeanWeighting::Gaussian;
                else bad_value("filter.mean_weighting", v, "uniform or gaussian");
              },
              [](const RunConfig& c) {
                return std::string(c.filter.mean_weighting == MeanWeighting::Uniform ? "uniform" : "gaussian");
              }},

        Entry{"noise.kind", "gaussian | scanner",
              [](RunConfig& c, std::string_view v) {
                if (v != "gaussian" && v != "scanner") bad_value("noise.kind", v, "gaussian or scanner");
                c.noise.kind = std::string(v);
              },
              [](const RunConfig& c) { return c.noise.kind; }},
        TDN_DOUBLE("noise.level", noise.level, "noise std, fraction of the diagonal"),
        TDN_DOUBLE("noise.bias", noise.bias, "scanner per-ring bias std, fraction of the diagonal"),
        TDN_INT("noise.rings", noise.rings, int, "scanner elevation rings"),
        Entry{"noise.origin", "scanner position x,y,z",
              [](RunConfig& c, std::string_view v) { c.noise.origin = to_vec3("noise.origin", v); },
              [](const RunConfig& c) {
                return fmt(c.noise.origin.x()) + "," + fmt(c.noise.origin.y()) + "," + fmt(c.noise.origin.z());
              }},

        TDN_INT("sample.count", sample.count, std::size_t, "target number of surface samples"),
        TDN_DOUBLE("sample.min_dist", sample.min_dist, "absolute Poisson-disk distance; > 0 overrides the count"),
        TDN_BOOL("sample.shade", sample.shade, "attach Lambertian colors"),

        Entry{"paths.data", "training / tuning directory",
              [](RunConfig& c, std::string_view v) { c.paths.data = std::string(v); },
              [](const RunConfig& c) { return c.paths.data; }},
        Entry{"paths.output", "run directory",
              [](RunConfig& c, std::string_view v) { c.paths.output = std::string(v); },
              [](const RunConfig& c) { return c.paths.output; }},
    };
    std::sort(t.begin(), t.end(), [](const Entry& a, const Entry& b) { return a.name < b.name; });
    return t;
  }();
  return table;
}

#undef TDN_DOUBLE
#undef TDN_INT
#undef TDN_BOOL

const Entry& find(std::string_view key) {
  const auto& t = entries();
  const auto it = std::lower_bound(t.begin(), t.end(), key, [](const Entry& e, std::string_view k) { return e.name < k; });
  if (it == t.end() || it->name != key) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return *it;
}

}  // namespace

NoiseSpec NoiseSettings::spec(std::uint64_t seed) const {
  NoiseSpec s;
  s.seed = seed;
  if (kind == "scanner") {
    ScannerNoise n;
    n.origin = origin;
    n.bias_std_frac = bias;
    n.ray_std_frac = level;
    n.ring_count = rings;
    s.kind = n;
  } else {
    s.kind = GaussianNoise{level};
  }
  return s;
}

const std::vector<RunConfig::Key>& RunConfig::keys() {
  static const std::vector<Key> k = [] {
    std::vector<Key> out;
    for (const Entry& e : entries()) out.push_back({e.name, e.doc});
    return out;
  }();
  return k;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const Entry& e = find(key);
  e.set(*this, trim(value));
  assigned_.insert(e.name);
}

std::string RunConfig::get(std::string_view key) const { return find(key).get(*this); }

bool RunConfig::any_assigned_with_prefix(std::string_view prefix) const {
  return std::any_of(assigned_.begin(), assigned_.end(),
                     [&](const std::string& k) { return k.rfind(prefix, 0) == 0; });
}

void RunConfig::load_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    try {
      set(trim(std::string_view(body).substr(0, eq)), std::string_view(body).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

std::string RunConfig::dump() const {
  std::string out = "# resolved configuration\n";
  for (const Entry& e : entries()) out += "# " + e.doc + "\n" + e.name + " = " + e.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  as_config("train", [&] { train.validate(); return 0; });
  if (denoise.iterations < 1) throw ConfigError("denoise.iterations must be >= 1");
  if (!(denoise.lowfreq_radius_frac > 0.0)) throw ConfigError("denoise.lowfreq_radius_frac must be > 0");
  as_config("filter", [&] { filter.validate(); return 0; });
  as_config("noise", [&] { noise.spec(train.seed).validate(); return 0; });
  if (sample.count == 0 && !(sample.min_dist > 0.0)) throw ConfigError("sample.count or sample.min_dist must be set");
}

}  // namespace tdn
