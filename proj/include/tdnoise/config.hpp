#pragma once

#include "tdnoise/eval.hpp"
#include "tdnoise/noise.hpp"
#include "tdnoise/train.hpp"

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tdn {

struct SampleSettings {
  std::size_t count = 5000;
  double min_dist = 0.0;  ///< absolute; > 0 overrides count
  bool shade = false;
};

struct NoiseSettings {
  std::string kind = "gaussian";  ///< gaussian | scanner
  double level = 0.01;            ///< per-coordinate / per-ray std, fraction of the diagonal
  double bias = 0.0;              ///< scanner per-ring bias std, fraction of the diagonal
  int rings = 64;
  Vec3 origin = Vec3::Zero();

  NoiseSpec spec(std::uint64_t seed) const;
};

struct PathSettings {
  std::string data;    ///< training / tuning directory
  std::string output;  ///< run directory
};

/// Flat key=value run configuration. Every key has a default; `set` throws
/// ConfigError on unknown keys or unparsable values.
struct RunConfig {
  TrainConfig train;  ///< also holds the prior, the architecture and the seed
  DenoiseOptions denoise;
  FilterKind filter_kind = FilterKind::Mean;
  FilterConfig filter{0.02, 0.01, 0.01, 1, MeanWeighting::Uniform};  ///< fractions of the diagonal
  NoiseSettings noise;
  SampleSettings sample;
  PathSettings paths;

  struct Key {
    std::string name;
    std::string doc;
  };
  static const std::vector<Key>& keys();

  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  /// Keys assigned through set() so far.
  const std::set<std::string>& assigned() const { return assigned_; }
  bool any_assigned_with_prefix(std::string_view prefix) const;

  /// `key = value` lines; blank lines and `#` comments are skipped.
  void load_text(std::string_view text, std::string_view origin = "<config>");
  void load_file(const std::filesystem::path& path);
  /// Every key with its resolved value, one per line, documented.
  std::string dump() const;
  void validate() const;

 private:
  std::set<std::string> assigned_;
};

}  // namespace tdn
