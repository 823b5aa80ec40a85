#include "doctest.h"

#include "tdnoise/config.hpp"
#include "tdnoise/error.hpp"

using namespace tdn;

TEST_CASE("defaults survive a dump / load round trip") {
  RunConfig a;
  RunConfig b;
  b.load_text(a.dump());
  CHECK(b.dump() == a.dump());
  CHECK(b.assigned().size() == RunConfig::keys().size());
}

TEST_CASE("every key has documentation and a readable value") {
  const RunConfig c;
  for (const auto& k : RunConfig::keys()) {
    CHECK_FALSE(k.doc.empty());
    CHECK_NOTHROW((void)c.get(k.name));
  }
}

TEST_CASE("values are parsed into the typed fields") {
  RunConfig c;
  c.load_text(R"(
# comment line
seed = 42
train.epochs = 12   # trailing comment
prior.kernel = wendland
prior.include_self = false
noise.origin = 1, 2.5, -3
filter.kind = bilateral
)");
  CHECK(c.train.seed == 42);
  CHECK(c.train.epochs == 12);
  CHECK(c.train.prior.kernel == KernelKind::Wendland);
  CHECK_FALSE(c.train.prior.include_self);
  CHECK(c.noise.origin == Vec3(1, 2.5, -3));
  CHECK(c.filter_kind == FilterKind::Bilateral);
  CHECK(c.assigned().count("seed") == 1);
  CHECK(c.any_assigned_with_prefix("prior."));
  CHECK_FALSE(c.any_assigned_with_prefix("arch."));
}

TEST_CASE("nocolor mode zeroes beta") {
  RunConfig c;
  c.set("train.mode", "nocolor");
  CHECK(c.train.mode == TrainMode::Unsupervised);
  CHECK(c.train.prior.beta == 0.0);
}

TEST_CASE("unknown keys and bad values are hard errors") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("train.epoch", "3"), ConfigError);
  CHECK_THROWS_AS(c.set("train.epochs", "three"), ConfigError);
  CHECK_THROWS_AS(c.set("train.epochs", "3x"), ConfigError);
  CHECK_THROWS_AS(c.set("prior.kernel", "cubic"), ConfigError);
  CHECK_THROWS_AS(c.set("prior.include_self", "maybe"), ConfigError);
  CHECK_THROWS_AS(c.set("noise.origin", "1,2"), ConfigError);
  CHECK_THROWS_AS(c.set("seed", ""), ConfigError);
  try {
    c.load_text("seed = 1\nbogus = 2\n", "run.cfg");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(c.load_text("just words\n"), ConfigError);
}

TEST_CASE("validation catches out-of-range values") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.set("train.epochs", "0");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  RunConfig d;
  d.set("noise.level", "-0.1");
  CHECK_THROWS_AS(d.validate(), ConfigError);
  RunConfig e;
  e.set("denoise.iterations", "0");
  CHECK_THROWS_AS(e.validate(), ConfigError);
}

TEST_CASE("noise settings map to a spec") {
  RunConfig c;
  c.set("noise.kind", "scanner");
  c.set("noise.level", "0.005");
  c.set("noise.bias", "0.002");
  const NoiseSpec s = c.noise.spec(9);
  REQUIRE(std::holds_alternative<ScannerNoise>(s.kind));
  CHECK(std::get<ScannerNoise>(s.kind).ray_std_frac == 0.005);
  CHECK(std::get<ScannerNoise>(s.kind).bias_std_frac == 0.002);
  CHECK(s.seed == 9);
}
