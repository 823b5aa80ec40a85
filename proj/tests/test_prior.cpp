#include "doctest.h"

#include "support/prior_oracle.hpp"
#include "tdnoise/error.hpp"
#include "tdnoise/parallel.hpp"
#include "tdnoise/prior.hpp"

#include <cmath>

using namespace tdn;

namespace {

// Closed forms written out independently of the library, in terms of the
// spatial distance d and spatial weight w = 1 / (alpha r).
double gaussian_of(double d, double w) { return std::exp(-(w * d) * (w * d) / 2.0); }
double wendland_of(double d, double w) {
  const double s = (w * d) * (w * d);
  return s >= 1.0 ? 0.0 : std::pow(1.0 - s, 4) * (1.0 + 4.0 * s);
}
double imq_of(double d, double w) {
  const double s = (w * d) * (w * d);
  return 1.0 / std::sqrt(1.0 + 25.0 * s * s);
}

PointCloud bicolor_plane(int n, double spacing) {
  PointCloud c;
  c.colors.emplace();
  for (int i = -n; i < n; ++i) {
    for (int j = -n; j < n; ++j) {
      const double x = (i + 0.5) * spacing;
      c.positions.emplace_back(x, (j + 0.5) * spacing, 0.0);
      c.colors->push_back(x < 0.0 ? Vec3(1, 0, 0) : Vec3(0, 0, 1));
    }
  }
  return c;
}

}  // namespace

TEST_CASE("every kernel is 1 at zero") {
  const std::vector<double> w3{20, 20, 20};
  const std::vector<double> d3{0, 0, 0};
  for (auto k : {KernelKind::Gaussian, KernelKind::Wendland, KernelKind::InverseMultiQuadric}) {
    CHECK(kernel_eval(k, w3, d3) == 1.0);
  }
}

TEST_CASE("kernel closed-form values") {
  const std::vector<double> unit{1, 1, 1};
  const std::vector<double> at_one{1, 0, 0};
  CHECK(kernel_eval(KernelKind::Wendland, unit, at_one) == 0.0);
  const double r = std::sqrt(2.0 * std::log(2.0));
  const std::vector<double> half{0, r, 0};
  CHECK(kernel_eval(KernelKind::Gaussian, unit, half) == doctest::Approx(0.5).epsilon(1e-12));
  const std::vector<double> d{0.3, 0.0, 0.4};
  CHECK(kernel_eval(KernelKind::InverseMultiQuadric, unit, d) == doctest::Approx(imq_of(0.5, 1.0)));
  CHECK(kernel_eval(KernelKind::Wendland, unit, d) == doctest::Approx(wendland_of(0.5, 1.0)));
  // sigma rescales the Gaussian only
  CHECK(kernel_eval(KernelKind::Gaussian, unit, d, 2.0) == doctest::Approx(gaussian_of(0.25, 1.0)));
}

TEST_CASE("kernel rejects dimension mismatch") {
  const std::vector<double> w{1, 1, 1};
  const std::vector<double> d{0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(kernel_eval(KernelKind::Gaussian, w, d), DataError);
}

TEST_CASE("make_weights layout") {
  PriorConfig cfg;
  cfg.alpha = 0.5;
  cfg.radius = 0.1;
  cfg.beta = 4.0;
  const auto w3 = make_weights(cfg, false);
  REQUIRE(w3.size() == 3);
  for (double v : w3) CHECK(v == doctest::Approx(20.0));
  const auto w6 = make_weights(cfg, true);
  REQUIRE(w6.size() == 6);
  CHECK(w6[2] == doctest::Approx(20.0));
  CHECK(w6[3] == 4.0);
  CHECK(w6[5] == 4.0);
}

TEST_CASE("config validation") {
  PriorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.radius = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = PriorConfig{};
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = PriorConfig{};
  cfg.beta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = PriorConfig{};
  cfg.max_tries = 0;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  CHECK(parse_kernel("imq") == KernelKind::InverseMultiQuadric);
  CHECK_THROWS_AS(parse_kernel("box"), DataError);
}

TEST_CASE("coincident neighbours are accepted on the first try") {
  PointCloud c;
  c.colors.emplace();
  for (int i = 0; i < 5; ++i) {
    c.positions.emplace_back(1, 2, 3);
    c.colors->emplace_back(0.2, 0.4, 0.6);
  }
  PriorConfig cfg;
  cfg.radius = 0.1;
  const NeighborIndex index = build_index(c, cfg.radius);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    auto s = sample_prior(c, index, 2, cfg, rng);
    REQUIRE(s);
    CHECK(s->rejections == 0);
    CHECK(s->color.has_value());
  }
}

TEST_CASE("isolated point yields no sample") {
  PointCloud c;
  c.positions = {Vec3(0, 0, 0), Vec3(5, 0, 0)};
  PriorConfig cfg;
  cfg.radius = 0.5;
  cfg.include_self = false;
  const NeighborIndex index = build_index(c, cfg.radius);
  std::mt19937_64 rng(1);
  CHECK_FALSE(sample_prior(c, index, 0, cfg, rng).has_value());
  cfg.include_self = true;
  auto s = sample_prior(c, index, 0, cfg, rng);
  REQUIRE(s);
  CHECK(s->id == 0);
}

TEST_CASE("acceptance ratio of two populations matches the kernel ratio") {
  const double r = 1.0;
  const double w = 1.0 / (0.5 * r);
  PointCloud c;
  c.positions.push_back(Vec3::Zero());
  const double d1 = 0.15, d2 = 0.4;
  for (int i = 0; i < 50; ++i) {
    const double a = 2.0 * M_PI * i / 50.0;
    c.positions.emplace_back(d1 * std::cos(a), d1 * std::sin(a), 0.0);
    c.positions.emplace_back(0.0, d2 * std::cos(a), d2 * std::sin(a));
  }
  PriorConfig cfg;
  cfg.radius = r;
  cfg.max_tries = 1;
  cfg.include_self = false;
  const NeighborIndex index = build_index(c, r);
  std::mt19937_64 rng(11);
  std::size_t n1 = 0, n2 = 0;
  for (int t = 0; t < 100000; ++t) {
    if (auto s = sample_prior(c, index, 0, cfg, rng)) {
      (std::abs(s->position.norm() - d1) < 1e-9 ? n1 : n2)++;
    }
  }
  const double expected = gaussian_of(d1, w) / gaussian_of(d2, w);
  CHECK(std::abs(static_cast<double>(n1) / static_cast<double>(n2) - expected) < 0.02);
}

TEST_CASE("per-shell acceptance follows each kernel") {
  const double r = 1.0;
  const double w = 1.0 / (0.5 * r);
  const auto shells = testing::make_shells(r, 10, 40, 3);
  struct Case {
    KernelKind kind;
    double (*f)(double, double);
  };
  for (const Case& k : {Case{KernelKind::Gaussian, gaussian_of}, Case{KernelKind::Wendland, wendland_of},
                        Case{KernelKind::InverseMultiQuadric, imq_of}}) {
    CAPTURE(to_string(k.kind));
    PriorConfig cfg;
    cfg.kernel = k.kind;
    cfg.radius = r;
    const auto stats = testing::shell_acceptance(shells, cfg, 100000, 17, [&](double d) { return k.f(d, w); });
    CHECK(stats.max_abs_error < 0.02);
  }
}

TEST_CASE("accepted samples stay within the radius") {
  const auto shells = testing::make_shells(2.0, 8, 30, 5);
  PriorConfig cfg;
  cfg.radius = 1.0;
  cfg.kernel = KernelKind::InverseMultiQuadric;
  const NeighborIndex index = build_index(shells.cloud, cfg.radius);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 5000; ++t) {
    const PointId y = static_cast<PointId>(t % shells.cloud.size());
    if (auto s = sample_prior(shells.cloud, index, y, cfg, rng)) {
      CHECK((s->position - shells.cloud.positions[y]).norm() <= cfg.radius);
    }
  }
}

TEST_CASE("large beta separates the two colors") {
  const auto c = bicolor_plane(10, 0.05);
  PriorConfig cfg;
  cfg.radius = 0.2;
  cfg.beta = 50.0;
  const NeighborIndex index = build_index(c, cfg.radius);
  // red point right next to the boundary
  PointId query = 0;
  for (PointId i = 0; i < c.size(); ++i) {
    if (std::abs(c.positions[i].x() + 0.025) < 1e-9 && std::abs(c.positions[i].y() - 0.025) < 1e-9) query = i;
  }
  REQUIRE((*c.colors)[query] == Vec3(1, 0, 0));
  std::mt19937_64 rng(21);
  int accepted = 0, red = 0;
  while (accepted < 10000) {
    if (auto s = sample_prior(c, index, query, cfg, rng)) {
      ++accepted;
      if (*s->color == Vec3(1, 0, 0)) ++red;
    }
  }
  CHECK(static_cast<double>(red) / accepted >= 0.999);
}

TEST_CASE("beta zero matches the colorless sequence exactly") {
  auto colored = bicolor_plane(8, 0.05);
  PointCloud plain;
  plain.positions = colored.positions;
  PriorConfig cfg;
  cfg.radius = 0.15;
  cfg.beta = 0.0;
  const NeighborIndex i1 = build_index(colored, cfg.radius);
  const NeighborIndex i2 = build_index(plain, cfg.radius);
  std::mt19937_64 r1(33), r2(33);
  for (int t = 0; t < 3000; ++t) {
    const PointId y = static_cast<PointId>((t * 37) % colored.size());
    auto a = sample_prior(colored, i1, y, cfg, r1);
    auto b = sample_prior(plain, i2, y, cfg, r2);
    REQUIRE(a.has_value() == b.has_value());
    if (a) {
      CHECK(a->id == b->id);
      CHECK(a->rejections == b->rejections);
    }
  }
}

TEST_CASE("batch sampling is independent of the thread count") {
  const auto c = bicolor_plane(12, 0.04);
  PriorConfig cfg;
  cfg.radius = 0.12;
  const NeighborIndex index = build_index(c, cfg.radius);
  set_thread_cap(1);
  const auto a = sample_prior_batch(c, index, cfg, 99);
  set_thread_cap(4);
  const auto b = sample_prior_batch(c, index, cfg, 99);
  set_thread_cap(0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].has_value() == b[i].has_value());
    if (a[i]) CHECK(a[i]->id == b[i]->id);
  }
}
