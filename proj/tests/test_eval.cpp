#include "doctest.h"

#include "support/circle_oracle.hpp"
#include "support/mesh_oracle.hpp"
#include "tdnoise/cloud.hpp"
#include "tdnoise/error.hpp"
#include "tdnoise/eval.hpp"
#include "tdnoise/shapes.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace tdn;
using namespace tdn::testing;

TEST_CASE("closest point on a triangle, region by region") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  CHECK((closest_point_on_triangle(Vec3(0.2, 0.2, 1), a, b, c) - Vec3(0.2, 0.2, 0)).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Vec3(0, 0, 1), a, b, c) - a).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Vec3(-1, -1, 0), a, b, c) - a).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Vec3(2, -1, 0), a, b, c) - b).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Vec3(0.5, -1, 0), a, b, c) - Vec3(0.5, 0, 0)).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Vec3(1, 1, 0), a, b, c) - Vec3(0.5, 0.5, 0)).norm() < 1e-15);
  CHECK((closest_point_on_triangle(Vec3(-3, 0.4, 2), a, b, c) - Vec3(0, 0.4, 0)).norm() < 1e-15);
}

TEST_CASE("point above the unit triangle is at distance one") {
  TriangleMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.triangles = {{0, 1, 2}};
  const TriangleGrid g(m);
  CHECK(point_to_mesh_distance(Vec3(0, 0, 1), m, g) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("grid distance equals the all-triangle oracle") {
  const TriangleMesh m = random_soup(200, 3);
  const TriangleGrid g(m);
  const PointCloud q = random_cloud(1000, 1.5, 4);
  for (const Vec3& p : q.positions) CHECK(std::abs(point_to_mesh_distance(p, m, g) - mesh_dist_oracle(p, m)) < 1e-12);
  const TriangleMesh other = random_soup(5, 1);
  CHECK_THROWS_AS(point_to_mesh_distance(Vec3::Zero(), other, g), InvariantError);
}

TEST_CASE("grid distance on closed shapes, far and near") {
  for (const char* name : {"sphere", "torus", "cube"}) {
    const TriangleMesh m = shapes::by_name(name);
    const TriangleGrid g(m);
    const PointCloud q = random_cloud(200, 3.0, 7);
    for (const Vec3& p : q.positions) CHECK(std::abs(g.distance(p) - mesh_dist_oracle(p, m)) < 1e-12);
  }
}

TEST_CASE("chamfer equals the brute-force oracle on 500 points and 200 triangles") {
  const TriangleMesh m = random_soup(200, 11);
  const PointCloud pred = random_cloud(500, 1.2, 12);
  const PointCloud clean = random_cloud(500, 1.0, 13);
  const EvalReport r = chamfer(pred, m, clean);
  CHECK(std::abs(r.chamfer - chamfer_oracle(pred, m, clean)) < 1e-9);
  CHECK(r.chamfer == doctest::Approx(r.term1 + r.term2));
  CHECK(r.distances.size() == pred.size());
}

TEST_CASE("shifted plane samples are at the shift distance") {
  const TriangleMesh m = shapes::plane(1.0, 4);
  const double h = 0.01;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud clean, pred;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(u(rng), u(rng), 0.0);
    clean.positions.push_back(p);
    pred.positions.push_back(p + Vec3(0, 0, h));
  }
  const EvalReport r = chamfer(pred, m, clean);
  CHECK(r.term1 == doctest::Approx(h).epsilon(1e-9));
  CHECK(r.term2 == doctest::Approx(h).epsilon(0.02));
  CHECK(r.chamfer == doctest::Approx(2 * h).epsilon(0.02));
}

TEST_CASE("chamfer is rigid invariant") {
  const TriangleMesh m = shapes::by_name("torus");
  const PointCloud clean = poisson_disk_sample(m, 0.05, 1);
  const PointCloud pred = random_cloud(300, 0.8, 5);
  const double d0 = chamfer(pred, m, clean).chamfer;
  const Eigen::Matrix3d R = Eigen::AngleAxisd(1.1, Vec3(0.3, -1, 2).normalized()).toRotationMatrix();
  const Vec3 t(4, -1, 2);
  auto move = [&](PointCloud c) {
    for (Vec3& p : c.positions) p = R * p + t;
    return c;
  };
  TriangleMesh mm = m;
  for (Vec3& v : mm.vertices) v = R * v + t;
  CHECK(chamfer(move(pred), mm, move(clean)).chamfer == doctest::Approx(d0).epsilon(1e-10));
}

TEST_CASE("chamfer input errors") {
  const TriangleMesh m = shapes::plane();
  PointCloud one;
  one.positions = {Vec3(0.5, 0.5, 0)};
  CHECK_THROWS_AS(chamfer(PointCloud{}, m, one), DataError);
  CHECK_THROWS_AS(chamfer(one, m, PointCloud{}), DataError);
  CHECK(chamfer_sampled(one, one).chamfer == 0.0);
}

TEST_CASE("error histogram") {
  SUBCASE("zeros land in the first bin") {
    const std::vector<double> d(50, 0.0);
    const Histogram h = error_histogram(d, 1.0, 10);
    CHECK(h.counts.size() == 11);
    CHECK(h.edges.size() == 11);
    CHECK(h.counts[0] == 50);
    CHECK(h.total() == 50);
  }
  SUBCASE("overflow bin") {
    const std::vector<double> d{0.02, 0.5, 0.019};
    const Histogram h = error_histogram(d, 1.0, 4);
    CHECK(h.counts.back() == 2);
    CHECK(h.counts[3] == 1);
  }
  SUBCASE("uniform distances fill bins uniformly") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 0.04);
    std::vector<double> d(20000);
    for (double& v : d) v = u(rng);
    const Histogram h = error_histogram(d, 2.0, 20);
    CHECK(h.total() == d.size());
    const double expected = d.size() / 20.0;
    double chi2 = 0.0;
    for (int b = 0; b < 20; ++b) chi2 += std::pow(h.counts[b] - expected, 2) / expected;
    CHECK(chi2 < 43.8);  // 99.9% quantile, 19 dof
    CHECK(h.counts.back() == 0);
  }
  CHECK_THROWS_AS(error_histogram(std::vector<double>{1.0}, 0.0, 4), DataError);
  CHECK_THROWS_AS(error_histogram(std::vector<double>{1.0}, 1.0, 0), DataError);
}

TEST_CASE("report serialization") {
  const TriangleMesh m = shapes::plane();
  PointCloud c;
  c.positions = {Vec3(0.1, 0.1, 0.01), Vec3(0.9, 0.9, 0.0)};
  const EvalReport r = chamfer(c, m, c, 4);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["chamfer"].get<double>() == doctest::Approx(r.chamfer));
  CHECK(j["histogram"]["counts"].size() == 5);
  const std::string csv = r.distances_csv();
  CHECK(csv.rfind("index,distance,fraction_of_diagonal\n", 0) == 0);
  CHECK(r.histogram_csv().find(",inf,") != std::string::npos);
}

TEST_CASE("error colours run from blue to yellow") {
  CHECK(error_color(0.0, 1.0) == Vec3(0, 0, 1));
  CHECK(error_color(0.02, 1.0) == Vec3(1, 1, 0));
  CHECK(error_color(5.0, 1.0) == Vec3(1, 1, 0));
  CHECK((error_color(0.01, 1.0) - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12);
  PointCloud c;
  c.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const std::vector<double> d{0.0, 1.0};
  const PointCloud col = error_colorize(c, d, 1.0);
  REQUIRE(col.colors);
  CHECK((*col.colors)[0] == Vec3(0, 0, 1));
}

TEST_CASE("mode manifold of a noisy plane is the plane") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 0.02);
  PointCloud c;
  for (int i = 0; i < 5000; ++i) c.positions.emplace_back(u(rng), u(rng), g(rng));
  std::vector<Vec3> seeds;
  for (int i = 0; i < 50; ++i) seeds.emplace_back(0.3 + 0.4 * u(rng), 0.3 + 0.4 * u(rng), 0.05);
  const ModeResult r = mode_manifold(c, 0.05, seeds);
  CHECK(r.modes.size() + r.non_converged == seeds.size());
  REQUIRE(r.modes.size() > 40);
  for (const Vec3& m : r.modes) CHECK(std::abs(m.z()) < 0.01);
}

TEST_CASE("blurred circle maximizer against quadrature") {
  for (double s : {0.01, 0.1, 0.3, 0.5, 0.8}) {
    CHECK(circle_mode_radius(1.0, s) == doctest::Approx(oracle_mode_radius(1.0, s)).epsilon(1e-6));
  }
  CHECK(circle_mode_radius(1.0, 0.3) < 1.0);
  CHECK(circle_mode_radius(1.0, 0.01) == doctest::Approx(1.0).epsilon(0.005));
  CHECK(circle_mode_radius(2.0, 0.2) == doctest::Approx(2.0 * circle_mode_radius(1.0, 0.1)).epsilon(1e-9));
  // past sigma = R / sqrt(2) the maximizer is the centre
  CHECK(circle_mode_radius(1.0, 2.0) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("mean shift on a sigma = 0.3 circle finds the blurred maximizer") {
  const double sigma = 0.3, h = 0.1;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi);
  std::normal_distribution<double> g(0.0, sigma);
  PointCloud c;
  for (int i = 0; i < 20000; ++i) {
    const double t = ang(rng);
    c.positions.emplace_back(std::cos(t) + g(rng), std::sin(t) + g(rng), 0.0);
  }
  std::vector<Vec3> seeds;
  for (int i = 0; i < 100; ++i) {
    const double t = 2 * std::numbers::pi * i / 100;
    seeds.emplace_back(std::cos(t), std::sin(t), 0.0);
  }
  const ModeResult r = mode_manifold(c, h, seeds);
  REQUIRE(r.modes.size() > 80);
  double mean = 0.0;
  for (const Vec3& m : r.modes) mean += m.norm();
  mean /= static_cast<double>(r.modes.size());
  // the KDE is the data blurred once more by the bandwidth
  const double expected = oracle_mode_radius(1.0, std::hypot(sigma, h));
  CHECK(std::abs(mean - expected) < 0.02 * expected);
}

TEST_CASE("mean nearest distance") {
  const std::vector<Vec3> a{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const std::vector<Vec3> b{Vec3(0, 0, 0.5)};
  CHECK(mean_nearest_distance(a, b) == doctest::Approx((0.5 + std::sqrt(1.25)) / 2));
}

TEST_CASE("filter tuning picks the best grid entry") {
  const TriangleMesh m = shapes::plane(1.0, 2);
  const PointCloud clean = poisson_disk_sample(m, 0.02, 1);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.01);
  PointCloud noisy = clean;
  for (Vec3& p : noisy.positions) p.z() += g(rng);
  const std::vector<EvalCase> cases{{noisy, m, clean}};
  const FilterTuning t = tune_filter(cases, FilterKind::Mean);
  CHECK(t.chamfer < chamfer(noisy, m, clean).chamfer);
  CHECK(t.chamfer == doctest::Approx(chamfer(apply_filter(noisy, FilterKind::Mean, t.config), m, clean).chamfer));
}
