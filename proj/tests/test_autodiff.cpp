#include "doctest.h"

#include "tdnoise/autodiff.hpp"
#include "tdnoise/error.hpp"

#include <cmath>
#include <random>

using namespace tdn;
using ad::Matrix;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// loss = sum(coeff .* lrelu([X W + b | X]) * 0.5)
double small_graph_loss(const std::vector<double>& params, const Matrix& X, const Matrix& coeff,
                        std::vector<double>* grad = nullptr) {
  ad::Tape t;
  t.bind_parameters(params);
  const ad::Var x = t.constant(X);
  const ad::Var w = t.parameter(0, 2, 3);
  const ad::Var b = t.parameter(6, 1, 3);
  const ad::Var y = ad::scale(t, ad::leaky_relu(t, ad::concat_cols(t, ad::affine(t, x, w, b), x), 0.1), 0.5);
  if (grad) {
    t.backward(y, coeff);
    *grad = t.parameter_grad();
  }
  return t.value(y).cwiseProduct(coeff).sum();
}

}  // namespace

TEST_CASE("elementary ops match finite differences") {
  std::mt19937_64 rng(4);
  const Matrix X = random_matrix(5, 2, rng);
  const Matrix coeff = random_matrix(5, 5, rng);
  std::vector<double> p(9);
  for (double& v : p) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  std::vector<double> g;
  small_graph_loss(p, X, coeff, &g);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto q = p;
    q[i] += 1e-6;
    const double fp = small_graph_loss(q, X, coeff);
    q[i] -= 2e-6;
    const double fm = small_graph_loss(q, X, coeff);
    CHECK(g[i] == doctest::Approx((fp - fm) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("unused parameters get exactly zero gradient") {
  std::vector<double> p{1.0, 2.0, 3.0, 4.0};
  ad::Tape t;
  t.bind_parameters(p);
  const ad::Var used = t.parameter(0, 1, 2);
  t.parameter(2, 1, 2);  // recorded but not part of the output
  const ad::Var y = ad::scale(t, used, 3.0);
  t.backward(y, Matrix::Ones(1, 2));
  const auto& g = t.parameter_grad();
  CHECK(g[0] == 3.0);
  CHECK(g[1] == 3.0);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 0.0);
}

TEST_CASE("backward visits each reachable node once") {
  std::vector<double> p{1.0, -2.0};
  ad::Tape t;
  t.bind_parameters(p);
  const ad::Var a = t.parameter(0, 1, 2);
  // diamond: a feeds two branches joined by concat
  const ad::Var l = ad::scale(t, a, 2.0);
  const ad::Var r = ad::leaky_relu(t, a, 0.5);
  const ad::Var y = ad::concat_cols(t, l, r);
  t.constant(Matrix::Ones(1, 1));  // unreachable
  t.backward(y, Matrix::Ones(1, 4));
  CHECK(t.backward_visits() == 4);
  CHECK(t.parameter_grad()[0] == doctest::Approx(3.0));
  CHECK(t.parameter_grad()[1] == doctest::Approx(2.5));
}

TEST_CASE("shape errors are invariant violations") {
  ad::Tape t;
  const ad::Var x = t.constant(Matrix::Ones(2, 3));
  const ad::Var w = t.constant(Matrix::Ones(2, 2));
  const ad::Var b = t.constant(Matrix::Ones(1, 2));
  CHECK_THROWS_AS(ad::affine(t, x, w, b), InvariantError);
  CHECK_THROWS_AS(ad::concat_cols(t, x, t.constant(Matrix::Ones(3, 1))), InvariantError);
}

TEST_CASE("non-recording tape keeps no closures") {
  std::vector<double> p{1.0};
  ad::Tape t(false);
  t.bind_parameters(p);
  const ad::Var a = t.parameter(0, 1, 1);
  const ad::Var y = ad::scale(t, a, 2.0);
  CHECK(t.value(y)(0, 0) == 2.0);
  CHECK_FALSE(t.requires_grad(y));
  CHECK_THROWS_AS(t.backward(y, Matrix::Ones(1, 1)), InvariantError);
}

TEST_CASE("leaky relu signature tracks the branch pattern") {
  auto sig = [](double v) {
    ad::Tape t;
    ad::leaky_relu(t, t.constant(Matrix::Constant(1, 2, v)), 0.1);
    return t.signature();
  };
  CHECK(sig(0.5) == sig(0.7));
  CHECK(sig(0.5) != sig(-0.5));
}
