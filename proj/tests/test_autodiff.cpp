#include <doctest.h>

#include <cmath>

#include "espl/autodiff.hpp"
#include "espl/rng.hpp"
#include "espl/symbolic_ops.hpp"

using namespace espl;
using ad::Tape;
using ad::Var;

TEST_SUITE("autodiff") {

TEST_CASE("elementwise add") {
  Tape t;
  Mat a(2, 1), b(2, 1);
  a << 1, 2;
  b << 3, 4;
  Var out = ad::add(t.leaf(a), t.leaf(b));
  CHECK(out.value()(0, 0) == 4.0);
  CHECK(out.value()(1, 0) == 6.0);
}

TEST_CASE("product rule") {
  Tape t;
  Var x = t.leaf(Mat::Constant(1, 1, 3.0));
  Var y = t.leaf(Mat::Constant(1, 1, 5.0));
  Var out = ad::mul(x, y);
  t.backward(out);
  CHECK(x.grad()(0, 0) == 5.0);
  CHECK(y.grad()(0, 0) == 3.0);
}

TEST_CASE("sine derivative at zero") {
  Tape t;
  Var x = t.leaf(Mat::Zero(1, 1));
  t.backward(ad::sin(x));
  CHECK(x.grad()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("stop_gradient blocks upstream flow") {
  Tape t;
  Var x = t.leaf(Mat::Constant(1, 1, 2.0));
  Var y = ad::mul(ad::stop_gradient(ad::square(x)), 3.0);
  CHECK(y.value()(0, 0) == 12.0);
  t.backward(y);
  CHECK(x.grad()(0, 0) == 0.0);
}

TEST_CASE("indicator is inclusive with zero gradient") {
  Tape t;
  Var x = t.leaf(Mat::Constant(1, 1, 0.5));
  Var ind = ad::indicator_ge(x, 0.5);
  CHECK(ind.value()(0, 0) == 1.0);
  Var out = ad::mul(ind, x);
  t.backward(out);
  CHECK(x.grad()(0, 0) == 1.0);  // only the direct x path; none through the indicator
}

TEST_CASE("backward rejects non-scalar outputs") {
  Tape t;
  Var x = t.leaf(Mat::Ones(2, 2));
  CHECK_THROWS_AS(t.backward(x), EsplError);
}

TEST_CASE("shape mismatch errors name the op and shapes") {
  Tape t;
  Var a = t.leaf(Mat::Ones(2, 3));
  Var b = t.leaf(Mat::Ones(3, 2));
  CHECK_THROWS_WITH_AS(ad::add(a, b), "add: shape mismatch (2x3 vs 3x2)", EsplError);
}

TEST_CASE("backward is deterministic given the tape") {
  RngStream rng(7);
  Tape t;
  Mat m(4, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.gaussian();
  Var x = t.leaf(m);
  Var out = ad::mean_all(ad::mul(ad::sin(x), ad::exp(ad::mul(x, 0.5))));
  t.backward(out);
  Mat g1 = x.grad();
  t.backward(out);
  Mat g2 = x.grad();
  CHECK((g1.array() == g2.array()).all());
}

TEST_CASE("grad_check: quadratic is exact to rounding") {
  auto f = [](Tape& t, const std::vector<Var>& xs) { return ad::sum_all(ad::square(xs[0])); };
  CHECK(ad::grad_check(f, {Mat::Constant(1, 1, 2.0)}, 1e-5) < 1e-6);
}

TEST_CASE("grad_check: regularized div below the bound has zero gradient in a") {
  // div(a, b) at b = 0.005: output is identically 0 in a
  auto f = [](Tape& t, const std::vector<Var>& xs) {
    std::vector<Var> in = {xs[0], t.constant(Mat::Constant(1, 1, 0.005))};
    return ad::sum_all(espl::apply(t, OperatorKind::Div, in).output);
  };
  Tape t;
  std::vector<Var> leaves = {t.leaf(Mat::Constant(1, 1, 1.0))};
  Var out = f(t, leaves);
  CHECK(out.value()(0, 0) == 0.0);
  t.backward(out);
  CHECK(leaves[0].grad()(0, 0) == 0.0);
  CHECK(ad::grad_check(f, {Mat::Constant(1, 1, 1.0)}, 1e-5) < 1e-12);
}

TEST_CASE("random three-layer compositions match finite differences") {
  // 100 random seeds per the derived oracle
  for (int seed = 0; seed < 100; ++seed) {
    RngStream rng(seed + 1);
    Mat w1(3, 2), w2(3, 3), w3(1, 3), x0(2, 1);
    for (Mat* m : {&w1, &w2, &w3, &x0})
      for (Eigen::Index i = 0; i < m->size(); ++i) (*m)(i) = rng.uniform(-1.0, 1.0);
    auto f = [](Tape& t, const std::vector<Var>& xs) {
      Var h1 = ad::tanh(ad::matmul(xs[0], xs[3]));
      Var h2 = ad::sin(ad::matmul(xs[1], h1));
      Var h3 = ad::matmul(xs[2], ad::exp(ad::mul(h2, 0.5)));
      return ad::sum_all(h3);
    };
    CHECK(ad::grad_check(f, {w1, w2, w3, x0}, 1e-5) < 1e-4);
  }
}

TEST_CASE("primitive gradients match finite differences away from kinks") {
  RngStream rng(42);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    Mat a(3, 2), b(3, 2);
    auto draw = [&rng]() {
      // magnitudes in (0.2, 0.9) or (1.15, 2.0): clear of the clamp kinks at
      // 1.0 and the min/max kink at 0.1 by far more than 10h
      const double mag = rng.bernoulli(0.5) ? rng.uniform(0.2, 0.9) : rng.uniform(1.15, 2.0);
      return mag * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    };
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a(i) = draw();
      b(i) = draw();
    }
    Mat apos = a.array().abs() + 0.5;

    auto check1 = [&](auto build, const Mat& point) {
      auto f = [&](Tape& t, const std::vector<Var>& xs) { return ad::sum_all(build(t, xs[0])); };
      CHECK(ad::grad_check(f, {point}, h) < 1e-4);
    };
    check1([](Tape&, Var x) { return ad::sin(x); }, a);
    check1([](Tape&, Var x) { return ad::cos(x); }, a);
    check1([](Tape&, Var x) { return ad::exp(x); }, a);
    check1([](Tape&, Var x) { return ad::log(x); }, apos);
    check1([](Tape&, Var x) { return ad::sqrt(x); }, apos);
    check1([](Tape&, Var x) { return ad::square(x); }, a);
    check1([](Tape&, Var x) { return ad::tanh(x); }, a);
    check1([](Tape&, Var x) { return ad::sigmoid(x); }, a);
    check1([](Tape&, Var x) { return ad::softplus(x); }, a);
    check1([](Tape&, Var x) { return ad::neg(x); }, a);
    check1([](Tape&, Var x) { return ad::clamp(x, -1.0, 1.0); }, a);
    check1([](Tape&, Var x) { return ad::max(x, 0.1); }, a);
    check1([](Tape&, Var x) { return ad::min(x, 0.1); }, a);
    check1([](Tape&, Var x) { return ad::mul(x, -2.5); }, a);
    check1([](Tape&, Var x) { return ad::reshape(x, 2, 3); }, a);
    check1([](Tape&, Var x) { return ad::rows(x, 1, 2); }, a);
    check1([](Tape&, Var x) { return ad::cols(x, 0, 1); }, a);
    check1([](Tape&, Var x) { return ad::sum_over_rows(x); }, a);
    check1([](Tape&, Var x) { return ad::sum_over_cols(x); }, a);
    check1([](Tape&, Var x) { return ad::mean_all(x); }, a);

    auto check2 = [&](auto build, const Mat& pa, const Mat& pb) {
      auto f = [&](Tape& t, const std::vector<Var>& xs) {
        return ad::sum_all(build(t, xs[0], xs[1]));
      };
      CHECK(ad::grad_check(f, {pa, pb}, h) < 1e-4);
    };
    check2([](Tape&, Var x, Var y) { return ad::add(x, y); }, a, b);
    check2([](Tape&, Var x, Var y) { return ad::sub(x, y); }, a, b);
    check2([](Tape&, Var x, Var y) { return ad::mul(x, y); }, a, b);
    check2([](Tape&, Var x, Var y) { return ad::div(x, y); }, a, b);
    check2([](Tape&, Var x, Var y) { return ad::min(x, y); }, a, b);
    check2([](Tape&, Var x, Var y) { return ad::max(x, y); }, a, b);
    check2([](Tape&, Var x, Var y) { return ad::matmul(x, ad::reshape(y, 2, 3)); }, a, b);
    // column broadcast
    Mat col = b.col(0);
    check2([](Tape&, Var x, Var y) { return ad::add(x, y); }, a, col);
    check2([](Tape&, Var x, Var y) { return ad::mul(x, y); }, a, col);
    check2([](Tape&, Var x, Var y) { return ad::sub(x, y); }, a, col);

    auto fconcat = [](Tape& t, const std::vector<Var>& xs) {
      return ad::sum_all(ad::square(ad::concat_rows({xs[0], xs[1]})));
    };
    CHECK(ad::grad_check(fconcat, {a, b}, h) < 1e-4);
    auto frepeat = [](Tape& t, const std::vector<Var>& xs) {
      return ad::sum_all(ad::square(ad::repeat_cols(xs[0], 4)));
    };
    CHECK(ad::grad_check(frepeat, {Mat(col)}, h) < 1e-4);
    auto fgauss = [](Tape& t, const std::vector<Var>& xs) {
      return ad::sum_all(ad::gaussian_log_density(xs[0], xs[1], ad::mul(xs[2], 0.5)));
    };
    CHECK(ad::grad_check(fgauss, {a, b, Mat(a + b)}, h) < 1e-4);
  }
}

TEST_CASE("kink ties route gradient to the second operand") {
  Tape t;
  Var x = t.leaf(Mat::Constant(1, 1, 100.0));
  // hinge max(x - 100, 0): exactly at the boundary the penalty side stays flat
  Var hinge = ad::max(ad::sub(x, 100.0), 0.0);
  t.backward(hinge);
  CHECK(x.grad()(0, 0) == 0.0);

  Tape t2;
  Var a = t2.leaf(Mat::Constant(1, 1, 1.0));
  Var b = t2.leaf(Mat::Constant(1, 1, 1.0));
  t2.backward(ad::max(a, b));
  CHECK(a.grad()(0, 0) == 0.0);
  CHECK(b.grad()(0, 0) == 1.0);
}

TEST_CASE("grad_check reports non-finite evaluations") {
  auto f = [](Tape& t, const std::vector<Var>& xs) { return ad::sum_all(ad::log(xs[0])); };
  CHECK_THROWS_AS(ad::grad_check(f, {Mat::Constant(1, 1, 0.0)}, 1e-3), EsplError);
}

}  // TEST_SUITE
