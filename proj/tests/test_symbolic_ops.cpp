#include <doctest.h>

#include <cmath>

#include "espl/rng.hpp"
#include "espl/symbolic_ops.hpp"

using namespace espl;

namespace {

OpResult ap(OperatorKind k, std::initializer_list<double> in) {
  return espl::apply(k, std::span<const double>(in.begin(), in.size()));
}

}  // namespace

TEST_SUITE("symbolic_ops") {

TEST_CASE("piecewise golden values") {
  auto div = ap(OperatorKind::Div, {1.0, 0.005});
  CHECK(div.output == 0.0);
  CHECK(div.penalty == doctest::Approx(0.005));

  auto expv = ap(OperatorKind::Exp, {5.0});
  CHECK(expv.output == std::exp(4.0));
  CHECK(expv.penalty == 1.0);

  auto mul = ap(OperatorKind::Mul, {200.0, 2.0});
  CHECK(mul.output == 200.0);
  CHECK(mul.penalty == 100.0);

  auto logv = ap(OperatorKind::Log, {0.0005});
  CHECK(logv.output == std::log(0.001));
  CHECK(logv.penalty == doctest::Approx(0.0005));

  auto cond = ap(OperatorKind::Cond, {0.0, 3.0, 7.0});
  CHECK(cond.output == 5.0);
  CHECK(cond.penalty == 0.0);
}

TEST_CASE("boundary points bit-match the formulas") {
  // Div takes the quotient branch exactly at the bound
  CHECK(ap(OperatorKind::Div, {1.0, 0.01}).output == 1.0 / 0.01);
  CHECK(ap(OperatorKind::Div, {1.0, 0.01}).penalty == 0.0);
  CHECK(ap(OperatorKind::Div, {1.0, std::nextafter(0.01, 0.0)}).output == 0.0);

  CHECK(ap(OperatorKind::Exp, {4.0}).output == std::exp(4.0));
  CHECK(ap(OperatorKind::Exp, {4.0}).penalty == 0.0);
  CHECK(ap(OperatorKind::Exp, {-10.0}).output == std::exp(-10.0));
  CHECK(ap(OperatorKind::Exp, {-10.0}).penalty == 0.0);

  CHECK(ap(OperatorKind::Log, {0.001}).output == std::log(0.001));
  CHECK(ap(OperatorKind::Log, {0.001}).penalty == 0.0);

  CHECK(ap(OperatorKind::Mul, {100.0, -100.0}).output == -10000.0);
  CHECK(ap(OperatorKind::Mul, {100.0, -100.0}).penalty == 0.0);
}

TEST_CASE("outputs stay finite under extreme inputs") {
  RngStream rng(11);
  auto extreme = [&rng]() {
    switch (rng.integer(4)) {
      case 0: return rng.uniform(-1e12, 1e12);
      case 1: return rng.uniform(-2.0, 2.0);
      case 2: return rng.uniform(-1e-9, 1e-9);
      default: return rng.bernoulli(0.5) ? 1e12 : -1e12;
    }
  };
  const OperatorKind kinds[] = {OperatorKind::Mul, OperatorKind::Div, OperatorKind::Sin,
                                OperatorKind::Cos, OperatorKind::Exp, OperatorKind::Log,
                                OperatorKind::Ident, OperatorKind::Cond};
  int checked = 0;
  while (checked < 1'000'000) {
    for (OperatorKind k : kinds) {
      double in[3] = {extreme(), extreme(), extreme()};
      OpResult r = espl::apply(k, std::span<const double>(in, arity(k)));
      if (!std::isfinite(r.output) || !std::isfinite(r.penalty) || r.penalty < 0.0) {
        CAPTURE(op_name(k));
        REQUIRE(false);
      }
      ++checked;
    }
  }
  CHECK(checked >= 1'000'000);
}

TEST_CASE("penalty is zero iff regularized and plain forms agree") {
  RngStream rng(13);
  for (int i = 0; i < 20000; ++i) {
    double in[3] = {rng.uniform(-150.0, 150.0), rng.uniform(-0.5, 0.5), rng.uniform(-2.0, 2.0)};
    for (OperatorKind k : {OperatorKind::Mul, OperatorKind::Div, OperatorKind::Exp,
                           OperatorKind::Log, OperatorKind::Sin, OperatorKind::Cos}) {
      std::span<const double> args(in, arity(k));
      OpResult r = espl::apply(k, args);
      const double p = apply_plain(k, args);
      const bool agree = r.output == p || (std::isfinite(p) && std::abs(r.output - p) == 0.0);
      if (r.penalty == 0.0)
        CHECK(agree);
      else
        CHECK_FALSE(agree);
    }
  }
}

TEST_CASE("penalties are continuous and piecewise linear") {
  auto pen = [](OperatorKind k, double x, double second = 1.0) {
    double in[2] = {x, second};
    if (k == OperatorKind::Div) {
      in[0] = second;
      in[1] = x;
    }
    return espl::apply(k, std::span<const double>(in, arity(k))).penalty;
  };
  const double eps = 1e-9;
  for (double boundary : {100.0, -100.0})
    CHECK(std::abs(pen(OperatorKind::Mul, boundary + eps) - pen(OperatorKind::Mul, boundary - eps)) <
          1e-8);
  CHECK(std::abs(pen(OperatorKind::Div, 0.01 + eps) - pen(OperatorKind::Div, 0.01 - eps)) < 1e-8);
  for (double boundary : {4.0, -10.0})
    CHECK(std::abs(pen(OperatorKind::Exp, boundary + eps) - pen(OperatorKind::Exp, boundary - eps)) <
          1e-8);
  CHECK(std::abs(pen(OperatorKind::Log, 0.001 + eps) - pen(OperatorKind::Log, 0.001 - eps)) < 1e-8);

  // linear slopes away from the kink
  CHECK(pen(OperatorKind::Exp, 6.0) - pen(OperatorKind::Exp, 5.0) == doctest::Approx(1.0));
  CHECK(pen(OperatorKind::Mul, 103.0) - pen(OperatorKind::Mul, 102.0) == doctest::Approx(1.0));
}

TEST_CASE("tape apply matches scalar apply") {
  RngStream rng(17);
  for (int i = 0; i < 2000; ++i) {
    double in[3] = {rng.uniform(-120.0, 120.0), rng.uniform(-0.1, 0.1), rng.uniform(-5.0, 5.0)};
    for (OperatorKind k : {OperatorKind::Mul, OperatorKind::Div, OperatorKind::Sin,
                           OperatorKind::Cos, OperatorKind::Exp, OperatorKind::Log,
                           OperatorKind::Ident, OperatorKind::Cond}) {
      ad::Tape t;
      std::vector<ad::Var> vars;
      for (int j = 0; j < arity(k); ++j) vars.push_back(t.leaf(Mat::Constant(1, 1, in[j])));
      OpVarResult tape_result = espl::apply(t, k, vars);
      OpResult scalar = espl::apply(k, std::span<const double>(in, arity(k)));
      CHECK(tape_result.output.value()(0, 0) == doctest::Approx(scalar.output).epsilon(1e-12));
      const double tape_pen =
          tape_result.penalty ? tape_result.penalty->value()(0, 0) : 0.0;
      CHECK(tape_pen == doctest::Approx(scalar.penalty).epsilon(1e-12));
    }
  }
}

TEST_CASE("operator tags round-trip") {
  for (OperatorKind k : {OperatorKind::Mul, OperatorKind::Div, OperatorKind::Sin,
                         OperatorKind::Cos, OperatorKind::Exp, OperatorKind::Log,
                         OperatorKind::Ident, OperatorKind::Cond})
    CHECK(op_from_name(op_name(k)) == k);
  CHECK_THROWS_AS(op_from_name("pow"), EsplError);
}

TEST_CASE("arity is fixed per tag") {
  CHECK(arity(OperatorKind::Mul) == 2);
  CHECK(arity(OperatorKind::Div) == 2);
  CHECK(arity(OperatorKind::Cond) == 3);
  for (OperatorKind k :
       {OperatorKind::Sin, OperatorKind::Cos, OperatorKind::Exp, OperatorKind::Log,
        OperatorKind::Ident})
    CHECK(arity(k) == 1);
  CHECK_THROWS_AS(ap(OperatorKind::Mul, {1.0}), EsplError);
}

}  // TEST_SUITE
