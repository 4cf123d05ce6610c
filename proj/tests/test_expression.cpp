#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "espl/expression.hpp"
#include "espl/rng.hpp"

using namespace espl;

namespace {

ExprPtr cartpole_expr() {
  return make_affine({{17.17, make_var(2)}, {1.2, make_var(3)}}, 0.0);
}

ExprPtr mountaincar_expr() {
  ExprPtr inner = make_affine({{9.73, make_var(1)}}, -0.18);
  ExprPtr sin_term = make_op(OperatorKind::Sin, {inner}, false);
  return make_affine({{8.06, sin_term}}, 1.26);
}

ExprPtr pendulum_expr() {
  ExprPtr left = make_affine({{4.27, make_var(0)}}, 0.62);
  ExprPtr right = make_affine({{1.9, make_var(1)}, {0.42, make_var(2)}}, 0.0);
  ExprPtr prod = make_op(OperatorKind::Mul, {left, right}, false);
  return make_affine({{-1.0, prod}}, 0.0);
}

// random tree generator for property tests
ExprPtr random_tree(RngStream& rng, int state_dim, int depth) {
  if (depth == 0 || rng.bernoulli(0.3)) {
    if (rng.bernoulli(0.5)) return make_constant(rng.uniform(-3, 3));
    return make_var(static_cast<int>(rng.integer(state_dim)));
  }
  switch (rng.integer(4)) {
    case 0: {
      std::vector<AffineTerm> terms;
      const int n = 1 + static_cast<int>(rng.integer(3));
      for (int i = 0; i < n; ++i)
        terms.push_back({rng.uniform(-2, 2), random_tree(rng, state_dim, depth - 1)});
      return make_affine(std::move(terms), rng.bernoulli(0.5) ? rng.uniform(-2, 2) : 0.0);
    }
    case 1:
      return make_op(OperatorKind::Sin, {random_tree(rng, state_dim, depth - 1)}, true);
    case 2:
      return make_op(
          OperatorKind::Mul,
          {random_tree(rng, state_dim, depth - 1), random_tree(rng, state_dim, depth - 1)}, true);
    default:
      return make_op(
          OperatorKind::Div,
          {random_tree(rng, state_dim, depth - 1), random_tree(rng, state_dim, depth - 1)}, true);
  }
}

}  // namespace

TEST_SUITE("expression") {

TEST_CASE("length metric reproduces the published anchors") {
  CHECK(metrics({cartpole_expr()}).length == 3.0);
  CHECK(metrics({mountaincar_expr()}).length == 6.0);
  CHECK(metrics({pendulum_expr()}).length == 7.0);
  CHECK(metrics({make_constant(2.5)}).length == 1.0);
}

TEST_CASE("simplify merges nested affine chains") {
  ExprPtr inner = make_affine({{3.0, make_var(0)}}, 1.0);
  ExprPtr outer = make_affine({{2.0, inner}}, 4.0);
  ExprPtr s = simplify(outer);
  REQUIRE(s->kind == ExprKind::Affine);
  CHECK(s->terms.size() == 1);
  CHECK(s->terms[0].coef == 6.0);
  CHECK(s->terms[0].child->kind == ExprKind::Var);
  CHECK(s->bias == 6.0);
}

TEST_CASE("simplify folds constants") {
  ExprPtr prod = make_op(OperatorKind::Mul, {make_constant(2.0), make_constant(3.0)}, true);
  ExprPtr s = simplify(prod);
  REQUIRE(s->kind == ExprKind::Constant);
  CHECK(s->value == 6.0);
}

TEST_CASE("simplify merges duplicate variables") {
  ExprPtr e = make_affine({{17.0, make_var(2)}, {0.17, make_var(2)}}, 0.0);
  ExprPtr s = simplify(e);
  REQUIRE(s->kind == ExprKind::Affine);
  CHECK(s->terms.size() == 1);
  CHECK(s->terms[0].coef == doctest::Approx(17.17));
}

TEST_CASE("simplify preserves evaluation on random trees") {
  RngStream rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    ExprPtr tree = random_tree(rng, 3, 4);
    ExprPtr simple = simplify(tree);
    for (int probe = 0; probe < 20; ++probe) {
      double s[3] = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      const double a = evaluate(*tree, s);
      const double b = evaluate(*simple, s);
      CHECK(std::abs(a - b) < 1e-9);
    }
  }
}

TEST_CASE("extraction of the all-zero mask is the final bias") {
  NetworkConfig c = NetworkConfig::defaults(4, 1, Structure::DenseArranged);
  RngStream rng(33);
  std::vector<SymbolicNetwork> nets = build_policy(c, rng);
  nets[0].b.back()(0, 0) = -0.73;
  Mat mask = Mat::Zero(c.weight_count(), 1);
  std::vector<ExprPtr> trees = extract(c, nets, mask);
  ExprPtr s = simplify(trees[0]);
  REQUIRE(s->kind == ExprKind::Constant);
  CHECK(s->value == -0.73);
}

TEST_CASE("extraction matches the masked network forward") {
  RngStream rng(35);
  for (int trial = 0; trial < 60; ++trial) {
    const Structure structure = trial % 3 == 0   ? Structure::Plain
                                : trial % 3 == 1 ? Structure::Dense
                                                 : Structure::DenseArranged;
    const int state_dim = 2 + static_cast<int>(rng.integer(3));
    NetworkConfig c = NetworkConfig::defaults(state_dim, 1, structure);
    std::vector<SymbolicNetwork> nets = build_policy(c, rng);
    Mat mask(c.weight_count(), 1);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      mask(i, 0) = rng.bernoulli(0.7) ? 1.0 : 0.0;

    std::vector<ExprPtr> trees = extract(c, nets, mask);
    ExprPtr simple = simplify(trees[0]);

    ad::Tape t;
    LiftedNet lifted = lift(t, nets[0], false);
    Eigen::Index offset = 0;
    std::vector<ad::Var> eff = masked_weights(t, c, lifted.w, t.constant(mask), offset);
    for (int probe = 0; probe < 25; ++probe) {
      Vec s(state_dim);
      for (int j = 0; j < state_dim; ++j) s(j) = rng.uniform(-2.0, 2.0);
      const double net_out =
          forward(t, c, eff, lifted.b, t.constant(Mat(s))).preactivation.value()(0, 0);
      std::vector<double> sv(s.data(), s.data() + s.size());
      CHECK(std::abs(evaluate(*trees[0], sv) - net_out) < 1e-9);
      CHECK(std::abs(evaluate(*simple, sv) - net_out) < 1e-9);
    }
  }
}

TEST_CASE("deterministic extraction thresholds p at one half") {
  NetworkConfig c = NetworkConfig::defaults(2, 1, Structure::DenseArranged);
  RngStream rng(37);
  std::vector<SymbolicNetwork> nets = build_policy(c, rng);
  Mat p = Mat::Constant(c.weight_count(), 1, 0.49);
  p(0, 0) = 0.5;  // inclusive
  std::vector<ExprPtr> trees = extract_deterministic(c, nets, p);
  Mat mask = Mat::Zero(c.weight_count(), 1);
  mask(0, 0) = 1.0;
  std::vector<ExprPtr> expected = extract(c, nets, mask);
  RngStream probe(38);
  for (int i = 0; i < 10; ++i) {
    double s[2] = {probe.uniform(-1, 1), probe.uniform(-1, 1)};
    CHECK(evaluate(*trees[0], s) == doctest::Approx(evaluate(*expected[0], s)));
  }
}

TEST_CASE("verify_and_strip drops clamps that never fire") {
  StateBox box;
  box.lo = Vec::Constant(1, -2.0);
  box.hi = Vec::Constant(1, 1.0);
  RngStream rng(39);

  // exp input spans [-2, 1]: inside (-10, 4) with margin
  ExprPtr exp_tree = make_op(OperatorKind::Exp, {make_var(0)}, true);
  std::vector<std::string> notes;
  ExprPtr stripped = verify_and_strip(exp_tree, box, 500, rng, &notes);
  CHECK_FALSE(stripped->regularized);
  CHECK(notes.size() == 1);

  // denominator in [0.5, 3]: safely above 0.01
  ExprPtr div_safe = make_op(
      OperatorKind::Div, {make_constant(1.0), make_affine({{-0.8333, make_var(0)}}, 1.8333)},
      true);
  stripped = verify_and_strip(div_safe, box, 500, rng);
  CHECK_FALSE(stripped->regularized);

  // denominator crossing 0.01: stays piecewise
  ExprPtr div_risky =
      make_op(OperatorKind::Div, {make_constant(1.0), make_affine({{1.0, make_var(0)}}, 0.0)},
              true);
  stripped = verify_and_strip(div_risky, box, 500, rng);
  CHECK(stripped->regularized);
}

TEST_CASE("infix serialization matches the published formatting") {
  CHECK(to_infix(*cartpole_expr()) == "17.17*s3 + 1.2*s4");
  CHECK(to_infix(*make_constant(0.0)) == "0.00");
  CHECK(to_infix(*mountaincar_expr()) == "8.06*sin(9.73*s2 - 0.18) + 1.26");
  CHECK(to_infix(*pendulum_expr()) == "-(4.27*s1 + 0.62)*(1.9*s2 + 0.42*s3)");
}

TEST_CASE("json round-trip is lossless") {
  RngStream rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    ExprPtr tree = random_tree(rng, 4, 3);
    ExprPtr back = parse_json(to_json_text(*tree));
    CHECK(structurally_equal(*tree, *back));
    for (int probe = 0; probe < 5; ++probe) {
      double s[4] = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2),
                     rng.uniform(-2, 2)};
      CHECK(evaluate(*tree, s) == evaluate(*back, s));
    }
  }
}

TEST_CASE("infix parser evaluates published expressions") {
  ExprPtr e = parse_infix("17.17*s3 + 1.2*s4");
  double s[4] = {0, 0, 0.1, 0.2};
  CHECK(evaluate(*e, s) == doctest::Approx(17.17 * 0.1 + 1.2 * 0.2));

  ExprPtr mc = parse_infix("8.06*sin(9.73*s2 - 0.18) + 1.26");
  double s2[2] = {0.0, 0.5};
  CHECK(evaluate(*mc, s2) == doctest::Approx(8.06 * std::sin(9.73 * 0.5 - 0.18) + 1.26));

  ExprPtr pend = parse_infix("-(4.27*s1 + 0.62)*(1.9*s2 + 0.42*s3)");
  double s3[3] = {0.9, -0.3, 0.7};
  CHECK(evaluate(*pend, s3) ==
        doctest::Approx(-(4.27 * 0.9 + 0.62) * (1.9 * -0.3 + 0.42 * 0.7)));

  CHECK_THROWS_AS(parse_infix("sin("), EsplError);
  CHECK_THROWS_AS(parse_infix("foo(1)"), EsplError);
}

TEST_CASE("metrics are invariant under serialization round-trip") {
  RngStream rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    ExprPtr tree = simplify(random_tree(rng, 3, 3));
    PolicyReport a = metrics({tree});
    PolicyReport b = metrics({parse_json(to_json_text(*tree))});
    CHECK(a.length == b.length);
  }
}

TEST_CASE("policy files round-trip through disk") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "espl_policy_test").string();
  PolicyReport report = metrics({cartpole_expr()});
  report.config_hash = "deadbeef";
  report.seed = 7;
  report.iteration = 42;
  write_policy_files(dir, report);

  PolicyReport loaded = read_policy_json(dir + "/policy.json");
  CHECK(loaded.length == 3.0);
  CHECK(loaded.config_hash == "deadbeef");
  CHECK(loaded.seed == 7);
  CHECK(structurally_equal(*loaded.trees[0], *report.trees[0]));

  std::vector<ExprPtr> txt = read_policy_txt(dir + "/policy.txt");
  double s[4] = {0, 0, 0.11, -0.4};
  CHECK(evaluate(*txt[0], s) == doctest::Approx(17.17 * 0.11 + 1.2 * -0.4));
  fs::remove_all(dir);
}

}  // TEST_SUITE
