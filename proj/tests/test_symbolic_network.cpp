#include <doctest.h>

#include <cmath>

#include "espl/rng.hpp"
#include "espl/symbolic_network.hpp"

using namespace espl;
using ad::Tape;
using ad::Var;

namespace {

NetworkConfig tiny_plain_config() {
  // state-dim 4, one layer {sin; mul}, plain wiring
  NetworkConfig c;
  c.state_dim = 4;
  c.action_dims = 1;
  c.structure = Structure::Plain;
  c.layers = {LayerLayout{{OperatorKind::Sin, OperatorKind::Mul}}};
  return c;
}

}  // namespace

TEST_SUITE("symbolic_network") {

TEST_CASE("width arithmetic for the {sin; mul} single layer") {
  NetworkConfig c = tiny_plain_config();
  CHECK(c.layers[0].linear_width() == 3);
  CHECK(c.layers[0].output_width() == 2);
  CHECK(c.layer_input_width(0) == 4);
  CHECK(c.final_input_width() == 2);
  // 3*4 weights + 3 biases + final 1*2 + final bias = 18
  CHECK(c.param_count() == 18);
  CHECK(c.weight_count() == 14);
  CHECK(c.bias_count() == 4);
}

TEST_CASE("dense input widths stack the state and prior outputs") {
  NetworkConfig c = NetworkConfig::defaults(4, 1, Structure::Dense);
  CHECK(c.layer_input_width(0) == 4);
  CHECK(c.layer_input_width(1) == 4 + c.layers[0].output_width());
  CHECK(c.layer_input_width(2) == 4 + c.layers[0].output_width() + c.layers[1].output_width());

  NetworkConfig arranged = NetworkConfig::defaults(4, 1, Structure::DenseArranged);
  CHECK(arranged.weight_count() == 237);  // the default cartpole search space
  CHECK(arranged.bias_count() == 25);
}

TEST_CASE("parameter count equals the number of optimizer leaves") {
  NetworkConfig c = NetworkConfig::defaults(3, 1, Structure::DenseArranged);
  RngStream rng(3);
  SymbolicNetwork net = build(c, rng);
  int total = 0;
  int weights = 0;
  for (const Mat& w : net.w) {
    total += static_cast<int>(w.size());
    weights += static_cast<int>(w.size());
  }
  for (const Mat& b : net.b) total += static_cast<int>(b.size());
  CHECK(weights == c.weight_count());
  CHECK(total == c.param_count());
}

TEST_CASE("all-zero weights forward to the final bias") {
  NetworkConfig c = NetworkConfig::defaults(4, 1, Structure::DenseArranged);
  RngStream rng(5);
  SymbolicNetwork net = build(c, rng);
  for (Mat& w : net.w) w.setZero();
  net.b.back()(0, 0) = 0.37;

  Tape t;
  LiftedNet lifted = lift(t, net, false);
  Mat state(4, 3);
  state << 1, -2, 0.5, 0.3, -0.1, 4, 0, 1, -1, 2, 2, 2;
  ForwardResult out = forward(t, c, lifted.w, lifted.b, t.constant(state));
  for (int j = 0; j < 3; ++j) CHECK(out.preactivation.value()(0, j) == doctest::Approx(0.37));
}

TEST_CASE("a linear path through the dense skip reproduces the cartpole policy") {
  NetworkConfig c = NetworkConfig::defaults(4, 1, Structure::DenseArranged);
  RngStream rng(7);
  SymbolicNetwork net = build(c, rng);
  for (Mat& w : net.w) w.setZero();
  for (Mat& b : net.b) b.setZero();
  // final linear layer sees [s, x1, x2, x3]; pick theta (s3) and theta_dot (s4)
  net.w.back()(0, 2) = 17.17;
  net.w.back()(0, 3) = 1.2;

  Tape t;
  LiftedNet lifted = lift(t, net, false);
  Mat state(4, 1);
  state << 0.0, 0.0, 0.1, 0.0;
  ForwardResult out = forward(t, c, lifted.w, lifted.b, t.constant(state));
  CHECK(out.preactivation.value()(0, 0) == doctest::Approx(17.17 * 0.1));

  std::vector<LiftedNet> nets{lifted};
  Var act = action(t, c, nets, t.constant(state));
  CHECK(act.value()(0, 0) == doctest::Approx(std::tanh(1.717)));
}

TEST_CASE("penalty sum equals an independent re-accumulation") {
  // oracle: replay the layer arithmetic with plain Eigen and scalar apply()
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    NetworkConfig c =
        NetworkConfig::defaults(3, 1, seed % 2 ? Structure::DenseArranged : Structure::Dense);
    RngStream rng(seed);
    SymbolicNetwork net = build(c, rng);
    // push some operator inputs into forbidden regions
    for (Mat& w : net.w) w *= 8.0;
    Vec state(3);
    state << 1.7, -2.3, 0.9;

    double expected_penalty = 0.0;
    std::vector<Vec> pool;
    {
      Vec s = state;
      std::vector<Vec> outs_pool = {s};
      for (std::size_t l = 0; l < c.layers.size(); ++l) {
        Eigen::Index width = 0;
        for (const Vec& v : outs_pool) width += v.size();
        Vec input(width);
        Eigen::Index at = 0;
        for (const Vec& v : outs_pool) {
          input.segment(at, v.size()) = v;
          at += v.size();
        }
        Vec y = net.w[l] * input + net.b[l].col(0);
        Vec out(c.layers[l].output_width());
        Eigen::Index r = 0;
        for (std::size_t k = 0; k < c.layers[l].ops.size(); ++k) {
          const OperatorKind kind = c.layers[l].ops[k];
          std::vector<double> args;
          for (int j = 0; j < arity(kind); ++j) args.push_back(y(r + j));
          r += arity(kind);
          OpResult res = espl::apply(kind, args);
          out(static_cast<Eigen::Index>(k)) = res.output;
          expected_penalty += res.penalty;
        }
        outs_pool.push_back(out);
      }
      pool = outs_pool;
    }

    Tape t;
    LiftedNet lifted = lift(t, net, false);
    ForwardResult fwd = forward(t, c, lifted.w, lifted.b, t.constant(Mat(state)));
    CHECK(fwd.penalty.value()(0, 0) == doctest::Approx(expected_penalty).epsilon(1e-10));
    CHECK(fwd.penalty.value()(0, 0) >= 0.0);
  }
}

TEST_CASE("plain identity-only network is affine in the state") {
  NetworkConfig c;
  c.state_dim = 3;
  c.action_dims = 1;
  c.structure = Structure::Plain;
  c.layers = {LayerLayout{{OperatorKind::Ident}}, LayerLayout{{OperatorKind::Ident}}};
  RngStream rng(9);
  SymbolicNetwork net = build(c, rng);

  auto eval = [&](const Vec& s) {
    Tape t;
    LiftedNet lifted = lift(t, net, false);
    return forward(t, c, lifted.w, lifted.b, t.constant(Mat(s))).preactivation.value()(0, 0);
  };
  RngStream probe(10);
  for (int i = 0; i < 50; ++i) {
    Vec s1(3), s2(3);
    for (int j = 0; j < 3; ++j) {
      s1(j) = probe.uniform(-2, 2);
      s2(j) = probe.uniform(-2, 2);
    }
    const double alpha = probe.uniform(-1.5, 1.5), beta = probe.uniform(-1.5, 1.5);
    const double lhs = eval(alpha * s1 + beta * s2);
    const double rhs = alpha * eval(s1) + beta * eval(s2) + (1.0 - alpha - beta) * eval(Vec::Zero(3));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("forward gradients match finite differences") {
  NetworkConfig c = NetworkConfig::defaults(4, 1, Structure::DenseArranged);
  RngStream rng(21);
  SymbolicNetwork net = build(c, rng);
  Mat state(4, 2);
  state << 0.3, -0.8, 1.1, 0.2, -0.4, 0.9, 0.05, -1.3;

  std::vector<Mat> point;
  for (const Mat& w : net.w) point.push_back(w);
  for (const Mat& b : net.b) point.push_back(b);
  const std::size_t nw = net.w.size();
  auto f = [&](Tape& t, const std::vector<Var>& xs) {
    std::span<const Var> w(xs.data(), nw);
    std::span<const Var> b(xs.data() + nw, xs.size() - nw);
    ForwardResult fwd = forward(t, c, w, b, t.constant(state));
    return ad::mean_all(ad::add(fwd.preactivation, fwd.penalty));
  };
  CHECK(ad::grad_check(f, point, 1e-5) < 1e-4);
}

TEST_CASE("masked weights zero out exactly the masked paths") {
  NetworkConfig c = NetworkConfig::defaults(2, 1, Structure::DenseArranged);
  RngStream rng(23);
  SymbolicNetwork net = build(c, rng);
  Mat mask = Mat::Ones(c.weight_count(), 1);
  mask(0, 0) = 0.0;
  mask(5, 0) = 0.0;

  Tape t;
  LiftedNet lifted = lift(t, net, false);
  Eigen::Index offset = 0;
  std::vector<Var> eff = masked_weights(t, c, lifted.w, t.constant(mask), offset);
  CHECK(offset == c.weight_count());
  CHECK(eff[0].value()(0, 0) == 0.0);
  // column-major flattening: entry 5 of the first 10x2 weight block
  CHECK(eff[0].value()(5 % 10, 5 / 10) == 0.0);
  CHECK(eff[0].value()(1, 0) == net.w[0](1, 0));
}

TEST_CASE("config validation rejects bad shapes") {
  NetworkConfig c = tiny_plain_config();
  c.layers.clear();
  CHECK_THROWS_AS(c.validate(), EsplError);
  c = tiny_plain_config();
  c.state_dim = 0;
  CHECK_THROWS_AS(c.validate(), EsplError);
}

TEST_CASE("non-finite state is rejected") {
  NetworkConfig c = tiny_plain_config();
  RngStream rng(2);
  SymbolicNetwork net = build(c, rng);
  Tape t;
  LiftedNet lifted = lift(t, net, false);
  Mat bad = Mat::Constant(4, 1, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(forward(t, c, lifted.w, lifted.b, t.constant(bad)), EsplError);
}

}  // TEST_SUITE
