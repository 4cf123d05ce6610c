#include <benchmark/benchmark.h>

#include "espl/expression.hpp"
#include "espl/symbolic_network.hpp"

using namespace espl;

static void BM_SymbolicForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  NetworkConfig c = NetworkConfig::defaults(4, 1, Structure::DenseArranged);
  RngStream rng(1);
  SymbolicNetwork net = build(c, rng);
  Mat x(4, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1, 1);
  ad::Tape tape;
  for (auto _ : state) {
    tape.clear();
    LiftedNet lifted = lift(tape, net, false);
    ForwardResult out = forward(tape, c, lifted.w, lifted.b, tape.constant(x));
    benchmark::DoNotOptimize(out.preactivation.value()(0, 0));
  }
}
BENCHMARK(BM_SymbolicForward)->Arg(1)->Arg(256);

static void BM_ExtractSimplify(benchmark::State& state) {
  NetworkConfig c = NetworkConfig::defaults(4, 1, Structure::DenseArranged);
  RngStream rng(2);
  std::vector<SymbolicNetwork> nets = build_policy(c, rng);
  Mat mask(c.weight_count(), 1);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i, 0) = rng.bernoulli(0.05) ? 1.0 : 0.0;
  for (auto _ : state) {
    std::vector<ExprPtr> trees = extract(c, nets, mask);
    benchmark::DoNotOptimize(simplify(trees[0]));
  }
}
BENCHMARK(BM_ExtractSimplify);

static void BM_TreeEvaluate(benchmark::State& state) {
  ExprPtr tree = parse_infix("8.06*sin(9.73*s2 - 0.18) + 1.26");
  double s[2] = {0.3, -0.02};
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(*tree, s));
    s[1] = -s[1];
  }
}
BENCHMARK(BM_TreeEvaluate);
