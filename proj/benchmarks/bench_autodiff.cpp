#include <benchmark/benchmark.h>

#include "espl/autodiff.hpp"
#include "espl/mlp.hpp"
#include "espl/rng.hpp"

using namespace espl;

static void BM_TapeForwardBackwardMlp(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const int batch = 256;
  RngStream rng(1);
  std::vector<int> widths = {5, hidden, hidden, 1};
  Mlp mlp = Mlp::make(widths, rng);
  Mat x(5, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1, 1);
  ad::Tape tape;
  for (auto _ : state) {
    tape.clear();
    LiftedMlp lifted = lift(tape, mlp, true);
    ad::Var out = ad::mean_all(ad::square(mlp_forward(tape, lifted, tape.constant(x), Activation::Relu)));
    tape.backward(out);
    benchmark::DoNotOptimize(lifted.W[0].grad());
  }
}
BENCHMARK(BM_TapeForwardBackwardMlp)->Arg(64)->Arg(256);

static void BM_GradCheckQuadratic(benchmark::State& state) {
  auto f = [](ad::Tape& t, const std::vector<ad::Var>& xs) {
    return ad::sum_all(ad::square(xs[0]));
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(ad::grad_check(f, {Mat::Constant(4, 4, 1.5)}, 1e-5));
  }
}
BENCHMARK(BM_GradCheckQuadratic);
