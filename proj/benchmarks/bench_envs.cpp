#include <benchmark/benchmark.h>

#include "espl/envs.hpp"
#include "espl/stability.hpp"

using namespace espl;

static void BM_CartPoleStep(benchmark::State& state) {
  TaskParams p = default_task(EnvKind::CartPole);
  Vec s(4);
  s << 0.1, 0.0, 0.05, -0.2;
  for (auto _ : state) {
    StepOut out = cartpole_step(s, 0.3, p);
    benchmark::DoNotOptimize(out.next_state(2));
  }
}
BENCHMARK(BM_CartPoleStep);

static void BM_PendulumEpisode(benchmark::State& state) {
  Env env(EnvKind::Pendulum, default_task(EnvKind::Pendulum));
  RngStream rng(1);
  Vec a(1);
  a << 0.5;
  for (auto _ : state) {
    env.reset(rng);
    double ret = 0;
    for (int i = 0; i < 200; ++i) ret += env.step(a).reward;
    benchmark::DoNotOptimize(ret);
  }
}
BENCHMARK(BM_PendulumEpisode);

static void BM_Eigenvalues(benchmark::State& state) {
  LinearSystem sys = linearize(17.17, 1.2, 0.0, default_task(EnvKind::CartPole));
  for (auto _ : state) {
    auto eigs = eigenvalues(sys.A);
    benchmark::DoNotOptimize(eigs[2]);
  }
}
BENCHMARK(BM_Eigenvalues);
