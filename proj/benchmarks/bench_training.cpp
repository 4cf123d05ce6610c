#include <benchmark/benchmark.h>

#include "espl/sac_trainer.hpp"

using namespace espl;

// the dominant cost of a run: one gradient step at the published sizes
static void BM_TrainingStep(benchmark::State& state) {
  TrainerConfig c = TrainerConfig::defaults_for(EnvKind::CartPole);
  c.total_iters = 1;
  c.min_fill = 300;
  c.seed = 1;
  Trainer trainer(c, default_task(c.env));
  while (trainer.buffer().size() < 300) trainer.collect_episode();
  int iter = 0;
  for (auto _ : state) {
    StepStats stats = trainer.training_step(iter++ % c.schedule_iters);
    benchmark::DoNotOptimize(stats.critic_loss);
  }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

static void BM_CollectEpisode(benchmark::State& state) {
  TrainerConfig c = TrainerConfig::defaults_for(EnvKind::Pendulum);
  c.seed = 2;
  c.warmup_episodes = 0;
  Trainer trainer(c, default_task(c.env));
  for (auto _ : state) {
    trainer.collect_episode();
    benchmark::DoNotOptimize(trainer.buffer().size());
  }
}
BENCHMARK(BM_CollectEpisode)->Unit(benchmark::kMillisecond);
