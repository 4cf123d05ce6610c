#pragma once

#include <functional>

#include "espl/expression.hpp"
#include "espl/mlp.hpp"
#include "espl/path_selector.hpp"
#include "espl/replay_buffer.hpp"
#include "espl/sac_trainer.hpp"
#include "espl/symbolic_network.hpp"

namespace espl {

struct MetaConfig {
  EnvKind env = EnvKind::CartPoleFL;
  Structure structure = Structure::DenseArranged;

  int latent_dim = 5;
  int meta_batch = 10;
  double reward_scale = 5.0;
  double kl_scale = 1.0;           // beta
  double select_scale = 0.25;      // alpha_2
  double l0_target_ratio = 0.002;  // l_t
  int schedule_iters = 25;         // t_s
  double tau_target = 0.2;
  double penalty_scale = 1.0;      // alpha_1

  int steps_per_iter = 2000;
  int total_iters = 60;
  int train_tasks = 40;
  int test_tasks = 10;
  int collect_cycles = 2;  // episodes per task per iteration (K)
  int context_size = 100;

  int encoder_hidden = 200;
  int generator_hidden = 128;
  int critic_hidden = 256;
  int std_hidden = 64;

  double lr = 3e-4;
  int minibatch = 256;
  double discount = 0.99;
  double target_smoothing = 0.005;
  double entropy_alpha = 1.0;  // fixed; reward scaling plays the temperature role

  std::size_t per_task_capacity = 100'000;
  int eval_interval = 5;
  int eval_episodes_per_task = 2;
  int adapt_episodes = 2;
  std::uint64_t seed = 1;

  static MetaConfig defaults();
  void validate() const;
};

// Everything needed to generate, adapt, and extract task-conditioned
// policies; saved whole into meta checkpoints.
struct MetaModel {
  MetaConfig config;
  NetworkConfig net_config;
  Mlp encoder;            // (2S + A + 1) -> 2 * latent (mean, raw variance)
  Mlp phi;                // latent -> flat (w, b) of all action-dim networks
  Mlp psi;                // latent -> mask logits, last bias 3.0
  Mlp std_net;            // (S + latent) -> A
  Mlp q1, q2, qt1, qt2;   // (S + A + latent) -> 1
  std::vector<TaskParams> train_tasks;
  std::vector<TaskParams> test_tasks;

  int context_feature_dim() const;
  int total_wb() const;    // phi output size
  int maskable() const;    // psi output size
};

MetaModel make_meta_model(const MetaConfig& config);

struct Posterior {
  Vec mean;
  Vec var;
};

// Product of per-transition Gaussian factors with the N(0, I) prior; the
// empty context returns the prior. Permutation-invariant by construction.
Posterior encode_context(const MetaModel& model, const Mat& context);

// Column layout of one context transition: [s; a; r; s_next].
Mat context_features(const std::vector<Transition>& transitions, int max_size);

struct GeneratedParams {
  std::vector<SymbolicNetwork> nets;
  Mat p;  // maskable x 1, in (0,1)
};
GeneratedParams generate(const MetaModel& model, const Vec& z);

struct AdaptResult {
  PolicyReport report;
  Vec z;
  GeneratedParams params;
  double mean_return = 0.0;  // filled when eval_episodes > 0
};

// Rolls out prior/posterior-sampled policies to build context, re-encodes,
// takes the posterior mean, and extracts the deterministic symbolic policy.
AdaptResult adapt_to_task(const MetaModel& model, const TaskParams& task, int context_episodes,
                          std::uint64_t seed, int eval_episodes = 0);

struct MetaIterationLog {
  int iter = 0;
  double test_return_adapted = 0.0;  // NaN when not evaluated this iteration
  double l0_ratio = 0.0;
  double uncertainty = 0.0;
  double tau = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double kl = 0.0;
  double penalty = 0.0;
};

struct MetaTrainResult {
  MetaModel model;
  std::vector<MetaIterationLog> logs;
  double final_test_return = 0.0;
};

class MetaTrainer {
 public:
  explicit MetaTrainer(const MetaConfig& config);
  MetaTrainer(const MetaConfig& config, std::vector<TaskParams> train_tasks,
              std::vector<TaskParams> test_tasks);

  using IterCallback = std::function<void(const MetaIterationLog&)>;
  MetaTrainResult train(const IterCallback& on_iteration = nullptr);

  // pieces, exposed for tests
  void collect_iteration();
  struct MetaStepStats {
    double critic_loss = 0.0, actor_loss = 0.0, kl = 0.0, penalty = 0.0;
    double l0_ratio = 0.0, uncertainty = 0.0;
  };
  MetaStepStats training_step(int iteration);
  double evaluate_test_tasks(int context_episodes, int eval_episodes, std::uint64_t salt);
  const MetaModel& model() const { return model_; }

 private:
  void collect_task_episode(int task_index, const GeneratedParams& gen, const Vec& z);
  Mat sample_context(int task_index, RngStream& rng) const;

  MetaConfig config_;
  MetaModel model_;
  std::vector<ReplayBuffer> buffers_;
  ad::Tape tape_;
  Adam adam_critic_, adam_encoder_, adam_actor_;
  RngStream rng_env_, rng_mask_, rng_gumbel_, rng_noise_, rng_minibatch_, rng_z_, rng_context_;
};

}  // namespace espl
