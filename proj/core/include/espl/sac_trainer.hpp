#pragma once

#include <functional>
#include <optional>

#include "espl/expression.hpp"
#include "espl/mlp.hpp"
#include "espl/path_selector.hpp"
#include "espl/replay_buffer.hpp"
#include "espl/symbolic_network.hpp"

namespace espl {

enum class SelectorMode { L0, L1, None };
std::string_view selector_name(SelectorMode mode);
SelectorMode selector_from_name(std::string_view name);

struct TrainerConfig {
  EnvKind env = EnvKind::CartPole;
  Structure structure = Structure::DenseArranged;
  SelectorMode selector = SelectorMode::L0;

  double discount = 0.99;
  int minibatch = 256;
  double lr = 3e-4;
  double reward_scale = 1.0;
  double target_smoothing = 0.005;

  double tau_target = 0.2;
  double select_scale = 0.08;     // alpha_2
  double l0_target_ratio = 0.002; // l_t
  int schedule_iters = 400;       // t_s
  double penalty_scale = 1.0;     // alpha_1
  double p_init = 0.95;

  int total_iters = 500;  // one episode collected per iteration
  int steps_per_iter = 1000;

  std::size_t replay_capacity = 1'000'000;
  int min_fill = 300;  // >= one minibatch before updates start
  int warmup_episodes = 5;

  int eval_interval = 10;
  int eval_episodes = 10;

  bool auto_entropy = true;
  double entropy_alpha = 0.2;  // fixed alpha when auto_entropy is off

  double l1_scale = 0.0;       // 0: reuse select_scale
  double l1_prune = 0.05;      // extraction threshold for the L1 ablation

  int critic_hidden = 256;
  int std_hidden = 64;
  int horizon = -1;  // env default
  std::uint64_t seed = 1;

  static TrainerConfig defaults_for(EnvKind env);
  void validate() const;
};

struct IterationLog {
  int iter = 0;
  long episodes = 0;
  double return_eval = 0.0;
  double l0_ratio = 0.0;
  double uncertainty = 0.0;
  double tau = 0.0;
  double lmin = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double penalty = 0.0;
};

struct StepStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double penalty = 0.0;
  double select = 0.0;
  double alpha = 0.0;
};

struct TrainResult {
  PolicyReport report;               // final extracted policy (simplified)
  std::vector<IterationLog> logs;
  double final_eval = 0.0;           // mean return of the final policy
  long episodes = 0;
  std::vector<SymbolicNetwork> nets;
  Mat p;
  Mlp critic1, critic2, target1, target2, std_net;
  double log_alpha = 0.0;
};

// Single-task training: soft actor-critic over the masked symbolic network,
// penalty and selection losses folded into the actor objective, temperature
// and minimum-L0 annealed per schedule().
class Trainer {
 public:
  Trainer(const TrainerConfig& config, const TaskParams& task);

  using IterCallback = std::function<void(const IterationLog&)>;
  TrainResult train(const IterCallback& on_iteration = nullptr);

  // pieces, exposed for tests and tools
  void collect_episode();
  StepStats training_step(int iteration);
  Mat extraction_mask() const;
  std::vector<ExprPtr> extract_policy() const;  // simplified, pre-strip
  double evaluate_current(int episodes, std::uint64_t seed_salt) const;

  SelectorState& selector() { return selector_; }
  const std::vector<SymbolicNetwork>& networks() const { return nets_; }
  Mlp& critic1() { return q1_; }
  Mlp& critic2() { return q2_; }
  Mlp& target1() { return qt1_; }
  Mlp& target2() { return qt2_; }
  Mlp& std_net() { return std_net_; }
  const TrainerConfig& config() const { return config_; }
  const TaskParams& task() const { return task_; }
  double alpha() const;
  long episodes_collected() const { return episodes_; }
  ReplayBuffer& buffer() { return buffer_; }

  // Test hook: overrides mask sampling everywhere (collection and training).
  void debug_force_mask(std::optional<Mat> mask) { forced_mask_ = std::move(mask); }

 private:
  struct PolicyValues {
    Mat mu;       // A x B
    Mat log_std;  // A x B
  };
  PolicyValues policy_values(const Mat& obs, const Mat& mask);
  Vec sample_action(const Vec& obs, const Mat& mask);
  int maskable_count() const;

  TrainerConfig config_;
  TaskParams task_;
  Env env_;
  NetworkConfig net_config_;
  std::vector<SymbolicNetwork> nets_;
  SelectorState selector_;
  Mlp std_net_;
  Mlp q1_, q2_, qt1_, qt2_;
  double log_alpha_ = 0.0;
  Adam adam_actor_, adam_critic_, adam_alpha_;
  ReplayBuffer buffer_;
  ad::Tape tape_;

  RngStream rng_env_, rng_mask_, rng_gumbel_, rng_noise_, rng_minibatch_, rng_eval_;
  long episodes_ = 0;
  std::optional<Mat> forced_mask_;
};

}  // namespace espl
