#pragma once

#include <string_view>

#include "espl/common.hpp"
#include "espl/expression.hpp"
#include "espl/rng.hpp"

namespace espl {

enum class EnvKind { CartPole, Pendulum, MountainCar, CartPoleFL };
std::string_view env_name(EnvKind kind);
EnvKind env_from_name(std::string_view name);
bool is_meta_env(EnvKind kind);

enum class TaskSplit { Train, Test };

// Physical parameters; each environment reads the fields it owns.
struct TaskParams {
  // cartpole family: force coefficient (N per unit action), pole mass (kg),
  // cart mass (kg), half pole length (m), gravity (m/s^2)
  double force = 30.0;
  double pole_mass = 0.1;
  double cart_mass = 1.0;
  double half_length = 0.5;
  double gravity = 9.8;
  // pendulum
  double pend_gravity = 10.0;
  double pend_mass = 1.0;
  double pend_length = 1.0;
  // mountain car
  double power = 0.0015;
};

TaskParams default_task(EnvKind kind);
// Cartpole-fl draws: train f ~ U[7.5,12.5], L ~ U[0.3,0.7]; test draws from
// the disjoint OOD bands. Single-task envs return fixed defaults for the
// train split and reject the test split.
TaskParams sample_task(EnvKind kind, TaskSplit split, RngStream& rng);

struct Transition {
  Vec s;
  Vec a;
  Vec s_next;
  double r = 0.0;
  bool done = false;
  bool truncated = false;
};

struct StepOut {
  Vec next_state;
  double reward = 0.0;
  bool done = false;
};

// Continuous-time cartpole accelerations; also the linearization oracle's
// ground truth.
struct CartPoleAccel {
  double x_acc = 0.0;
  double theta_acc = 0.0;
};
CartPoleAccel cartpole_accel(const Vec& state, double action, const TaskParams& params);

// Semi-implicit Euler (velocities first). state = (x, xdot, theta, thetadot),
// action in [-1,1], reward +1 per step, done outside |theta| <= 0.2095 rad or
// |x| <= 2.4 m.
StepOut cartpole_step(const Vec& state, double action, const TaskParams& params, double dt = 0.02);

// state = (theta, thetadot) internal; torque u = 2a; observation is
// (cos theta, sin theta, thetadot).
StepOut pendulum_step(const Vec& state, double action, const TaskParams& params, double dt = 0.05);

// state = (position, velocity); reward 100 on reaching the goal minus
// 0.1 a^2 per step.
StepOut mountaincar_step(const Vec& state, double action, const TaskParams& params);

// Episode wrapper: horizon bookkeeping, resets, observation mapping.
class Env {
 public:
  Env(EnvKind kind, TaskParams params, int horizon = -1);

  int obs_dim() const;
  int action_dim() const { return 1; }
  int horizon() const { return horizon_; }
  EnvKind kind() const { return kind_; }
  const TaskParams& params() const { return params_; }

  Vec reset(RngStream& rng);

  struct Result {
    Vec obs;
    double reward = 0.0;
    bool done = false;       // true termination (pole fell, goal reached)
    bool truncated = false;  // horizon reached
  };
  Result step(const Vec& action);

  // Conservative reachable-observation box used by verify_and_strip.
  StateBox observation_box() const;

  static int default_horizon(EnvKind kind);

 private:
  Vec observe() const;

  EnvKind kind_;
  TaskParams params_;
  int horizon_;
  Vec state_;
  int steps_ = 0;
};

// Mean undiscounted return of a deterministic symbolic policy over
// `episodes` episodes with distinct environment seeds.
struct EpisodeResult {
  int episode = 0;
  std::uint64_t seed = 0;
  double ret = 0.0;
  int length = 0;
};
struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<EpisodeResult> episodes;
};
EvalStats evaluate_policy(std::span<const ExprPtr> trees, EnvKind kind, const TaskParams& params,
                          int episodes, std::uint64_t seed_base, int horizon = -1);

}  // namespace espl
