#include "espl/envs.hpp"

#include <cmath>

namespace espl {

std::string_view env_name(EnvKind kind) {
  switch (kind) {
    case EnvKind::CartPole: return "cartpole";
    case EnvKind::Pendulum: return "pendulum";
    case EnvKind::MountainCar: return "mountaincar";
    case EnvKind::CartPoleFL: return "cartpole-fl";
  }
  fail("env_name: bad EnvKind");
}

EnvKind env_from_name(std::string_view name) {
  if (name == "cartpole") return EnvKind::CartPole;
  if (name == "pendulum") return EnvKind::Pendulum;
  if (name == "mountaincar") return EnvKind::MountainCar;
  if (name == "cartpole-fl") return EnvKind::CartPoleFL;
  fail("unknown environment: '" + std::string(name) + "'");
}

bool is_meta_env(EnvKind kind) { return kind == EnvKind::CartPoleFL; }

TaskParams default_task(EnvKind kind) {
  TaskParams p;
  if (kind == EnvKind::CartPoleFL) {
    p.force = 10.0;  // center of the training band
    p.half_length = 0.5;
  }
  return p;
}

TaskParams sample_task(EnvKind kind, TaskSplit split, RngStream& rng) {
  if (kind != EnvKind::CartPoleFL) {
    require(split == TaskSplit::Train,
            std::string(env_name(kind)) + ": test task split is not supported");
    return default_task(kind);
  }
  TaskParams p = default_task(kind);
  if (split == TaskSplit::Train) {
    p.force = rng.uniform(7.5, 12.5);
    p.half_length = rng.uniform(0.3, 0.7);
  } else {
    // OOD bands on both sides of the training box
    p.force = rng.bernoulli(0.5) ? rng.uniform(5.0, 7.5) : rng.uniform(12.5, 15.0);
    p.half_length = rng.bernoulli(0.5) ? rng.uniform(0.2, 0.3) : rng.uniform(0.7, 0.8);
  }
  return p;
}

namespace {

CartPoleAccel cartpole_accel_unchecked(const Vec& s, double a, const TaskParams& p) {
  const double f = p.force, m = p.pole_mass, M = p.cart_mass, L = p.half_length, g = p.gravity;
  const double theta = s(2), theta_dot = s(3);
  const double sin_t = std::sin(theta), cos_t = std::cos(theta);
  CartPoleAccel out;
  out.x_acc = (8.0 * f * a + 2.0 * m * sin_t * (4.0 * L * theta_dot * theta_dot - 3.0 * g * cos_t)) /
              (8.0 * M - 3.0 * m * std::cos(2.0 * theta) + 5.0 * m);
  out.theta_acc =
      (g * sin_t - cos_t * (f * a + L * m * theta_dot * theta_dot * sin_t) / (m + M)) /
      (L * (4.0 / 3.0 - m * cos_t * cos_t / (m + M)));
  return out;
}

double angle_normalize(double x) {
  double y = std::fmod(x + M_PI, 2.0 * M_PI);
  if (y < 0.0) y += 2.0 * M_PI;
  return y - M_PI;
}

}  // namespace

CartPoleAccel cartpole_accel(const Vec& state, double action, const TaskParams& params) {
  require(state.size() == 4, "cartpole: state must have 4 entries");
  return cartpole_accel_unchecked(state, action, params);
}

StepOut cartpole_step(const Vec& state, double action, const TaskParams& params, double dt) {
  require(state.size() == 4, "cartpole: state must have 4 entries");
  require(state.allFinite(), "cartpole: non-finite state");
  const CartPoleAccel acc = cartpole_accel_unchecked(state, action, params);
  StepOut out;
  out.next_state = Vec(4);
  out.next_state(1) = state(1) + dt * acc.x_acc;
  out.next_state(3) = state(3) + dt * acc.theta_acc;
  out.next_state(0) = state(0) + dt * out.next_state(1);
  out.next_state(2) = state(2) + dt * out.next_state(3);
  out.reward = 1.0;
  out.done = std::abs(out.next_state(2)) > 0.2095 || std::abs(out.next_state(0)) > 2.4;
  return out;
}

StepOut pendulum_step(const Vec& state, double action, const TaskParams& params, double dt) {
  require(state.size() == 2, "pendulum: internal state must have 2 entries");
  require(state.allFinite(), "pendulum: non-finite state");
  const double g = params.pend_gravity, m = params.pend_mass, l = params.pend_length;
  const double theta = state(0), theta_dot = state(1);
  const double u = std::clamp(2.0 * action, -2.0, 2.0);
  const double norm = angle_normalize(theta);
  StepOut out;
  out.reward = -(norm * norm + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
  const double acc = 3.0 * g / (2.0 * l) * std::sin(theta) + 3.0 / (m * l * l) * u;
  out.next_state = Vec(2);
  out.next_state(1) = std::clamp(theta_dot + dt * acc, -8.0, 8.0);
  out.next_state(0) = theta + dt * out.next_state(1);
  out.done = false;  // only the horizon ends an episode
  return out;
}

StepOut mountaincar_step(const Vec& state, double action, const TaskParams& params) {
  require(state.size() == 2, "mountaincar: state must have 2 entries");
  require(state.allFinite(), "mountaincar: non-finite state");
  const auto at_goal = [](double pos, double vel) { return pos >= 0.45 && vel >= 0.0; };
  const double force = std::clamp(action, -1.0, 1.0);
  double position = state(0), velocity = state(1);
  velocity += force * params.power - 0.0025 * std::cos(3.0 * position);
  velocity = std::clamp(velocity, -0.07, 0.07);
  position += velocity;
  position = std::clamp(position, -1.2, 0.6);
  if (position <= -1.2 && velocity < 0.0) velocity = 0.0;
  StepOut out;
  out.next_state = Vec(2);
  out.next_state << position, velocity;
  // a state already resting on the goal counts as solved too
  out.done = at_goal(position, velocity) || at_goal(state(0), state(1));
  out.reward = (out.done ? 100.0 : 0.0) - 0.1 * force * force;
  return out;
}

int Env::default_horizon(EnvKind kind) {
  switch (kind) {
    case EnvKind::CartPole: return 1000;
    case EnvKind::CartPoleFL: return 200;
    case EnvKind::Pendulum: return 200;
    case EnvKind::MountainCar: return 999;
  }
  fail("default_horizon: bad EnvKind");
}

Env::Env(EnvKind kind, TaskParams params, int horizon)
    : kind_(kind), params_(params), horizon_(horizon > 0 ? horizon : default_horizon(kind)) {}

int Env::obs_dim() const {
  switch (kind_) {
    case EnvKind::CartPole:
    case EnvKind::CartPoleFL: return 4;
    case EnvKind::Pendulum: return 3;
    case EnvKind::MountainCar: return 2;
  }
  fail("obs_dim: bad EnvKind");
}

Vec Env::reset(RngStream& rng) {
  steps_ = 0;
  switch (kind_) {
    case EnvKind::CartPole:
    case EnvKind::CartPoleFL:
      state_ = Vec(4);
      for (int i = 0; i < 4; ++i) state_(i) = rng.uniform(-0.05, 0.05);
      break;
    case EnvKind::Pendulum:
      state_ = Vec(2);
      state_(0) = rng.uniform(-M_PI, M_PI);
      state_(1) = rng.uniform(-1.0, 1.0);
      break;
    case EnvKind::MountainCar:
      state_ = Vec(2);
      state_(0) = rng.uniform(-0.6, -0.4);
      state_(1) = 0.0;
      break;
  }
  return observe();
}

Vec Env::observe() const {
  if (kind_ == EnvKind::Pendulum) {
    Vec obs(3);
    obs << std::cos(state_(0)), std::sin(state_(0)), state_(1);
    return obs;
  }
  return state_;
}

Env::Result Env::step(const Vec& action) {
  require(action.size() == 1, "step: expected a 1-dimensional action");
  const double a = std::clamp(action(0), -1.0, 1.0);
  StepOut s;
  switch (kind_) {
    case EnvKind::CartPole:
    case EnvKind::CartPoleFL:
      s = cartpole_step(state_, a, params_);
      break;
    case EnvKind::Pendulum:
      s = pendulum_step(state_, a, params_);
      break;
    case EnvKind::MountainCar:
      s = mountaincar_step(state_, a, params_);
      break;
  }
  state_ = s.next_state;
  ++steps_;
  Result r;
  r.obs = observe();
  r.reward = s.reward;
  r.done = s.done;
  r.truncated = !s.done && steps_ >= horizon_;
  return r;
}

StateBox Env::observation_box() const {
  StateBox box;
  switch (kind_) {
    case EnvKind::CartPole:
    case EnvKind::CartPoleFL:
      box.lo = Vec(4);
      box.hi = Vec(4);
      box.lo << -2.4, -4.0, -0.25, -3.0;
      box.hi << 2.4, 4.0, 0.25, 3.0;
      break;
    case EnvKind::Pendulum:
      box.lo = Vec(3);
      box.hi = Vec(3);
      box.lo << -1.0, -1.0, -8.0;
      box.hi << 1.0, 1.0, 8.0;
      break;
    case EnvKind::MountainCar:
      box.lo = Vec(2);
      box.hi = Vec(2);
      box.lo << -1.2, -0.07;
      box.hi << 0.6, 0.07;
      break;
  }
  return box;
}

EvalStats evaluate_policy(std::span<const ExprPtr> trees, EnvKind kind, const TaskParams& params,
                          int episodes, std::uint64_t seed_base, int horizon) {
  require(episodes > 0, "evaluate: episodes must be positive");
  require(trees.size() == 1, "evaluate: expected one expression per action dimension");
  EvalStats stats;
  stats.min = INFINITY;
  stats.max = -INFINITY;
  double sum = 0.0, sum_sq = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    std::uint64_t episode_seed = seed_base + 0x9e3779b97f4a7c15ULL * (ep + 1);
    RngStream rng(episode_seed);
    Env env(kind, params, horizon);
    Vec obs = env.reset(rng);
    double ret = 0.0;
    int len = 0;
    for (;;) {
      std::vector<double> s(obs.data(), obs.data() + obs.size());
      Vec a(1);
      a(0) = std::tanh(evaluate(*trees[0], s));
      Env::Result r = env.step(a);
      ret += r.reward;
      ++len;
      obs = r.obs;
      if (r.done || r.truncated) break;
    }
    stats.episodes.push_back({ep, episode_seed, ret, len});
    sum += ret;
    sum_sq += ret * ret;
    stats.min = std::min(stats.min, ret);
    stats.max = std::max(stats.max, ret);
  }
  stats.mean = sum / episodes;
  const double var = std::max(0.0, sum_sq / episodes - stats.mean * stats.mean);
  stats.stddev = std::sqrt(var);
  return stats;
}

}  // namespace espl
