#include "espl/sac_trainer.hpp"

#include <cmath>
#include <limits>

namespace espl {

std::string_view selector_name(SelectorMode mode) {
  switch (mode) {
    case SelectorMode::L0: return "l0";
    case SelectorMode::L1: return "l1";
    case SelectorMode::None: return "none";
  }
  fail("selector_name: bad mode");
}

SelectorMode selector_from_name(std::string_view name) {
  if (name == "l0") return SelectorMode::L0;
  if (name == "l1") return SelectorMode::L1;
  if (name == "none") return SelectorMode::None;
  fail("unknown selector mode: '" + std::string(name) + "'");
}

TrainerConfig TrainerConfig::defaults_for(EnvKind env) {
  TrainerConfig c;
  c.env = env;
  switch (env) {
    case EnvKind::CartPole:
    case EnvKind::CartPoleFL:
      c.select_scale = 0.08;
      c.l0_target_ratio = 0.002;
      c.schedule_iters = 400;
      break;
    case EnvKind::MountainCar:
      c.select_scale = 0.64;
      c.l0_target_ratio = 0.002;
      c.schedule_iters = 200;
      break;
    case EnvKind::Pendulum:
      c.select_scale = 0.08;
      c.l0_target_ratio = 0.002;
      c.schedule_iters = 300;
      break;
  }
  c.total_iters = 500;
  return c;
}

void TrainerConfig::validate() const {
  require(discount > 0.0 && discount < 1.0, "config: discount must lie in (0,1)");
  require(minibatch > 0, "config: minibatch must be positive");
  require(lr > 0.0, "config: learning rate must be positive");
  require(target_smoothing > 0.0 && target_smoothing <= 1.0,
          "config: target smoothing must lie in (0,1]");
  require(tau_target > 0.0 && tau_target < 1.0, "config: tau_target must lie in (0,1)");
  require(l0_target_ratio > 0.0 && l0_target_ratio < 1.0,
          "config: l0_target_ratio must lie in (0,1)");
  require(schedule_iters > 0, "config: schedule_iters must be positive");
  require(total_iters > 0, "config: total_iters must be positive");
  require(steps_per_iter >= 0, "config: steps_per_iter must be non-negative");
  require(min_fill > 0, "config: min_fill must be positive");
  require(eval_episodes > 0, "config: eval_episodes must be positive");
}

namespace {

Mat tanh_correction_values(const Mat& a) {
  return (1.0 - a.array().square() + 1e-6).log();
}

Mat gaussian_logp_values(const Mat& noise, const Mat& log_std) {
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);
  // with u = mu + std*eps the standardized residual is exactly eps
  return (-0.5 * noise.array().square() - log_std.array() - kHalfLog2Pi).matrix();
}

}  // namespace

Trainer::Trainer(const TrainerConfig& config, const TaskParams& task)
    : config_(config),
      task_(task),
      env_(config.env, task, config.horizon),
      net_config_(NetworkConfig::defaults(env_.obs_dim(), env_.action_dim(), config.structure)),
      nets_(),
      selector_(1, SelectorConfig{}),  // re-initialized below once sizes are known
      adam_actor_(config.lr),
      adam_critic_(config.lr),
      adam_alpha_(config.lr),
      buffer_(config.replay_capacity, env_.obs_dim(), env_.action_dim()),
      rng_env_(0),
      rng_mask_(0),
      rng_gumbel_(0),
      rng_noise_(0),
      rng_minibatch_(0),
      rng_eval_(0) {
  config_.validate();
  RngPool pool(config.seed);
  rng_env_ = pool.stream("env");
  rng_mask_ = pool.stream("mask");
  rng_gumbel_ = pool.stream("gumbel");
  rng_noise_ = pool.stream("noise");
  rng_minibatch_ = pool.stream("minibatch");
  rng_eval_ = pool.stream("eval");

  RngStream init = pool.stream("init");
  nets_ = build_policy(net_config_, init);

  SelectorConfig sel;
  sel.tau_target = config.tau_target;
  sel.l0_target_ratio = config.l0_target_ratio;
  sel.schedule_iters = config.schedule_iters;
  sel.p_init = config.selector == SelectorMode::L0 ? config.p_init : 1.0;
  selector_ = SelectorState(maskable_count(), sel);

  const int s = env_.obs_dim(), a = env_.action_dim();
  const int ch = config.critic_hidden, sh = config.std_hidden;
  const std::vector<int> critic_widths = {s + a, ch, ch, 1};
  const std::vector<int> std_widths = {s, sh, sh, a};
  q1_ = Mlp::make(critic_widths, init);
  q2_ = Mlp::make(critic_widths, init);
  qt1_ = q1_;
  qt2_ = q2_;
  std_net_ = Mlp::make(std_widths, init);
  log_alpha_ = std::log(config.entropy_alpha);
}

int Trainer::maskable_count() const {
  return net_config_.weight_count() * net_config_.action_dims;
}

double Trainer::alpha() const {
  return config_.auto_entropy ? std::exp(log_alpha_) : config_.entropy_alpha;
}

Trainer::PolicyValues Trainer::policy_values(const Mat& obs, const Mat& mask) {
  // values only: every leaf is constant, backward never visits this subgraph
  ad::Var state = tape_.constant(obs);
  ad::Var mask_var = tape_.constant(mask);
  Eigen::Index offset = 0;
  std::vector<ad::Var> outs;
  for (const SymbolicNetwork& net : nets_) {
    LiftedNet lifted = lift(tape_, net, /*requires_grad=*/false);
    std::vector<ad::Var> eff = masked_weights(tape_, net_config_, lifted.w, mask_var, offset);
    outs.push_back(forward(tape_, net_config_, eff, lifted.b, state).preactivation);
  }
  PolicyValues out;
  out.mu = outs.size() == 1 ? outs.front().value() : ad::concat_rows(outs).value();
  LiftedMlp f = lift(tape_, std_net_, false);
  out.log_std = ad::clamp(mlp_forward(tape_, f, state, Activation::Relu), -20.0, 2.0).value();
  return out;
}

Vec Trainer::sample_action(const Vec& obs, const Mat& mask) {
  tape_.clear();
  PolicyValues pv = policy_values(obs, mask);
  Vec a(pv.mu.rows());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double std = std::exp(pv.log_std(i, 0));
    a(i) = std::tanh(pv.mu(i, 0) + std * rng_noise_.gaussian());
  }
  return a;
}

void Trainer::collect_episode() {
  Mat mask;
  if (forced_mask_)
    mask = *forced_mask_;
  else if (config_.selector == SelectorMode::L0)
    mask = selector_.sample_mask_eval(rng_mask_);
  else
    mask = Mat::Ones(maskable_count(), 1);

  Vec obs = env_.reset(rng_env_);
  const bool warmup = episodes_ < config_.warmup_episodes;
  for (;;) {
    Vec a(env_.action_dim());
    if (warmup)
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng_noise_.uniform(-1.0, 1.0);
    else
      a = sample_action(obs, mask);
    Env::Result r = env_.step(a);
    buffer_.add(obs, a, r.obs, r.reward * config_.reward_scale, r.done);
    obs = r.obs;
    if (r.done || r.truncated) break;
  }
  ++episodes_;
}

StepStats Trainer::training_step(int iteration) {
  const ScheduleValues sched = selector_.at(iteration);
  const double a_now = alpha();
  const int batch_size = config_.minibatch;
  const int adim = env_.action_dim();

  tape_.clear();
  ReplayBuffer::Batch batch = buffer_.sample(batch_size, rng_minibatch_);

  // ---- mask, shared across this step's policy passes ----
  ad::Var p_var = tape_.leaf(selector_.probabilities(), true);
  std::optional<ad::Var> mask_var;
  Mat mask_values;
  if (config_.selector == SelectorMode::L0) {
    if (forced_mask_)
      mask_var = tape_.constant(*forced_mask_);
    else
      mask_var = sample_mask_train(tape_, p_var, sched.tau, rng_gumbel_);
    mask_values = mask_var->value();
  } else {
    mask_values = Mat::Ones(maskable_count(), 1);
    mask_var = tape_.constant(mask_values);
  }

  // ---- soft Bellman target (no gradients) ----
  PolicyValues next = policy_values(batch.s_next, mask_values);
  Mat eps2(adim, batch_size);
  for (Eigen::Index i = 0; i < eps2.size(); ++i) eps2(i) = rng_noise_.gaussian();
  Mat std2 = next.log_std.array().exp();
  Mat u2 = next.mu + std2.cwiseProduct(eps2);
  Mat a2 = u2.array().tanh();
  Mat logp2 = (gaussian_logp_values(eps2, next.log_std) - tanh_correction_values(a2))
                  .colwise()
                  .sum();

  Mat sa_next(env_.obs_dim() + adim, batch_size);
  sa_next << batch.s_next, a2;
  ad::Var sa_next_var = tape_.constant(sa_next);
  Mat q1t = mlp_forward(tape_, lift(tape_, qt1_, false), sa_next_var, Activation::Relu).value();
  Mat q2t = mlp_forward(tape_, lift(tape_, qt2_, false), sa_next_var, Activation::Relu).value();
  Mat y = batch.r +
          config_.discount *
              (Mat::Ones(1, batch_size) - batch.done)
                  .cwiseProduct(q1t.cwiseMin(q2t) - a_now * logp2);

  // ---- critic graph ----
  Mat sa(env_.obs_dim() + adim, batch_size);
  sa << batch.s, batch.a;
  ad::Var sa_var = tape_.constant(sa);
  LiftedMlp lq1 = lift(tape_, q1_, true);
  LiftedMlp lq2 = lift(tape_, q2_, true);
  ad::Var y_var = tape_.constant(y);
  ad::Var q1v = mlp_forward(tape_, lq1, sa_var, Activation::Relu);
  ad::Var q2v = mlp_forward(tape_, lq2, sa_var, Activation::Relu);
  ad::Var critic_loss = ad::add(ad::mean_all(ad::square(ad::sub(q1v, y_var))),
                                ad::mean_all(ad::square(ad::sub(q2v, y_var))));

  // ---- actor graph (critics as constants: actor gradients stop at them) ----
  ad::Var state_var = tape_.constant(batch.s);
  Eigen::Index offset = 0;
  std::vector<ad::Var> outs;
  std::optional<ad::Var> penalty_rows;
  std::vector<LiftedNet> lifted_nets;
  lifted_nets.reserve(nets_.size());
  for (const SymbolicNetwork& net : nets_) {
    LiftedNet lifted = lift(tape_, net, true);
    std::vector<ad::Var> eff = masked_weights(tape_, net_config_, lifted.w, *mask_var, offset);
    ForwardResult fwd = forward(tape_, net_config_, eff, lifted.b, state_var);
    outs.push_back(fwd.preactivation);
    penalty_rows = penalty_rows ? ad::add(*penalty_rows, fwd.penalty) : fwd.penalty;
    lifted_nets.push_back(std::move(lifted));
  }
  ad::Var mu = outs.size() == 1 ? outs.front() : ad::concat_rows(outs);
  LiftedMlp lf = lift(tape_, std_net_, true);
  ad::Var log_std = ad::clamp(mlp_forward(tape_, lf, state_var, Activation::Relu), -20.0, 2.0);
  Mat eps(adim, batch_size);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng_noise_.gaussian();
  ad::Var u = ad::reparam_sample(mu, ad::exp(log_std), eps);
  ad::Var a_var = ad::tanh(u);
  ad::Var logp_rows = ad::sub(ad::gaussian_log_density(u, mu, log_std),
                              ad::log(ad::add(ad::sub(1.0, ad::square(a_var)), 1e-6)));
  ad::Var logp = adim == 1 ? logp_rows : ad::sum_over_rows(logp_rows);

  ad::Var sa_actor = ad::concat_rows({state_var, a_var});
  ad::Var q1a = mlp_forward(tape_, lift(tape_, q1_, false), sa_actor, Activation::Relu);
  ad::Var q2a = mlp_forward(tape_, lift(tape_, q2_, false), sa_actor, Activation::Relu);
  ad::Var actor_sac = ad::mean_all(ad::sub(ad::mul(logp, a_now), ad::min(q1a, q2a)));
  ad::Var penalty_mean = ad::mean_all(*penalty_rows);
  ad::Var actor_loss = ad::add(actor_sac, ad::mul(penalty_mean, config_.penalty_scale));

  double select_value = 0.0;
  if (config_.selector == SelectorMode::L0) {
    ad::Var select = select_loss(tape_, p_var, sched.l_min);
    select_value = select.value()(0, 0);
    actor_loss = ad::add(actor_loss, ad::mul(select, config_.select_scale));
  } else if (config_.selector == SelectorMode::L1) {
    const double scale = config_.l1_scale > 0.0 ? config_.l1_scale : config_.select_scale;
    std::optional<ad::Var> l1;
    for (const LiftedNet& ln : lifted_nets)
      for (const ad::Var& w : ln.w) {
        ad::Var term = ad::sum_all(ad::max(w, ad::neg(w)));  // |w| elementwise
        l1 = l1 ? ad::add(*l1, term) : term;
      }
    select_value = l1->value()(0, 0);
    actor_loss = ad::add(actor_loss, ad::mul(*l1, scale));
  }

  // ---- losses computed; now update (critic, then actor, then alpha) ----
  tape_.backward(critic_loss);
  std::vector<Mat> critic_grads;
  std::vector<Mat*> critic_params;
  for (std::size_t l = 0; l < lq1.W.size(); ++l) {
    critic_grads.push_back(lq1.W[l].grad());
    critic_grads.push_back(lq1.b[l].grad());
    critic_params.push_back(&q1_.W[l]);
    critic_params.push_back(&q1_.b[l]);
  }
  for (std::size_t l = 0; l < lq2.W.size(); ++l) {
    critic_grads.push_back(lq2.W[l].grad());
    critic_grads.push_back(lq2.b[l].grad());
    critic_params.push_back(&q2_.W[l]);
    critic_params.push_back(&q2_.b[l]);
  }

  tape_.backward(actor_loss);
  std::vector<Mat> actor_grads;
  std::vector<Mat*> actor_params;
  for (std::size_t n = 0; n < nets_.size(); ++n) {
    for (std::size_t l = 0; l < lifted_nets[n].w.size(); ++l) {
      actor_grads.push_back(lifted_nets[n].w[l].grad());
      actor_params.push_back(&nets_[n].w[l]);
    }
    for (std::size_t l = 0; l < lifted_nets[n].b.size(); ++l) {
      actor_grads.push_back(lifted_nets[n].b[l].grad());
      actor_params.push_back(&nets_[n].b[l]);
    }
  }
  if (config_.selector == SelectorMode::L0) {
    actor_grads.push_back(p_var.grad());
    actor_params.push_back(&selector_.probabilities());
  }
  for (std::size_t l = 0; l < lf.W.size(); ++l) {
    actor_grads.push_back(lf.W[l].grad());
    actor_grads.push_back(lf.b[l].grad());
    actor_params.push_back(&std_net_.W[l]);
    actor_params.push_back(&std_net_.b[l]);
  }

  adam_critic_.step(critic_params, critic_grads);
  qt1_.polyak_from(q1_, config_.target_smoothing);
  qt2_.polyak_from(q2_, config_.target_smoothing);

  adam_actor_.step(actor_params, actor_grads);
  selector_.clip();

  StepStats stats;
  stats.critic_loss = critic_loss.value()(0, 0);
  stats.actor_loss = actor_loss.value()(0, 0);
  stats.penalty = penalty_mean.value()(0, 0);
  stats.select = select_value;
  stats.alpha = a_now;

  if (config_.auto_entropy) {
    const double mean_logp = logp.value().mean();
    const double target_entropy = -static_cast<double>(adim);
    Mat g = Mat::Constant(1, 1, -(mean_logp + target_entropy));
    Mat la = Mat::Constant(1, 1, log_alpha_);
    Mat* pla = &la;
    adam_alpha_.step(std::span<Mat* const>(&pla, 1), std::span<const Mat>(&g, 1));
    log_alpha_ = la(0, 0);
  }

  if (!std::isfinite(stats.critic_loss) || !std::isfinite(stats.actor_loss))
    fail("training diverged at iteration " + std::to_string(iteration) +
         ": critic_loss=" + std::to_string(stats.critic_loss) +
         " actor_loss=" + std::to_string(stats.actor_loss) +
         " alpha=" + std::to_string(a_now));
  return stats;
}

Mat Trainer::extraction_mask() const {
  switch (config_.selector) {
    case SelectorMode::L0:
      return selector_.threshold_mask();
    case SelectorMode::L1: {
      Mat mask(maskable_count(), 1);
      Eigen::Index k = 0;
      for (const SymbolicNetwork& net : nets_)
        for (const Mat& w : net.w)
          for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i)
              mask(k++, 0) = std::abs(w(i, j)) >= config_.l1_prune ? 1.0 : 0.0;
      return mask;
    }
    case SelectorMode::None:
      return Mat::Ones(maskable_count(), 1);
  }
  fail("extraction_mask: bad selector");
}

std::vector<ExprPtr> Trainer::extract_policy() const {
  std::vector<ExprPtr> trees = extract(net_config_, nets_, extraction_mask());
  for (ExprPtr& t : trees) t = simplify(t);
  return trees;
}

double Trainer::evaluate_current(int episodes, std::uint64_t seed_salt) const {
  std::vector<ExprPtr> trees = extract_policy();
  return evaluate_policy(trees, config_.env, task_, episodes,
                         config_.seed * 0x100000001b3ULL + seed_salt, config_.horizon)
      .mean;
}

TrainResult Trainer::train(const IterCallback& on_iteration) {
  TrainResult result;
  double last_eval = std::numeric_limits<double>::quiet_NaN();
  // periodic extraction doubles as checkpoint selection: the best-evaluated
  // iterate is kept alongside the final one and the better policy is reported
  double best_eval = -std::numeric_limits<double>::infinity();
  std::vector<ExprPtr> best_trees;
  int best_iteration = -1;
  for (int t = 0; t < config_.total_iters; ++t) {
    const ScheduleValues sched = selector_.at(t);
    collect_episode();
    StepStats stats;
    if (buffer_.size() >= static_cast<std::size_t>(config_.min_fill)) {
      for (int k = 0; k < config_.steps_per_iter; ++k) stats = training_step(t);
    }
    if (config_.eval_interval > 0 &&
        (t % config_.eval_interval == 0 || t + 1 == config_.total_iters)) {
      std::vector<ExprPtr> trees = extract_policy();
      last_eval = evaluate_policy(trees, config_.env, task_, config_.eval_episodes,
                                  config_.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(t),
                                  config_.horizon)
                      .mean;
      if (t >= config_.schedule_iters && last_eval > best_eval) {
        best_eval = last_eval;
        best_trees = std::move(trees);
        best_iteration = t;
      }
    }

    IterationLog row;
    row.iter = t;
    row.episodes = episodes_;
    row.return_eval = last_eval;
    row.l0_ratio = selector_.l0_ratio();
    row.uncertainty = selector_.uncertainty();
    row.tau = sched.tau;
    row.lmin = sched.l_min;
    row.actor_loss = stats.actor_loss;
    row.critic_loss = stats.critic_loss;
    row.penalty = stats.penalty;
    result.logs.push_back(row);
    if (on_iteration) on_iteration(row);
  }

  std::vector<ExprPtr> trees = extract_policy();
  int report_iteration = config_.total_iters;
  if (best_iteration >= 0) {
    const double final_eval =
        evaluate_policy(trees, config_.env, task_, config_.eval_episodes,
                        config_.seed * 0x100000001b3ULL + 0xbe57ULL, config_.horizon)
            .mean;
    if (best_eval > final_eval) {
      trees = best_trees;
      report_iteration = best_iteration;
    }
  }
  Env probe(config_.env, task_, config_.horizon);
  std::vector<std::string> assumptions;
  RngStream strip_rng(config_.seed ^ 0x5bf03635ULL);
  for (ExprPtr& t : trees)
    t = simplify(verify_and_strip(t, probe.observation_box(), 2000, strip_rng, &assumptions));
  result.report = metrics(std::move(trees));
  result.report.seed = config_.seed;
  result.report.iteration = report_iteration;
  result.report.assumptions = std::move(assumptions);
  result.final_eval =
      evaluate_policy(result.report.trees, config_.env, task_, config_.eval_episodes,
                      config_.seed * 0x100000001b3ULL + 0xfeedULL, config_.horizon)
          .mean;
  result.episodes = episodes_;
  result.nets = nets_;
  result.p = selector_.probabilities();
  result.critic1 = q1_;
  result.critic2 = q2_;
  result.target1 = qt1_;
  result.target2 = qt2_;
  result.std_net = std_net_;
  result.log_alpha = log_alpha_;
  return result;
}

}  // namespace espl
