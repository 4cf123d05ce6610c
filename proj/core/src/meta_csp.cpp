#include "espl/meta_csp.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace espl {

MetaConfig MetaConfig::defaults() { return MetaConfig{}; }

void MetaConfig::validate() const {
  require(is_meta_env(env), "meta config: environment has no task distribution");
  require(latent_dim > 0, "meta config: latent_dim must be positive");
  require(meta_batch > 0 && meta_batch <= train_tasks,
          "meta config: meta_batch must lie in [1, train_tasks]");
  require(kl_scale >= 0.0, "meta config: kl_scale must be non-negative");
  require(context_size > 0, "meta config: context_size must be positive");
  require(collect_cycles > 0, "meta config: collect_cycles must be positive");
  require(schedule_iters > 0 && total_iters > 0, "meta config: iteration counts must be positive");
}

int MetaModel::context_feature_dim() const {
  return 2 * net_config.state_dim + net_config.action_dims + 1;
}

int MetaModel::total_wb() const {
  return net_config.action_dims * net_config.param_count();
}

int MetaModel::maskable() const {
  return net_config.action_dims * net_config.weight_count();
}

MetaModel make_meta_model(const MetaConfig& config) {
  config.validate();
  MetaModel model;
  model.config = config;

  Env probe(config.env, default_task(config.env));
  model.net_config =
      NetworkConfig::defaults(probe.obs_dim(), probe.action_dim(), config.structure);

  RngPool pool(config.seed);
  RngStream init = pool.stream("init");
  RngStream task_rng = pool.stream("task");

  const int s = probe.obs_dim(), a = probe.action_dim(), z = config.latent_dim;
  const int eh = config.encoder_hidden, gh = config.generator_hidden;
  const std::vector<int> enc_widths = {model.context_feature_dim(), eh, eh, eh, 2 * z};
  model.encoder = Mlp::make(enc_widths, init);
  const std::vector<int> phi_widths = {z, gh, gh, model.total_wb()};
  model.phi = Mlp::make(phi_widths, init);
  const std::vector<int> psi_widths = {z, gh, gh, model.maskable()};
  // sigmoid(3.0) = 0.9526: most paths start active
  model.psi = Mlp::make(psi_widths, init, /*last_bias=*/3.0);
  const std::vector<int> std_widths = {s + z, config.std_hidden, config.std_hidden, a};
  model.std_net = Mlp::make(std_widths, init);
  const std::vector<int> critic_widths = {s + a + z, config.critic_hidden, config.critic_hidden, 1};
  model.q1 = Mlp::make(critic_widths, init);
  model.q2 = Mlp::make(critic_widths, init);
  model.qt1 = model.q1;
  model.qt2 = model.q2;

  for (int i = 0; i < config.train_tasks; ++i)
    model.train_tasks.push_back(sample_task(config.env, TaskSplit::Train, task_rng));
  for (int i = 0; i < config.test_tasks; ++i)
    model.test_tasks.push_back(sample_task(config.env, TaskSplit::Test, task_rng));
  return model;
}

Posterior encode_context(const MetaModel& model, const Mat& context) {
  const int z = model.config.latent_dim;
  Posterior post;
  post.mean = Vec::Zero(z);
  post.var = Vec::Ones(z);
  if (context.cols() == 0) return post;  // prior
  require(context.rows() == model.context_feature_dim(),
          "encode: context feature dim mismatch (" + shape_str(context) + ")");
  Mat out = mlp_forward_values(model.encoder, context, Activation::Relu);
  Mat mu = out.topRows(z);
  Mat var = (out.bottomRows(z).unaryExpr([](double x) {
              return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
            })).array() + 1e-6;
  // product of Gaussians, prior N(0, I) included
  for (int i = 0; i < z; ++i) {
    double precision = 1.0;
    double weighted_mean = 0.0;
    for (Eigen::Index n = 0; n < context.cols(); ++n) {
      precision += 1.0 / var(i, n);
      weighted_mean += mu(i, n) / var(i, n);
    }
    post.var(i) = 1.0 / precision;
    post.mean(i) = weighted_mean / precision;
  }
  return post;
}

Mat context_features(const std::vector<Transition>& transitions, int max_size) {
  if (transitions.empty()) return Mat(0, 0);
  const int s = static_cast<int>(transitions.front().s.size());
  const int a = static_cast<int>(transitions.front().a.size());
  const int keep = std::min<int>(max_size, static_cast<int>(transitions.size()));
  Mat out(2 * s + a + 1, keep);
  const int start = static_cast<int>(transitions.size()) - keep;
  for (int j = 0; j < keep; ++j) {
    const Transition& t = transitions[start + j];
    out.block(0, j, s, 1) = t.s;
    out.block(s, j, a, 1) = t.a;
    out(s + a, j) = t.r;
    out.block(s + a + 1, j, s, 1) = t.s_next;
  }
  return out;
}

namespace {

// canonical flat layout of phi's output: per net, all w (column-major, layer
// order), then all b (layer order)
void fill_net_from_flat(SymbolicNetwork& net, const Mat& flat, Eigen::Index& idx) {
  for (Mat& w : net.w) {
    w = flat.middleRows(idx, w.size()).reshaped(w.rows(), w.cols());
    idx += w.size();
  }
  for (Mat& b : net.b) {
    b = flat.middleRows(idx, b.size()).reshaped(b.rows(), b.cols());
    idx += b.size();
  }
}

Mat sigmoid_values(const Mat& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

}  // namespace

GeneratedParams generate(const MetaModel& model, const Vec& z) {
  require(z.size() == model.config.latent_dim, "generate: latent dim mismatch");
  GeneratedParams out;
  Mat wb = mlp_forward_values(model.phi, z, Activation::Relu);
  Mat logits = mlp_forward_values(model.psi, z, Activation::Relu);
  out.p = sigmoid_values(logits);
  RngStream dummy(0);
  Eigen::Index idx = 0;
  for (int d = 0; d < model.net_config.action_dims; ++d) {
    SymbolicNetwork net = build(model.net_config, dummy);  // shapes only
    fill_net_from_flat(net, wb, idx);
    out.nets.push_back(std::move(net));
  }
  return out;
}

namespace {

struct PolicyVals {
  Mat mu;
  Mat log_std;
};

// values-only policy pass for generated parameters
PolicyVals generated_policy_values(ad::Tape& tape, const MetaModel& model,
                                   const GeneratedParams& gen, const Mat& mask, const Mat& obs,
                                   const Vec& z) {
  ad::Var state = tape.constant(obs);
  ad::Var mask_var = tape.constant(mask);
  Eigen::Index offset = 0;
  std::vector<ad::Var> outs;
  for (const SymbolicNetwork& net : gen.nets) {
    LiftedNet lifted = lift(tape, net, false);
    std::vector<ad::Var> eff = masked_weights(tape, model.net_config, lifted.w, mask_var, offset);
    outs.push_back(forward(tape, model.net_config, eff, lifted.b, state).preactivation);
  }
  PolicyVals out;
  out.mu = outs.size() == 1 ? outs.front().value() : ad::concat_rows(outs).value();
  Mat sz(obs.rows() + z.size(), obs.cols());
  sz << obs, z.replicate(1, obs.cols());
  out.log_std = mlp_forward_values(model.std_net, sz, Activation::Relu)
                    .array()
                    .max(-20.0)
                    .min(2.0);
  return out;
}

Mat tanh_correction_values(const Mat& a) { return (1.0 - a.array().square() + 1e-6).log(); }

Mat gaussian_logp_values(const Mat& noise, const Mat& log_std) {
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);
  return (-0.5 * noise.array().square() - log_std.array() - kHalfLog2Pi).matrix();
}

}  // namespace

AdaptResult adapt_to_task(const MetaModel& model, const TaskParams& task, int context_episodes,
                          std::uint64_t seed, int eval_episodes) {
  require(context_episodes >= 0, "adapt: context_episodes must be non-negative");
  RngPool pool(seed);
  RngStream rng_env = pool.stream("adapt-env");
  RngStream rng_mask = pool.stream("adapt-mask");
  RngStream rng_z = pool.stream("adapt-z");

  ad::Tape tape;
  std::vector<Transition> collected;
  Env env(model.config.env, task);
  for (int ep = 0; ep < context_episodes; ++ep) {
    Posterior post = encode_context(model, context_features(collected, model.config.context_size));
    Vec z(model.config.latent_dim);
    for (int i = 0; i < z.size(); ++i)
      z(i) = post.mean(i) + std::sqrt(post.var(i)) * rng_z.gaussian();
    GeneratedParams gen = generate(model, z);
    Mat mask(gen.p.rows(), 1);
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      mask(i, 0) = rng_mask.bernoulli(gen.p(i, 0)) ? 1.0 : 0.0;

    Vec obs = env.reset(rng_env);
    for (;;) {
      tape.clear();
      PolicyVals pv = generated_policy_values(tape, model, gen, mask, obs, z);
      Vec a(pv.mu.rows());
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = std::tanh(pv.mu(i, 0));
      Env::Result r = env.step(a);
      Transition tr;
      tr.s = obs;
      tr.a = a;
      tr.s_next = r.obs;
      tr.r = r.reward * model.config.reward_scale;  // context sees scaled rewards
      tr.done = r.done;
      collected.push_back(std::move(tr));
      obs = r.obs;
      if (r.done || r.truncated) break;
    }
  }

  AdaptResult result;
  Posterior post = encode_context(model, context_features(collected, model.config.context_size));
  result.z = post.mean;  // deterministic reported policy
  result.params = generate(model, result.z);
  std::vector<ExprPtr> trees =
      extract_deterministic(model.net_config, result.params.nets, result.params.p);
  std::vector<std::string> assumptions;
  RngStream strip_rng(seed ^ 0x9e37ULL);
  for (ExprPtr& t : trees)
    t = simplify(verify_and_strip(simplify(t), env.observation_box(), 2000, strip_rng,
                                  &assumptions));
  result.report = metrics(std::move(trees));
  result.report.seed = seed;
  result.report.assumptions = std::move(assumptions);
  if (eval_episodes > 0)
    result.mean_return = evaluate_policy(result.report.trees, model.config.env, task,
                                         eval_episodes, seed ^ 0xabcdULL)
                             .mean;
  return result;
}

MetaTrainer::MetaTrainer(const MetaConfig& config)
    : MetaTrainer(config, {}, {}) {}

MetaTrainer::MetaTrainer(const MetaConfig& config, std::vector<TaskParams> train_tasks,
                         std::vector<TaskParams> test_tasks)
    : config_(config),
      model_(make_meta_model(config)),
      adam_critic_(config.lr),
      adam_encoder_(config.lr),
      adam_actor_(config.lr),
      rng_env_(0),
      rng_mask_(0),
      rng_gumbel_(0),
      rng_noise_(0),
      rng_minibatch_(0),
      rng_z_(0),
      rng_context_(0) {
  if (!train_tasks.empty()) model_.train_tasks = std::move(train_tasks);
  if (!test_tasks.empty()) model_.test_tasks = std::move(test_tasks);
  require(static_cast<int>(model_.train_tasks.size()) >= config.meta_batch,
          "meta trainer: fewer train tasks than the meta batch");
  RngPool pool(config.seed);
  rng_env_ = pool.stream("env");
  rng_mask_ = pool.stream("mask");
  rng_gumbel_ = pool.stream("gumbel");
  rng_noise_ = pool.stream("noise");
  rng_minibatch_ = pool.stream("minibatch");
  rng_z_ = pool.stream("z");
  rng_context_ = pool.stream("context");

  Env probe(config.env, default_task(config.env));
  for (std::size_t i = 0; i < model_.train_tasks.size(); ++i)
    buffers_.emplace_back(config.per_task_capacity, probe.obs_dim(), probe.action_dim());
}

void MetaTrainer::collect_task_episode(int task_index, const GeneratedParams& gen, const Vec& z) {
  Mat mask(gen.p.rows(), 1);
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    mask(i, 0) = rng_mask_.bernoulli(gen.p(i, 0)) ? 1.0 : 0.0;
  Env env(config_.env, model_.train_tasks[task_index]);
  Vec obs = env.reset(rng_env_);
  for (;;) {
    tape_.clear();
    PolicyVals pv = generated_policy_values(tape_, model_, gen, mask, obs, z);
    Vec a(pv.mu.rows());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double std = std::exp(pv.log_std(i, 0));
      a(i) = std::tanh(pv.mu(i, 0) + std * rng_noise_.gaussian());
    }
    Env::Result r = env.step(a);
    buffers_[task_index].add(obs, a, r.obs, r.reward * config_.reward_scale, r.done);
    obs = r.obs;
    if (r.done || r.truncated) break;
  }
}

Mat MetaTrainer::sample_context(int task_index, RngStream& rng) const {
  const ReplayBuffer& buffer = buffers_[task_index];
  const int n = std::min<int>(config_.context_size, static_cast<int>(buffer.size()));
  ReplayBuffer::Batch batch = buffer.sample(n, rng);
  Mat out(2 * batch.s.rows() + batch.a.rows() + 1, n);
  out << batch.s, batch.a, batch.r, batch.s_next;
  return out;
}

void MetaTrainer::collect_iteration() {
  for (std::size_t i = 0; i < model_.train_tasks.size(); ++i) {
    for (int k = 0; k < config_.collect_cycles; ++k) {
      Posterior post;
      if (buffers_[i].size() == 0) {
        post.mean = Vec::Zero(config_.latent_dim);
        post.var = Vec::Ones(config_.latent_dim);
      } else {
        post = encode_context(model_, sample_context(static_cast<int>(i), rng_context_));
      }
      Vec z(config_.latent_dim);
      for (int d = 0; d < z.size(); ++d)
        z(d) = post.mean(d) + std::sqrt(post.var(d)) * rng_z_.gaussian();
      GeneratedParams gen = generate(model_, z);
      collect_task_episode(static_cast<int>(i), gen, z);
    }
  }
}

MetaTrainer::MetaStepStats MetaTrainer::training_step(int iteration) {
  const ScheduleValues sched =
      schedule(iteration, config_.schedule_iters, config_.tau_target, config_.l0_target_ratio,
               static_cast<double>(model_.maskable()));
  const double alpha = config_.entropy_alpha;
  const int batch_size = config_.minibatch;
  const int adim = model_.net_config.action_dims;
  const int latent = config_.latent_dim;

  // meta batch: distinct tasks via partial Fisher-Yates
  std::vector<int> order(model_.train_tasks.size());
  std::iota(order.begin(), order.end(), 0);
  for (int k = 0; k < config_.meta_batch; ++k) {
    const int j = k + static_cast<int>(rng_minibatch_.integer(order.size() - k));
    std::swap(order[k], order[j]);
  }

  tape_.clear();
  LiftedMlp enc = lift(tape_, model_.encoder, true);
  LiftedMlp phi = lift(tape_, model_.phi, true);
  LiftedMlp psi = lift(tape_, model_.psi, true);
  LiftedMlp fstd = lift(tape_, model_.std_net, true);
  LiftedMlp lq1 = lift(tape_, model_.q1, true);
  LiftedMlp lq2 = lift(tape_, model_.q2, true);

  std::optional<ad::Var> critic_total, kl_total, actor_total, penalty_total, select_total;
  auto acc = [](std::optional<ad::Var>& slot, ad::Var v) {
    slot = slot ? ad::add(*slot, v) : v;
  };
  double l0_sum = 0.0, unc_sum = 0.0;

  for (int k = 0; k < config_.meta_batch; ++k) {
    const int task = order[k];
    ReplayBuffer::Batch batch = buffers_[task].sample(batch_size, rng_minibatch_);
    Mat ctx = sample_context(task, rng_context_);

    // ---- encoder: product of Gaussians over per-transition factors ----
    ad::Var ctx_var = tape_.constant(ctx);
    ad::Var enc_out = mlp_forward(tape_, enc, ctx_var, Activation::Relu);
    ad::Var mu_rows = ad::rows(enc_out, 0, latent);
    ad::Var var_rows = ad::add(ad::softplus(ad::rows(enc_out, latent, latent)), 1e-6);
    ad::Var precision = ad::add(ad::sum_over_cols(ad::div(1.0, var_rows)), 1.0);
    ad::Var post_var = ad::div(1.0, precision);
    ad::Var post_mean = ad::mul(ad::sum_over_cols(ad::div(mu_rows, var_rows)), post_var);
    Mat eps_z(latent, 1);
    for (int i = 0; i < latent; ++i) eps_z(i, 0) = rng_z_.gaussian();
    ad::Var z = ad::add(post_mean, ad::mul(ad::sqrt(post_var), tape_.constant(eps_z)));
    ad::Var kl = ad::mul(ad::sum_all(ad::sub(ad::add(post_var, ad::square(post_mean)),
                                             ad::add(ad::log(post_var), 1.0))),
                         0.5);
    acc(kl_total, kl);
    ad::Var z_det = tape_.constant(z.value());

    // ---- actor side: generated parameters, z detached ----
    ad::Var wb = mlp_forward(tape_, phi, z_det, Activation::Relu);
    ad::Var logits = mlp_forward(tape_, psi, z_det, Activation::Relu);
    ad::Var p_t = ad::sigmoid(logits);
    l0_sum += p_t.value().mean();
    unc_sum += uncertainty(p_t.value());
    ad::Var mask = sample_mask_train(tape_, p_t, sched.tau, rng_gumbel_);

    ad::Var state_var = tape_.constant(batch.s);
    Eigen::Index wb_idx = 0, mask_idx = 0;
    std::vector<ad::Var> outs;
    std::optional<ad::Var> penalty_rows;
    for (int d = 0; d < adim; ++d) {
      std::vector<ad::Var> w_vars, b_vars;
      for (std::size_t l = 0; l < model_.net_config.layers.size() + 1; ++l) {
        const Eigen::Index r =
            l < model_.net_config.layers.size()
                ? model_.net_config.layers[l].linear_width()
                : 1;
        const Eigen::Index c = l < model_.net_config.layers.size()
                                   ? model_.net_config.layer_input_width(static_cast<int>(l))
                                   : model_.net_config.final_input_width();
        w_vars.push_back(ad::reshape(ad::rows(wb, wb_idx, r * c), r, c));
        wb_idx += r * c;
      }
      for (std::size_t l = 0; l < model_.net_config.layers.size() + 1; ++l) {
        const Eigen::Index r =
            l < model_.net_config.layers.size()
                ? model_.net_config.layers[l].linear_width()
                : 1;
        b_vars.push_back(ad::reshape(ad::rows(wb, wb_idx, r), r, 1));
        wb_idx += r;
      }
      std::vector<ad::Var> eff =
          masked_weights(tape_, model_.net_config, w_vars, mask, mask_idx);
      ForwardResult fwd = forward(tape_, model_.net_config, eff, b_vars, state_var);
      outs.push_back(fwd.preactivation);
      penalty_rows = penalty_rows ? ad::add(*penalty_rows, fwd.penalty) : fwd.penalty;
    }
    ad::Var mu = outs.size() == 1 ? outs.front() : ad::concat_rows(outs);
    ad::Var z_rep_det = ad::repeat_cols(z_det, batch_size);
    ad::Var sz = ad::concat_rows({state_var, z_rep_det});
    ad::Var log_std = ad::clamp(mlp_forward(tape_, fstd, sz, Activation::Relu), -20.0, 2.0);
    Mat eps(adim, batch_size);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng_noise_.gaussian();
    ad::Var u = ad::reparam_sample(mu, ad::exp(log_std), eps);
    ad::Var a_var = ad::tanh(u);
    ad::Var logp_rows = ad::sub(ad::gaussian_log_density(u, mu, log_std),
                                ad::log(ad::add(ad::sub(1.0, ad::square(a_var)), 1e-6)));
    ad::Var logp = adim == 1 ? logp_rows : ad::sum_over_rows(logp_rows);

    ad::Var saz_actor = ad::concat_rows({state_var, a_var, z_rep_det});
    ad::Var q1a = mlp_forward(tape_, lift(tape_, model_.q1, false), saz_actor, Activation::Relu);
    ad::Var q2a = mlp_forward(tape_, lift(tape_, model_.q2, false), saz_actor, Activation::Relu);
    acc(actor_total, ad::mean_all(ad::sub(ad::mul(logp, alpha), ad::min(q1a, q2a))));
    acc(penalty_total, ad::mean_all(*penalty_rows));
    acc(select_total, ad::max(ad::sub(ad::sum_all(p_t), sched.l_min), 0.0));

    // ---- soft Bellman target (values only) ----
    GeneratedParams gen_vals;
    {
      Mat wb_vals = wb.value();
      gen_vals.p = p_t.value();
      RngStream dummy(0);
      Eigen::Index idx = 0;
      for (int d = 0; d < adim; ++d) {
        SymbolicNetwork net = build(model_.net_config, dummy);
        fill_net_from_flat(net, wb_vals, idx);
        gen_vals.nets.push_back(std::move(net));
      }
    }
    PolicyVals next = generated_policy_values(tape_, model_, gen_vals, mask.value(), batch.s_next,
                                              z.value());
    Mat eps2(adim, batch_size);
    for (Eigen::Index i = 0; i < eps2.size(); ++i) eps2(i) = rng_noise_.gaussian();
    Mat std2 = next.log_std.array().exp();
    Mat u2 = next.mu + std2.cwiseProduct(eps2);
    Mat a2 = u2.array().tanh();
    Mat logp2 =
        (gaussian_logp_values(eps2, next.log_std) - tanh_correction_values(a2)).colwise().sum();
    Mat saz_next(batch.s.rows() + adim + latent, batch_size);
    saz_next << batch.s_next, a2, z.value().replicate(1, batch_size);
    ad::Var saz_next_var = tape_.constant(saz_next);
    Mat q1t =
        mlp_forward(tape_, lift(tape_, model_.qt1, false), saz_next_var, Activation::Relu).value();
    Mat q2t =
        mlp_forward(tape_, lift(tape_, model_.qt2, false), saz_next_var, Activation::Relu).value();
    Mat y = batch.r + config_.discount *
                          (Mat::Ones(1, batch_size) - batch.done)
                              .cwiseProduct(q1t.cwiseMin(q2t) - alpha * logp2);

    // ---- critic: z keeps gradients so the encoder recovers Q ----
    ad::Var z_rep = ad::repeat_cols(z, batch_size);
    Mat sa(batch.s.rows() + adim, batch_size);
    sa << batch.s, batch.a;
    ad::Var saz = ad::concat_rows({tape_.constant(sa), z_rep});
    ad::Var y_var = tape_.constant(y);
    ad::Var q1v = mlp_forward(tape_, lq1, saz, Activation::Relu);
    ad::Var q2v = mlp_forward(tape_, lq2, saz, Activation::Relu);
    acc(critic_total,
        ad::add(ad::mean_all(ad::square(ad::sub(q1v, y_var))),
                ad::mean_all(ad::square(ad::sub(q2v, y_var)))));
  }

  const double inv_m = 1.0 / static_cast<double>(config_.meta_batch);
  ad::Var critic_loss = ad::mul(*critic_total, inv_m);
  ad::Var kl_sum = *kl_total;
  ad::Var encoder_objective = ad::add(critic_loss, ad::mul(kl_sum, config_.kl_scale));
  ad::Var actor_loss =
      ad::add(ad::add(ad::mul(*actor_total, inv_m),
                      ad::mul(ad::mul(*penalty_total, inv_m), config_.penalty_scale)),
              ad::mul(ad::mul(*select_total, inv_m), config_.select_scale));

  tape_.backward(encoder_objective);
  std::vector<Mat> critic_grads;
  std::vector<Mat*> critic_params;
  auto harvest = [](const LiftedMlp& lifted, Mlp& target, std::vector<Mat>& grads,
                    std::vector<Mat*>& params) {
    for (std::size_t l = 0; l < lifted.W.size(); ++l) {
      grads.push_back(lifted.W[l].grad());
      grads.push_back(lifted.b[l].grad());
      params.push_back(&target.W[l]);
      params.push_back(&target.b[l]);
    }
  };
  harvest(lq1, model_.q1, critic_grads, critic_params);
  harvest(lq2, model_.q2, critic_grads, critic_params);
  std::vector<Mat> enc_grads;
  std::vector<Mat*> enc_params;
  harvest(enc, model_.encoder, enc_grads, enc_params);

  tape_.backward(actor_loss);
  std::vector<Mat> actor_grads;
  std::vector<Mat*> actor_params;
  harvest(phi, model_.phi, actor_grads, actor_params);
  harvest(psi, model_.psi, actor_grads, actor_params);
  harvest(fstd, model_.std_net, actor_grads, actor_params);

  adam_critic_.step(critic_params, critic_grads);
  model_.qt1.polyak_from(model_.q1, config_.target_smoothing);
  model_.qt2.polyak_from(model_.q2, config_.target_smoothing);
  adam_encoder_.step(enc_params, enc_grads);
  adam_actor_.step(actor_params, actor_grads);

  MetaStepStats stats;
  stats.critic_loss = critic_loss.value()(0, 0);
  stats.actor_loss = actor_loss.value()(0, 0);
  stats.kl = kl_sum.value()(0, 0);
  stats.penalty = penalty_total->value()(0, 0) * inv_m;
  stats.l0_ratio = l0_sum * inv_m;
  stats.uncertainty = unc_sum * inv_m;
  if (!std::isfinite(stats.critic_loss) || !std::isfinite(stats.actor_loss) ||
      !std::isfinite(stats.kl))
    fail("meta training diverged at iteration " + std::to_string(iteration));
  return stats;
}

double MetaTrainer::evaluate_test_tasks(int context_episodes, int eval_episodes,
                                        std::uint64_t salt) {
  double sum = 0.0;
  for (std::size_t i = 0; i < model_.test_tasks.size(); ++i) {
    AdaptResult r = adapt_to_task(model_, model_.test_tasks[i], context_episodes,
                                  config_.seed ^ (salt * 131 + i), eval_episodes);
    sum += r.mean_return;
  }
  return sum / static_cast<double>(model_.test_tasks.size());
}

MetaTrainResult MetaTrainer::train(const IterCallback& on_iteration) {
  MetaTrainResult result;
  double last_eval = std::numeric_limits<double>::quiet_NaN();
  for (int t = 0; t < config_.total_iters; ++t) {
    collect_iteration();
    MetaStepStats stats;
    for (int k = 0; k < config_.steps_per_iter; ++k) stats = training_step(t);
    if (config_.eval_interval > 0 &&
        (t % config_.eval_interval == 0 || t + 1 == config_.total_iters))
      last_eval = evaluate_test_tasks(config_.adapt_episodes, config_.eval_episodes_per_task,
                                      static_cast<std::uint64_t>(t) + 1);
    MetaIterationLog row;
    row.iter = t;
    row.test_return_adapted = last_eval;
    row.l0_ratio = stats.l0_ratio;
    row.uncertainty = stats.uncertainty;
    row.tau = schedule(t, config_.schedule_iters, config_.tau_target, config_.l0_target_ratio, 1.0)
                  .tau;
    row.critic_loss = stats.critic_loss;
    row.actor_loss = stats.actor_loss;
    row.kl = stats.kl;
    row.penalty = stats.penalty;
    result.logs.push_back(row);
    if (on_iteration) on_iteration(row);
  }
  result.final_test_return =
      evaluate_test_tasks(config_.adapt_episodes, 10, 0xf1a7ULL);
  result.model = model_;
  return result;
}

}  // namespace espl
