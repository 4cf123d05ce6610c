// espl: trains, evaluates, extracts, adapts, and analyzes compact symbolic
// control policies. Exit codes: 0 success, 2 configuration error, 3 numeric
// divergence, 4 threshold failure in --check mode.
#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "espl/checkpoint.hpp"
#include "espl/meta_csp.hpp"
#include "espl/run_config.hpp"
#include "espl/sac_trainer.hpp"
#include "espl/stability.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace espl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitCheckFailed = 4;

bool is_divergence(const EsplError& e) {
  return std::string_view(e.what()).find("diverged") != std::string_view::npos;
}

std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("ESPL_RUN_DIR"); env && *env) return env;
  return "runs";
}

void write_iteration_csv(std::ofstream& f, const IterationLog& row) {
  f << row.iter << ',' << row.episodes << ',' << row.return_eval << ',' << row.l0_ratio << ','
    << row.uncertainty << ',' << row.tau << ',' << row.lmin << ',' << row.actor_loss << ','
    << row.critic_loss << ',' << row.penalty << std::endl;  // flush: logs tail live runs
}

void write_eval_csv(const std::string& path, const EvalStats& stats) {
  std::ofstream f(path);
  require(f.good(), "cannot write " + path);
  f << "episode,seed,return,length\n";
  for (const EpisodeResult& e : stats.episodes)
    f << e.episode << ',' << e.seed << ',' << e.ret << ',' << e.length << '\n';
}

std::vector<ExprPtr> load_policy_trees(const std::string& path) {
  if (path.ends_with(".txt")) return read_policy_txt(path);
  return read_policy_json(path).trees;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  double final_eval = 0.0;
  PolicyReport report;
  TrainResult result;
};

// ---- train ----

struct TrainArgs {
  std::string config_file;
  std::string env = "cartpole";
  std::string structure;
  std::string selector;
  std::string out_dir;
  std::string name;
  int seeds = 0;
  std::vector<std::uint64_t> seed_list;
  int jobs = 1;
  bool ci = false;
  int total_iters = -1;
  int steps_per_iter = -1;
  int schedule_iters = -1;
  double select_scale = -1.0;
  double l0_target_ratio = -1.0;
  int eval_interval = -1;
  int eval_episodes = -1;
  bool fixed_alpha = false;
  double entropy_alpha = -1.0;
  bool check = false;
  double min_return = -1e18;
  int final_eval_episodes = 100;
};

int cmd_train(const TrainArgs& args) {
  RunConfig config = args.config_file.empty()
                         ? RunConfig::defaults_for(env_from_name(args.env))
                         : RunConfig::load_file(args.config_file);
  if (args.config_file.empty() || !args.env.empty()) config.trainer.env = env_from_name(args.env);
  require(!is_meta_env(config.trainer.env),
          "train: " + std::string(env_name(config.trainer.env)) +
              " is a meta environment; use meta-train");
  if (!args.structure.empty()) config.trainer.structure = structure_from_name(args.structure);
  if (!args.selector.empty()) config.trainer.selector = selector_from_name(args.selector);
  if (args.ci) {
    // reduced continuous-integration profile
    config.trainer.steps_per_iter = 250;
    config.trainer.schedule_iters = 200;
    config.trainer.total_iters = 400;
  }
  if (args.total_iters > 0) config.trainer.total_iters = args.total_iters;
  if (args.steps_per_iter >= 0) config.trainer.steps_per_iter = args.steps_per_iter;
  if (args.schedule_iters > 0) config.trainer.schedule_iters = args.schedule_iters;
  if (args.select_scale >= 0) config.trainer.select_scale = args.select_scale;
  if (args.l0_target_ratio > 0) config.trainer.l0_target_ratio = args.l0_target_ratio;
  if (args.eval_interval >= 0) config.trainer.eval_interval = args.eval_interval;
  if (args.eval_episodes > 0) config.trainer.eval_episodes = args.eval_episodes;
  if (args.fixed_alpha) config.trainer.auto_entropy = false;
  if (args.entropy_alpha >= 0) config.trainer.entropy_alpha = args.entropy_alpha;
  if (!args.seed_list.empty())
    config.seeds = args.seed_list;
  else if (args.seeds > 0) {
    config.seeds.clear();
    for (int i = 0; i < args.seeds; ++i) config.seeds.push_back(i + 1);
  }
  config.out_dir = resolve_out_dir(args.out_dir);
  config.trainer.validate();

  const std::string run_name =
      args.name.empty() ? std::string(env_name(config.trainer.env)) + "_run" : args.name;
  const fs::path run_dir = fs::path(config.out_dir) / run_name;
  fs::create_directories(run_dir);
  config.save_file((run_dir / "config.json").string());
  const std::string hash = config.hash();
  const TaskParams task = default_task(config.trainer.env);

  std::vector<SeedOutcome> outcomes(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= config.seeds.size()) return;
      TrainerConfig tc = config.trainer;
      tc.seed = config.seeds[k];
      const fs::path seed_dir = run_dir / ("seed_" + std::to_string(tc.seed));
      fs::create_directories(seed_dir);
      std::ofstream log_file(seed_dir / "train_log.csv");
      log_file << "iter,episodes,return_eval,l0_ratio,uncertainty,tau,lmin,actor_loss,"
                  "critic_loss,penalty\n";
      Trainer trainer(tc, task);
      TrainResult result = trainer.train([&](const IterationLog& row) {
        write_iteration_csv(log_file, row);
        if (row.iter % 20 == 0) {
          std::lock_guard<std::mutex> lock(io_mutex);
          std::cout << "[seed " << tc.seed << "] iter " << row.iter << " eval "
                    << row.return_eval << " l0 " << row.l0_ratio << " unc " << row.uncertainty
                    << "\n";
        }
      });
      result.report.config_hash = hash;
      write_policy_files(seed_dir.string(), result.report);
      Checkpoint ck = checkpoint_from_result(result, tc, task, hash);
      ck.rng_note = "root seed " + std::to_string(tc.seed);
      ck.save((seed_dir / "checkpoint.json").string());

      EvalStats final_stats =
          evaluate_policy(result.report.trees, tc.env, task, args.final_eval_episodes,
                          tc.seed * 7919 + 17, tc.horizon);
      write_eval_csv((seed_dir / "eval.csv").string(), final_stats);
      SeedOutcome outcome;
      outcome.seed = tc.seed;
      outcome.final_eval = final_stats.mean;
      outcome.report = result.report;
      outcome.result = std::move(result);
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << "[seed " << tc.seed << "] done: mean return " << final_stats.mean << " over "
                  << args.final_eval_episodes << " episodes, length " << outcome.report.length
                  << ", expression: " << to_infix(*outcome.report.trees[0]) << "\n";
      }
      outcomes[k] = std::move(outcome);
    }
  };
  std::vector<std::thread> pool_threads;
  const int jobs = std::max(1, std::min<int>(args.jobs, static_cast<int>(config.seeds.size())));
  for (int j = 0; j < jobs - 1; ++j) pool_threads.emplace_back(worker);
  worker();
  for (std::thread& th : pool_threads) th.join();

  const SeedOutcome* best = &outcomes[0];
  for (const SeedOutcome& o : outcomes)
    if (o.final_eval > best->final_eval) best = &o;

  json summary{{"env", std::string(env_name(config.trainer.env))},
               {"config_hash", hash},
               {"best_seed", best->seed},
               {"best_return", best->final_eval},
               {"length", best->report.length},
               {"episodes", best->result.episodes},
               {"expression", to_infix(*best->report.trees[0])},
               {"seeds", json::array()}};
  for (const SeedOutcome& o : outcomes)
    summary["seeds"].push_back(json{{"seed", o.seed}, {"return", o.final_eval}});
  std::ofstream sf(run_dir / "summary.json");
  sf << summary.dump(2) << "\n";
  write_policy_files(run_dir.string(), best->report);

  std::cout << env_name(config.trainer.env) << " | best of " << outcomes.size()
            << " seeds: " << best->final_eval << " | episodes " << best->result.episodes
            << " | length " << best->report.length << " | " << to_infix(*best->report.trees[0])
            << "\n";
  if (args.check && best->final_eval < args.min_return) {
    std::cerr << "check failed: best return " << best->final_eval << " < " << args.min_return
              << "\n";
    return kExitCheckFailed;
  }
  return 0;
}

// ---- eval ----

int cmd_eval(const std::string& policy_path, const std::string& env_str, int episodes,
             std::uint64_t seed, const std::string& out_csv, double force, double half_length,
             bool check, double min_return) {
  require(episodes > 0, "eval: episodes must be positive");
  const EnvKind kind = env_from_name(env_str);
  TaskParams task = default_task(kind);
  if (force > 0) task.force = force;
  if (half_length > 0) task.half_length = half_length;

  std::vector<ExprPtr> trees;
  if (policy_path.ends_with("checkpoint.json") || policy_path.ends_with(".ckpt")) {
    Checkpoint ck = Checkpoint::load(policy_path);
    require(ck.kind == "single", "eval: use adapt for meta checkpoints");
    trees = extract_deterministic(ck.net_config, ck.nets, ck.p);
    for (ExprPtr& t : trees) t = simplify(t);
  } else {
    trees = load_policy_trees(policy_path);
  }
  EvalStats stats = evaluate_policy(trees, kind, task, episodes, seed);
  if (!out_csv.empty()) write_eval_csv(out_csv, stats);
  std::cout << "episodes " << episodes << " mean " << stats.mean << " std " << stats.stddev
            << " min " << stats.min << " max " << stats.max << "\n";
  if (check && stats.mean < min_return) {
    std::cerr << "check failed: mean return " << stats.mean << " < " << min_return << "\n";
    return kExitCheckFailed;
  }
  return 0;
}

// ---- extract ----

int cmd_extract(const std::string& checkpoint_path, const std::string& out_dir, bool sampled,
                std::uint64_t sample_seed) {
  Checkpoint ck = Checkpoint::load(checkpoint_path);
  require(ck.kind == "single",
          "extract: meta checkpoints are task-conditioned; use adapt to obtain a policy");
  std::vector<ExprPtr> trees;
  if (sampled) {
    SelectorConfig sc;
    SelectorState state(static_cast<int>(ck.p.rows()), sc);
    state.probabilities() = ck.p;
    RngStream rng(sample_seed);
    trees = extract(ck.net_config, ck.nets, state.sample_mask_eval(rng));
  } else {
    trees = extract_deterministic(ck.net_config, ck.nets, ck.p);
  }
  Env probe(ck.env, ck.task);
  std::vector<std::string> assumptions;
  RngStream strip_rng(ck.seed ^ 0x517eULL);
  for (ExprPtr& t : trees)
    t = simplify(verify_and_strip(simplify(t), probe.observation_box(), 2000, strip_rng,
                                  &assumptions));
  PolicyReport report = metrics(std::move(trees));
  report.config_hash = ck.config_hash;
  report.seed = ck.seed;
  report.iteration = ck.iteration;
  report.assumptions = std::move(assumptions);
  const std::string dir =
      out_dir.empty() ? fs::path(checkpoint_path).parent_path().string() : out_dir;
  write_policy_files(dir.empty() ? "." : dir, report);
  std::cout << "length " << report.length << "\n";
  for (std::size_t d = 0; d < report.trees.size(); ++d) {
    const DimMetrics& m = report.per_dim[d];
    std::cout << "a" << (d + 1) << " = " << to_infix(*report.trees[d]) << "   [ops " << m.operators
              << " consts " << m.constant_terms << " vars " << m.variable_terms << "]\n";
  }
  return 0;
}

// ---- meta-train ----

int cmd_meta_train(const std::string& config_file, const std::string& env_str,
                   const std::string& out_dir, const std::string& name, int total_iters,
                   int steps_per_iter, int schedule_iters, int train_tasks, int test_tasks,
                   std::uint64_t seed) {
  RunConfig config = config_file.empty() ? RunConfig::defaults_for(env_from_name(env_str))
                                         : RunConfig::load_file(config_file);
  config.meta.env = env_from_name(env_str);
  require(is_meta_env(config.meta.env),
          "meta-train: " + env_str + " has no task distribution; use train");
  if (total_iters > 0) config.meta.total_iters = total_iters;
  if (steps_per_iter >= 0) config.meta.steps_per_iter = steps_per_iter;
  if (schedule_iters > 0) config.meta.schedule_iters = schedule_iters;
  if (train_tasks > 0) config.meta.train_tasks = train_tasks;
  if (test_tasks > 0) config.meta.test_tasks = test_tasks;
  if (seed > 0) config.meta.seed = seed;
  config.meta.meta_batch = std::min(config.meta.meta_batch, config.meta.train_tasks);
  config.out_dir = resolve_out_dir(out_dir);
  config.meta.validate();

  const std::string run_name = name.empty() ? "csp_" + env_str : name;
  const fs::path run_dir = fs::path(config.out_dir) / run_name;
  fs::create_directories(run_dir);
  config.save_file((run_dir / "config.json").string());

  std::ofstream log_file(run_dir / "train_log.csv");
  log_file << "iter,test_return_adapted,l0_ratio,uncertainty,tau,critic_loss,actor_loss,kl,"
              "penalty\n";
  MetaTrainer trainer(config.meta);
  MetaTrainResult result = trainer.train([&](const MetaIterationLog& row) {
    log_file << row.iter << ',' << row.test_return_adapted << ',' << row.l0_ratio << ','
             << row.uncertainty << ',' << row.tau << ',' << row.critic_loss << ','
             << row.actor_loss << ',' << row.kl << ',' << row.penalty << '\n';
    std::cout << "iter " << row.iter << " adapted-test " << row.test_return_adapted << " l0 "
              << row.l0_ratio << " unc " << row.uncertainty << "\n";
  });

  Checkpoint ck = checkpoint_from_meta(result.model, config.hash());
  ck.save((run_dir / "meta_checkpoint.json").string());
  json summary{{"env", env_str},
               {"final_test_return", result.final_test_return},
               {"config_hash", config.hash()}};
  std::ofstream sf(run_dir / "summary.json");
  sf << summary.dump(2) << "\n";
  std::cout << "final adapted test return " << result.final_test_return << "\n";
  return 0;
}

// ---- adapt ----

int cmd_adapt(const std::string& checkpoint_path, double force, double half_length, int episodes,
              int eval_episodes, std::uint64_t seed, const std::string& out_dir) {
  Checkpoint ck = Checkpoint::load(checkpoint_path);
  require(ck.kind == "meta", "adapt: expected a meta checkpoint");
  TaskParams task = default_task(ck.meta.config.env);
  if (force > 0) task.force = force;
  if (half_length > 0) task.half_length = half_length;
  AdaptResult result = adapt_to_task(ck.meta, task, episodes, seed, eval_episodes);
  result.report.config_hash = ck.config_hash;
  if (!out_dir.empty()) write_policy_files(out_dir, result.report);
  std::cout << "task force " << task.force << " half_length " << task.half_length << "\n";
  std::cout << "a1 = " << to_infix(*result.report.trees[0]) << "  (length " << result.report.length
            << ")\n";
  if (eval_episodes > 0) std::cout << "mean return " << result.mean_return << "\n";
  return 0;
}

// ---- sweep ----

struct GridRange {
  double lo = 0, hi = 0;
  int count = 0;
};

GridRange parse_range(const std::string& text) {
  GridRange r;
  const auto a = text.find(':'), b = text.rfind(':');
  require(a != std::string::npos && b != std::string::npos && a != b,
          "range must be lo:hi:count, got '" + text + "'");
  r.lo = std::stod(text.substr(0, a));
  r.hi = std::stod(text.substr(a + 1, b - a - 1));
  r.count = std::stoi(text.substr(b + 1));
  require(r.count >= 2, "range needs at least two points");
  return r;
}

int cmd_sweep(const std::string& checkpoint_path, const std::string& force_range,
              const std::string& length_range, int episodes, std::uint64_t seed,
              const std::string& out_csv) {
  Checkpoint ck = Checkpoint::load(checkpoint_path);
  require(ck.kind == "meta", "sweep: expected a meta checkpoint");
  const GridRange fr = parse_range(force_range);
  const GridRange lr = parse_range(length_range);

  std::ofstream f(out_csv);
  require(f.good(), "cannot write " + out_csv);
  f << "force,half_length,c1,c2,b\n";
  for (int i = 0; i < fr.count; ++i) {
    for (int j = 0; j < lr.count; ++j) {
      TaskParams task = default_task(ck.meta.config.env);
      task.force = fr.lo + (fr.hi - fr.lo) * i / (fr.count - 1);
      task.half_length = lr.lo + (lr.hi - lr.lo) * j / (lr.count - 1);
      AdaptResult result =
          adapt_to_task(ck.meta, task, episodes, seed + 1000 * i + j, /*eval_episodes=*/0);
      const Expr& tree = *result.report.trees[0];
      // numeric coefficients about the equilibrium: b = f(0), c_i = df/ds_i
      const double state0[4] = {0, 0, 0, 0};
      const double b = evaluate(tree, state0);
      auto partial = [&](int idx) {
        double plus[4] = {0, 0, 0, 0}, minus[4] = {0, 0, 0, 0};
        plus[idx] = 1e-6;
        minus[idx] = -1e-6;
        return (evaluate(tree, plus) - evaluate(tree, minus)) / 2e-6;
      };
      f << task.force << ',' << task.half_length << ',' << partial(2) << ',' << partial(3) << ','
        << b << '\n';
    }
  }
  std::cout << "wrote " << fr.count * lr.count << " grid points to " << out_csv << "\n";
  return 0;
}

// ---- analyze ----

int cmd_analyze(const std::string& policy_path, double force, double pole_mass, double cart_mass,
                double half_length, double gravity, bool as_json) {
  std::vector<ExprPtr> trees = load_policy_trees(policy_path);
  require(trees.size() == 1, "analyze: expected a single-action policy");
  const Expr& tree = *trees[0];

  TaskParams params = default_task(EnvKind::CartPole);
  if (force > 0) params.force = force;
  if (pole_mass > 0) params.pole_mass = pole_mass;
  if (cart_mass > 0) params.cart_mass = cart_mass;
  if (half_length > 0) params.half_length = half_length;
  if (gravity > 0) params.gravity = gravity;

  // probe the tree: it must be (numerically) affine in theta and theta_dot only
  const double zero[4] = {0, 0, 0, 0};
  const double offset = evaluate(tree, zero);
  auto partial = [&](int idx) {
    double plus[4] = {0, 0, 0, 0}, minus[4] = {0, 0, 0, 0};
    plus[idx] = 1e-6;
    minus[idx] = -1e-6;
    return (evaluate(tree, plus) - evaluate(tree, minus)) / 2e-6;
  };
  const double kx = partial(0), kxd = partial(1), kt = partial(2), ktd = partial(3);
  require(std::abs(kx) < 1e-9 && std::abs(kxd) < 1e-9,
          "analyze: the policy depends on the cart states (x, xdot); the eigenvalue analysis "
          "covers policies affine in (theta, theta_dot) only");
  RngStream probe_rng(1);
  for (int probe = 0; probe < 200; ++probe) {
    double s[4] = {probe_rng.uniform(-1, 1), probe_rng.uniform(-1, 1),
                   probe_rng.uniform(-0.2, 0.2), probe_rng.uniform(-1, 1)};
    const double lin = kt * s[2] + ktd * s[3] + offset;
    require(std::abs(evaluate(tree, s) - lin) < 1e-6 * (1.0 + std::abs(lin)),
            "analyze: policy is not affine on the probe box; cannot linearize");
  }

  LinearSystem sys = linearize(kt, ktd, offset, params);
  auto eigs = eigenvalues(sys.A);
  const StabilityClass verdict = classify(eigs);
  Eigen::Matrix4d fd =
      linearize_fd([kt, ktd](const Vec& s) { return kt * s(2) + ktd * s(3); }, params);
  const double fd_gap = (sys.A - fd).cwiseAbs().maxCoeff();

  if (as_json) {
    json out{{"k_theta", kt},
             {"k_theta_dot", ktd},
             {"offset", offset},
             {"eigenvalues", json::array()},
             {"classification", std::string(stability_name(verdict))},
             {"fd_cross_check_max_gap", fd_gap},
             {"params",
              {{"force", params.force},
               {"pole_mass", params.pole_mass},
               {"cart_mass", params.cart_mass},
               {"half_length", params.half_length},
               {"gravity", params.gravity}}}};
    for (const auto& e : eigs)
      out["eigenvalues"].push_back(json{{"re", e.real()}, {"im", e.imag()}});
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "policy: a = " << kt << "*theta + " << ktd << "*theta_dot (offset " << offset
              << ")\n";
    std::cout << "params: force " << params.force << " pole_mass " << params.pole_mass
              << " cart_mass " << params.cart_mass << " half_length " << params.half_length
              << " gravity " << params.gravity << "\n";
    std::cout << "eigenvalues:";
    for (const auto& e : eigs) {
      std::cout << " (" << e.real();
      if (e.imag() != 0.0) std::cout << (e.imag() > 0 ? "+" : "") << e.imag() << "j";
      std::cout << ")";
    }
    std::cout << "\nclassification: " << stability_name(verdict) << "\n";
    std::cout << "finite-difference cross-check max gap: " << fd_gap << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compact symbolic control policies: train, extract, analyze"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "single-task training, best of N seeds");
  train->add_option("--config", train_args.config_file, "config file (JSON)");
  train->add_option("--env", train_args.env, "cartpole | pendulum | mountaincar");
  train->add_option("--structure", train_args.structure, "plain | dense | dense-arranged");
  train->add_option("--selector", train_args.selector, "l0 | l1 | none");
  train->add_option("--out", train_args.out_dir, "output root (default runs/ or ESPL_RUN_DIR)");
  train->add_option("--name", train_args.name, "run directory name");
  train->add_option("--seeds", train_args.seeds, "number of seeds (1..N)");
  train->add_option("--seed-list", train_args.seed_list, "explicit seeds");
  train->add_option("--jobs", train_args.jobs, "parallel seed workers");
  train->add_flag("--ci", train_args.ci, "reduced profile: 250 steps/iter, schedule 200");
  train->add_option("--total-iters", train_args.total_iters, "");
  train->add_option("--steps-per-iter", train_args.steps_per_iter, "");
  train->add_option("--schedule-iters", train_args.schedule_iters, "");
  train->add_option("--select-scale", train_args.select_scale, "");
  train->add_option("--l0-target-ratio", train_args.l0_target_ratio, "");
  train->add_option("--eval-interval", train_args.eval_interval, "");
  train->add_option("--eval-episodes", train_args.eval_episodes, "");
  train->add_flag("--fixed-alpha", train_args.fixed_alpha, "disable entropy auto-tuning");
  train->add_option("--entropy-alpha", train_args.entropy_alpha, "fixed entropy coefficient");
  train->add_option("--final-eval-episodes", train_args.final_eval_episodes, "");
  train->add_flag("--check", train_args.check, "exit 4 when --min-return is missed");
  train->add_option("--min-return", train_args.min_return, "");

  std::string eval_policy, eval_env = "cartpole", eval_csv;
  int eval_episodes = 100;
  std::uint64_t eval_seed = 1;
  double eval_force = -1, eval_half_length = -1, eval_min_return = -1e18;
  bool eval_check = false;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a policy file or checkpoint");
  eval->add_option("--policy", eval_policy, "policy.json, policy.txt, or checkpoint.json")
      ->required();
  eval->add_option("--env", eval_env, "environment");
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval->add_option("--seed", eval_seed, "evaluation seed base");
  eval->add_option("--out", eval_csv, "per-episode CSV path");
  eval->add_option("--force", eval_force, "cartpole force coefficient override");
  eval->add_option("--half-length", eval_half_length, "cartpole half pole length override");
  eval->add_flag("--check", eval_check, "exit 4 when --min-return is missed");
  eval->add_option("--min-return", eval_min_return, "");

  std::string extract_ck, extract_out;
  bool extract_sampled = false;
  std::uint64_t extract_seed = 1;
  CLI::App* extract_cmd = app.add_subcommand("extract", "closed-form policy from a checkpoint");
  extract_cmd->add_option("--checkpoint", extract_ck, "checkpoint.json")->required();
  extract_cmd->add_option("--out", extract_out, "output directory");
  extract_cmd->add_flag("--sampled", extract_sampled, "sample the mask instead of thresholding");
  extract_cmd->add_option("--seed", extract_seed, "mask sampling seed");

  std::string meta_config, meta_env = "cartpole-fl", meta_out, meta_name;
  int meta_total = -1, meta_steps = -1, meta_sched = -1, meta_train_tasks = -1,
      meta_test_tasks = -1;
  std::uint64_t meta_seed = 0;
  CLI::App* meta = app.add_subcommand("meta-train", "contextual symbolic policy training");
  meta->add_option("--config", meta_config, "config file (JSON)");
  meta->add_option("--env", meta_env, "meta environment");
  meta->add_option("--out", meta_out, "output root");
  meta->add_option("--name", meta_name, "run directory name");
  meta->add_option("--total-iters", meta_total, "");
  meta->add_option("--steps-per-iter", meta_steps, "");
  meta->add_option("--schedule-iters", meta_sched, "");
  meta->add_option("--train-tasks", meta_train_tasks, "");
  meta->add_option("--test-tasks", meta_test_tasks, "");
  meta->add_option("--seed", meta_seed, "");

  std::string adapt_ck, adapt_out;
  double adapt_force = -1, adapt_half_length = -1;
  int adapt_episodes = 2, adapt_eval = 10;
  std::uint64_t adapt_seed = 1;
  CLI::App* adapt = app.add_subcommand("adapt", "task-specific policy from a meta checkpoint");
  adapt->add_option("--checkpoint", adapt_ck, "meta_checkpoint.json")->required();
  adapt->add_option("--force", adapt_force, "task force coefficient");
  adapt->add_option("--half-length", adapt_half_length, "task half pole length");
  adapt->add_option("--episodes", adapt_episodes, "context episodes");
  adapt->add_option("--eval-episodes", adapt_eval, "evaluation episodes (0 to skip)");
  adapt->add_option("--seed", adapt_seed, "");
  adapt->add_option("--out", adapt_out, "policy output directory");

  std::string sweep_ck, sweep_force = "5:15:5", sweep_length = "0.2:0.8:5",
              sweep_csv = "sweep.csv";
  int sweep_episodes = 2;
  std::uint64_t sweep_seed = 1;
  CLI::App* sweep = app.add_subcommand("sweep", "coefficient grid over (force, half_length)");
  sweep->add_option("--checkpoint", sweep_ck, "meta_checkpoint.json")->required();
  sweep->add_option("--force-range", sweep_force, "lo:hi:count");
  sweep->add_option("--length-range", sweep_length, "lo:hi:count");
  sweep->add_option("--episodes", sweep_episodes, "context episodes per grid point");
  sweep->add_option("--seed", sweep_seed, "");
  sweep->add_option("--out", sweep_csv, "grid CSV path");

  std::string analyze_policy;
  double an_force = -1, an_pole_mass = -1, an_cart_mass = -1, an_half_length = -1, an_gravity = -1;
  bool an_json = false;
  CLI::App* analyze = app.add_subcommand("analyze", "closed-loop cartpole eigenvalue analysis");
  analyze->add_option("--policy", analyze_policy, "policy.json or policy.txt")->required();
  analyze->add_option("--force", an_force, "");
  analyze->add_option("--pole-mass", an_pole_mass, "");
  analyze->add_option("--cart-mass", an_cart_mass, "");
  analyze->add_option("--half-length", an_half_length, "");
  analyze->add_option("--gravity", an_gravity, "");
  analyze->add_flag("--json", an_json, "structured output");

  std::string init_env = "cartpole", init_out;
  CLI::App* init = app.add_subcommand("init-config", "emit a full default config");
  init->add_option("--env", init_env, "environment");
  init->add_option("--out", init_out, "path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*eval)
      return cmd_eval(eval_policy, eval_env, eval_episodes, eval_seed, eval_csv, eval_force,
                      eval_half_length, eval_check, eval_min_return);
    if (*extract_cmd) return cmd_extract(extract_ck, extract_out, extract_sampled, extract_seed);
    if (*meta)
      return cmd_meta_train(meta_config, meta_env, meta_out, meta_name, meta_total, meta_steps,
                            meta_sched, meta_train_tasks, meta_test_tasks, meta_seed);
    if (*adapt)
      return cmd_adapt(adapt_ck, adapt_force, adapt_half_length, adapt_episodes, adapt_eval,
                       adapt_seed, adapt_out);
    if (*sweep)
      return cmd_sweep(sweep_ck, sweep_force, sweep_length, sweep_episodes, sweep_seed, sweep_csv);
    if (*analyze)
      return cmd_analyze(analyze_policy, an_force, an_pole_mass, an_cart_mass, an_half_length,
                         an_gravity, an_json);
    if (*init) {
      RunConfig config = RunConfig::defaults_for(env_from_name(init_env));
      if (init_out.empty())
        std::cout << config.to_json_text() << "\n";
      else
        config.save_file(init_out);
      return 0;
    }
  } catch (const EsplError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_divergence(e) ? kExitDiverged : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
