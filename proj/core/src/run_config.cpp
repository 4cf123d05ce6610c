#include "espl/run_config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace espl {

using nlohmann::json;

namespace {

json trainer_to_json(const TrainerConfig& c) {
  return json{{"env", std::string(env_name(c.env))},
              {"structure", std::string(structure_name(c.structure))},
              {"selector", std::string(selector_name(c.selector))},
              {"discount", c.discount},
              {"minibatch", c.minibatch},
              {"lr", c.lr},
              {"reward_scale", c.reward_scale},
              {"target_smoothing", c.target_smoothing},
              {"tau_target", c.tau_target},
              {"select_scale", c.select_scale},
              {"l0_target_ratio", c.l0_target_ratio},
              {"schedule_iters", c.schedule_iters},
              {"penalty_scale", c.penalty_scale},
              {"p_init", c.p_init},
              {"total_iters", c.total_iters},
              {"steps_per_iter", c.steps_per_iter},
              {"replay_capacity", c.replay_capacity},
              {"min_fill", c.min_fill},
              {"warmup_episodes", c.warmup_episodes},
              {"eval_interval", c.eval_interval},
              {"eval_episodes", c.eval_episodes},
              {"auto_entropy", c.auto_entropy},
              {"entropy_alpha", c.entropy_alpha},
              {"l1_scale", c.l1_scale},
              {"l1_prune", c.l1_prune},
              {"critic_hidden", c.critic_hidden},
              {"std_hidden", c.std_hidden},
              {"horizon", c.horizon},
              {"seed", c.seed}};
}

TrainerConfig trainer_from_json(const json& j, EnvKind env) {
  TrainerConfig c = TrainerConfig::defaults_for(env);
  c.structure = structure_from_name(j.value("structure", std::string("dense-arranged")));
  c.selector = selector_from_name(j.value("selector", std::string("l0")));
  c.discount = j.value("discount", c.discount);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.lr = j.value("lr", c.lr);
  c.reward_scale = j.value("reward_scale", c.reward_scale);
  c.target_smoothing = j.value("target_smoothing", c.target_smoothing);
  c.tau_target = j.value("tau_target", c.tau_target);
  c.select_scale = j.value("select_scale", c.select_scale);
  c.l0_target_ratio = j.value("l0_target_ratio", c.l0_target_ratio);
  c.schedule_iters = j.value("schedule_iters", c.schedule_iters);
  c.penalty_scale = j.value("penalty_scale", c.penalty_scale);
  c.p_init = j.value("p_init", c.p_init);
  c.total_iters = j.value("total_iters", c.total_iters);
  c.steps_per_iter = j.value("steps_per_iter", c.steps_per_iter);
  c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
  c.min_fill = j.value("min_fill", c.min_fill);
  c.warmup_episodes = j.value("warmup_episodes", c.warmup_episodes);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.auto_entropy = j.value("auto_entropy", c.auto_entropy);
  c.entropy_alpha = j.value("entropy_alpha", c.entropy_alpha);
  c.l1_scale = j.value("l1_scale", c.l1_scale);
  c.l1_prune = j.value("l1_prune", c.l1_prune);
  c.critic_hidden = j.value("critic_hidden", c.critic_hidden);
  c.std_hidden = j.value("std_hidden", c.std_hidden);
  c.horizon = j.value("horizon", c.horizon);
  c.seed = j.value("seed", c.seed);
  return c;
}

json meta_to_json(const MetaConfig& c) {
  return json{{"env", std::string(env_name(c.env))},
              {"structure", std::string(structure_name(c.structure))},
              {"latent_dim", c.latent_dim},
              {"meta_batch", c.meta_batch},
              {"reward_scale", c.reward_scale},
              {"kl_scale", c.kl_scale},
              {"select_scale", c.select_scale},
              {"l0_target_ratio", c.l0_target_ratio},
              {"schedule_iters", c.schedule_iters},
              {"tau_target", c.tau_target},
              {"penalty_scale", c.penalty_scale},
              {"steps_per_iter", c.steps_per_iter},
              {"total_iters", c.total_iters},
              {"train_tasks", c.train_tasks},
              {"test_tasks", c.test_tasks},
              {"collect_cycles", c.collect_cycles},
              {"context_size", c.context_size},
              {"encoder_hidden", c.encoder_hidden},
              {"generator_hidden", c.generator_hidden},
              {"critic_hidden", c.critic_hidden},
              {"std_hidden", c.std_hidden},
              {"lr", c.lr},
              {"minibatch", c.minibatch},
              {"discount", c.discount},
              {"target_smoothing", c.target_smoothing},
              {"entropy_alpha", c.entropy_alpha},
              {"per_task_capacity", c.per_task_capacity},
              {"eval_interval", c.eval_interval},
              {"eval_episodes_per_task", c.eval_episodes_per_task},
              {"adapt_episodes", c.adapt_episodes},
              {"seed", c.seed}};
}

MetaConfig meta_from_json(const json& j) {
  MetaConfig c = MetaConfig::defaults();
  if (j.contains("env")) c.env = env_from_name(j["env"].get<std::string>());
  c.structure = structure_from_name(j.value("structure", std::string("dense-arranged")));
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.meta_batch = j.value("meta_batch", c.meta_batch);
  c.reward_scale = j.value("reward_scale", c.reward_scale);
  c.kl_scale = j.value("kl_scale", c.kl_scale);
  c.select_scale = j.value("select_scale", c.select_scale);
  c.l0_target_ratio = j.value("l0_target_ratio", c.l0_target_ratio);
  c.schedule_iters = j.value("schedule_iters", c.schedule_iters);
  c.tau_target = j.value("tau_target", c.tau_target);
  c.penalty_scale = j.value("penalty_scale", c.penalty_scale);
  c.steps_per_iter = j.value("steps_per_iter", c.steps_per_iter);
  c.total_iters = j.value("total_iters", c.total_iters);
  c.train_tasks = j.value("train_tasks", c.train_tasks);
  c.test_tasks = j.value("test_tasks", c.test_tasks);
  c.collect_cycles = j.value("collect_cycles", c.collect_cycles);
  c.context_size = j.value("context_size", c.context_size);
  c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
  c.generator_hidden = j.value("generator_hidden", c.generator_hidden);
  c.critic_hidden = j.value("critic_hidden", c.critic_hidden);
  c.std_hidden = j.value("std_hidden", c.std_hidden);
  c.lr = j.value("lr", c.lr);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.discount = j.value("discount", c.discount);
  c.target_smoothing = j.value("target_smoothing", c.target_smoothing);
  c.entropy_alpha = j.value("entropy_alpha", c.entropy_alpha);
  c.per_task_capacity = j.value("per_task_capacity", c.per_task_capacity);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.eval_episodes_per_task = j.value("eval_episodes_per_task", c.eval_episodes_per_task);
  c.adapt_episodes = j.value("adapt_episodes", c.adapt_episodes);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace

RunConfig RunConfig::defaults_for(EnvKind env) {
  RunConfig c;
  c.trainer = TrainerConfig::defaults_for(env);
  c.meta = MetaConfig::defaults();
  if (is_meta_env(env)) c.meta.env = env;
  return c;
}

std::string RunConfig::to_json_text(int indent) const {
  json j{{"env", std::string(env_name(trainer.env))},
         {"seeds", seeds},
         {"out_dir", out_dir},
         {"trainer", trainer_to_json(trainer)},
         {"meta", meta_to_json(meta)}};
  return j.dump(indent);
}

RunConfig RunConfig::from_json_text(std::string_view text) {
  json j = json::parse(text);
  RunConfig c;
  const EnvKind env = env_from_name(j.value("env", std::string("cartpole")));
  c.trainer = j.contains("trainer") ? trainer_from_json(j["trainer"], env)
                                    : TrainerConfig::defaults_for(env);
  c.trainer.env = env;
  c.meta = j.contains("meta") ? meta_from_json(j["meta"]) : MetaConfig::defaults();
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  c.out_dir = j.value("out_dir", c.out_dir);
  require(!c.seeds.empty(), "config: seeds list must not be empty");
  return c;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

void RunConfig::save_file(const std::string& path) const {
  std::ofstream f(path);
  require(f.good(), "cannot write config file " + path);
  f << to_json_text() << "\n";
}

std::string meta_config_to_json_text(const MetaConfig& config) {
  return meta_to_json(config).dump();
}

MetaConfig meta_config_from_json_text(std::string_view text) {
  return meta_from_json(json::parse(text));
}

std::string RunConfig::hash() const {
  const std::string dump = to_json_text(-1);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace espl
