#include <doctest.h>

#include <filesystem>

#include "espl/checkpoint.hpp"
#include "espl/run_config.hpp"

using namespace espl;

TEST_SUITE("config_io") {

TEST_CASE("defaults carry the per-environment hyperparameter rows") {
  RunConfig cart = RunConfig::defaults_for(EnvKind::CartPole);
  CHECK(cart.trainer.select_scale == 0.08);
  CHECK(cart.trainer.l0_target_ratio == 0.002);
  CHECK(cart.trainer.schedule_iters == 400);
  CHECK(cart.seeds.size() == 3);

  RunConfig meta = RunConfig::defaults_for(EnvKind::CartPoleFL);
  CHECK(meta.meta.meta_batch == 10);
  CHECK(meta.meta.reward_scale == 5.0);
  CHECK(meta.meta.kl_scale == 1.0);
  CHECK(meta.meta.select_scale == 0.25);
  CHECK(meta.meta.l0_target_ratio == 0.002);
  CHECK(meta.meta.schedule_iters == 25);
  CHECK(meta.meta.steps_per_iter == 2000);
  CHECK(meta.meta.train_tasks == 40);
  CHECK(meta.meta.test_tasks == 10);
}

TEST_CASE("json round-trip preserves every field that matters") {
  RunConfig c = RunConfig::defaults_for(EnvKind::Pendulum);
  c.trainer.seed = 1234;
  c.trainer.select_scale = 0.16;
  c.trainer.structure = Structure::Plain;
  c.trainer.selector = SelectorMode::L1;
  c.seeds = {9, 8, 7};
  c.out_dir = "elsewhere";
  RunConfig back = RunConfig::from_json_text(c.to_json_text());
  CHECK(back.trainer.env == EnvKind::Pendulum);
  CHECK(back.trainer.seed == 1234);
  CHECK(back.trainer.select_scale == 0.16);
  CHECK(back.trainer.structure == Structure::Plain);
  CHECK(back.trainer.selector == SelectorMode::L1);
  CHECK(back.seeds == std::vector<std::uint64_t>{9, 8, 7});
  CHECK(back.out_dir == "elsewhere");
  CHECK(back.hash() == c.hash());
}

TEST_CASE("hash is sensitive to settings") {
  RunConfig a = RunConfig::defaults_for(EnvKind::CartPole);
  RunConfig b = a;
  b.trainer.seed += 1;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("unknown names are rejected with structured errors") {
  CHECK_THROWS_AS(env_from_name("bipedalwalker"), EsplError);
  CHECK_THROWS_AS(structure_from_name("sparse"), EsplError);
  CHECK_THROWS_AS(selector_from_name("l2"), EsplError);
}

TEST_CASE("single checkpoint round-trips bit-exact") {
  namespace fs = std::filesystem;
  TrainerConfig c = TrainerConfig::defaults_for(EnvKind::Pendulum);
  c.minibatch = 16;
  c.critic_hidden = 16;
  c.std_hidden = 8;
  c.total_iters = 1;
  c.steps_per_iter = 0;
  c.eval_interval = 1;
  c.eval_episodes = 1;
  c.min_fill = 10;
  c.horizon = 20;
  Trainer trainer(c, default_task(c.env));
  TrainResult result = trainer.train();
  Checkpoint ck = checkpoint_from_result(result, c, default_task(c.env), "cafef00d");

  const std::string path = (fs::temp_directory_path() / "espl_ck_test.json").string();
  ck.save(path);
  Checkpoint back = Checkpoint::load(path);
  CHECK(back.kind == "single");
  CHECK(back.config_hash == "cafef00d");
  CHECK(back.env == EnvKind::Pendulum);
  REQUIRE(back.nets.size() == ck.nets.size());
  for (std::size_t l = 0; l < ck.nets[0].w.size(); ++l)
    CHECK((back.nets[0].w[l].array() == ck.nets[0].w[l].array()).all());
  CHECK((back.p.array() == ck.p.array()).all());
  for (std::size_t l = 0; l < ck.critic1.W.size(); ++l)
    CHECK((back.critic1.W[l].array() == ck.critic1.W[l].array()).all());
  CHECK(back.log_alpha == ck.log_alpha);
  fs::remove(path);
}

TEST_CASE("meta checkpoint round-trips") {
  namespace fs = std::filesystem;
  MetaConfig mc = MetaConfig::defaults();
  mc.train_tasks = 2;
  mc.test_tasks = 1;
  mc.meta_batch = 1;
  mc.encoder_hidden = 16;
  mc.generator_hidden = 16;
  mc.critic_hidden = 16;
  mc.std_hidden = 8;
  MetaModel model = make_meta_model(mc);
  Checkpoint ck = checkpoint_from_meta(model, "feedface");

  const std::string path = (fs::temp_directory_path() / "espl_meta_ck_test.json").string();
  ck.save(path);
  Checkpoint back = Checkpoint::load(path);
  CHECK(back.kind == "meta");
  CHECK(back.meta.config.train_tasks == 2);
  CHECK(back.meta.train_tasks.size() == 2);
  CHECK(back.meta.test_tasks.size() == 1);
  for (std::size_t l = 0; l < model.phi.W.size(); ++l)
    CHECK((back.meta.phi.W[l].array() == model.phi.W[l].array()).all());
  CHECK((back.meta.psi.b.back().array() == model.psi.b.back().array()).all());
  CHECK(back.meta.net_config.state_dim == model.net_config.state_dim);
  fs::remove(path);
}

}  // TEST_SUITE
