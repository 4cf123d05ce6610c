#include "espl/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "espl/run_config.hpp"

namespace espl {

using nlohmann::json;

namespace {

json mat_to_json(const Mat& m) {
  std::vector<double> data(m.data(), m.data() + m.size());  // column-major
  return json{{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

Mat mat_from_json(const json& j) {
  const auto shape = j.at("shape");
  const Eigen::Index r = shape[0].get<Eigen::Index>();
  const Eigen::Index c = shape[1].get<Eigen::Index>();
  const std::vector<double> data = j.at("data").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(data.size()) == r * c, "checkpoint: array size mismatch");
  Mat m(r, c);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json mlp_to_json(const Mlp& mlp) {
  json w = json::array(), b = json::array();
  for (const Mat& m : mlp.W) w.push_back(mat_to_json(m));
  for (const Mat& m : mlp.b) b.push_back(mat_to_json(m));
  return json{{"W", std::move(w)}, {"b", std::move(b)}};
}

Mlp mlp_from_json(const json& j) {
  Mlp mlp;
  for (const json& m : j.at("W")) mlp.W.push_back(mat_from_json(m));
  for (const json& m : j.at("b")) mlp.b.push_back(mat_from_json(m));
  return mlp;
}

json layers_to_json(const std::vector<LayerLayout>& layers) {
  json out = json::array();
  for (const LayerLayout& l : layers) {
    json ops = json::array();
    for (OperatorKind k : l.ops) ops.push_back(std::string(op_name(k)));
    out.push_back(std::move(ops));
  }
  return out;
}

std::vector<LayerLayout> layers_from_json(const json& j) {
  std::vector<LayerLayout> out;
  for (const json& layer : j) {
    LayerLayout l;
    for (const json& op : layer) l.ops.push_back(op_from_name(op.get<std::string>()));
    out.push_back(std::move(l));
  }
  return out;
}

json net_config_to_json(const NetworkConfig& c) {
  return json{{"state_dim", c.state_dim},
              {"action_dims", c.action_dims},
              {"structure", std::string(structure_name(c.structure))},
              {"layers", layers_to_json(c.layers)},
              {"init_scale", c.init_scale}};
}

NetworkConfig net_config_from_json(const json& j) {
  NetworkConfig c;
  c.state_dim = j.at("state_dim").get<int>();
  c.action_dims = j.at("action_dims").get<int>();
  c.structure = structure_from_name(j.at("structure").get<std::string>());
  c.layers = layers_from_json(j.at("layers"));
  c.init_scale = j.value("init_scale", 0.5);
  return c;
}

json net_to_json(const SymbolicNetwork& net) {
  json w = json::array(), b = json::array();
  for (const Mat& m : net.w) w.push_back(mat_to_json(m));
  for (const Mat& m : net.b) b.push_back(mat_to_json(m));
  return json{{"w", std::move(w)}, {"b", std::move(b)}};
}

SymbolicNetwork net_from_json(const json& j, const NetworkConfig& config) {
  SymbolicNetwork net;
  net.config = config;
  for (const json& m : j.at("w")) net.w.push_back(mat_from_json(m));
  for (const json& m : j.at("b")) net.b.push_back(mat_from_json(m));
  return net;
}

json task_to_json(const TaskParams& t) {
  return json{{"force", t.force},
              {"pole_mass", t.pole_mass},
              {"cart_mass", t.cart_mass},
              {"half_length", t.half_length},
              {"gravity", t.gravity},
              {"pend_gravity", t.pend_gravity},
              {"pend_mass", t.pend_mass},
              {"pend_length", t.pend_length},
              {"power", t.power}};
}

TaskParams task_from_json(const json& j) {
  TaskParams t;
  t.force = j.value("force", t.force);
  t.pole_mass = j.value("pole_mass", t.pole_mass);
  t.cart_mass = j.value("cart_mass", t.cart_mass);
  t.half_length = j.value("half_length", t.half_length);
  t.gravity = j.value("gravity", t.gravity);
  t.pend_gravity = j.value("pend_gravity", t.pend_gravity);
  t.pend_mass = j.value("pend_mass", t.pend_mass);
  t.pend_length = j.value("pend_length", t.pend_length);
  t.power = j.value("power", t.power);
  return t;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  json j;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["iteration"] = iteration;
  j["rng_note"] = rng_note;
  j["env"] = std::string(env_name(env));
  j["task"] = task_to_json(task);
  if (kind == "single") {
    j["net_config"] = net_config_to_json(net_config);
    json nets_json = json::array();
    for (const SymbolicNetwork& n : nets) nets_json.push_back(net_to_json(n));
    j["nets"] = std::move(nets_json);
    j["p"] = mat_to_json(p);
    j["critic1"] = mlp_to_json(critic1);
    j["critic2"] = mlp_to_json(critic2);
    j["target1"] = mlp_to_json(target1);
    j["target2"] = mlp_to_json(target2);
    j["std_net"] = mlp_to_json(std_net);
    j["log_alpha"] = log_alpha;
  } else if (kind == "meta") {
    j["net_config"] = net_config_to_json(meta.net_config);
    j["encoder"] = mlp_to_json(meta.encoder);
    j["phi"] = mlp_to_json(meta.phi);
    j["psi"] = mlp_to_json(meta.psi);
    j["std_net"] = mlp_to_json(meta.std_net);
    j["q1"] = mlp_to_json(meta.q1);
    j["q2"] = mlp_to_json(meta.q2);
    j["qt1"] = mlp_to_json(meta.qt1);
    j["qt2"] = mlp_to_json(meta.qt2);
    json train = json::array(), test = json::array();
    for (const TaskParams& t : meta.train_tasks) train.push_back(task_to_json(t));
    for (const TaskParams& t : meta.test_tasks) test.push_back(task_to_json(t));
    j["train_tasks"] = std::move(train);
    j["test_tasks"] = std::move(test);
    j["meta_config"] = json::parse(meta_config_to_json_text(meta.config));
  } else {
    fail("checkpoint: unknown kind '" + kind + "'");
  }
  std::ofstream f(path);
  require(f.good(), "cannot write checkpoint " + path);
  f << j.dump() << "\n";
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "cannot open checkpoint " + path);
  json j = json::parse(f);
  Checkpoint c;
  c.kind = j.at("kind").get<std::string>();
  c.config_hash = j.value("config_hash", "");
  c.seed = j.value("seed", std::uint64_t{0});
  c.iteration = j.value("iteration", 0);
  c.rng_note = j.value("rng_note", "");
  c.env = env_from_name(j.value("env", std::string("cartpole")));
  if (j.contains("task")) c.task = task_from_json(j["task"]);
  if (c.kind == "single") {
    c.net_config = net_config_from_json(j.at("net_config"));
    for (const json& n : j.at("nets")) c.nets.push_back(net_from_json(n, c.net_config));
    c.p = mat_from_json(j.at("p"));
    c.critic1 = mlp_from_json(j.at("critic1"));
    c.critic2 = mlp_from_json(j.at("critic2"));
    c.target1 = mlp_from_json(j.at("target1"));
    c.target2 = mlp_from_json(j.at("target2"));
    c.std_net = mlp_from_json(j.at("std_net"));
    c.log_alpha = j.value("log_alpha", 0.0);
  } else if (c.kind == "meta") {
    c.meta.net_config = net_config_from_json(j.at("net_config"));
    c.meta.encoder = mlp_from_json(j.at("encoder"));
    c.meta.phi = mlp_from_json(j.at("phi"));
    c.meta.psi = mlp_from_json(j.at("psi"));
    c.meta.std_net = mlp_from_json(j.at("std_net"));
    c.meta.q1 = mlp_from_json(j.at("q1"));
    c.meta.q2 = mlp_from_json(j.at("q2"));
    c.meta.qt1 = mlp_from_json(j.at("qt1"));
    c.meta.qt2 = mlp_from_json(j.at("qt2"));
    for (const json& t : j.at("train_tasks")) c.meta.train_tasks.push_back(task_from_json(t));
    for (const json& t : j.at("test_tasks")) c.meta.test_tasks.push_back(task_from_json(t));
    c.meta.config = meta_config_from_json_text(j.at("meta_config").dump());
  } else {
    fail("checkpoint: unknown kind '" + c.kind + "'");
  }
  return c;
}

Checkpoint checkpoint_from_result(const TrainResult& result, const TrainerConfig& config,
                                  const TaskParams& task, const std::string& config_hash) {
  Checkpoint c;
  c.kind = "single";
  c.config_hash = config_hash;
  c.seed = config.seed;
  c.iteration = config.total_iters;
  c.env = config.env;
  c.task = task;
  require(!result.nets.empty(), "checkpoint: training result holds no networks");
  c.net_config = result.nets.front().config;
  c.nets = result.nets;
  c.p = result.p;
  c.critic1 = result.critic1;
  c.critic2 = result.critic2;
  c.target1 = result.target1;
  c.target2 = result.target2;
  c.std_net = result.std_net;
  c.log_alpha = result.log_alpha;
  return c;
}

Checkpoint checkpoint_from_meta(const MetaModel& model, const std::string& config_hash) {
  Checkpoint c;
  c.kind = "meta";
  c.config_hash = config_hash;
  c.seed = model.config.seed;
  c.iteration = model.config.total_iters;
  c.env = model.config.env;
  c.task = default_task(model.config.env);
  c.meta = model;
  return c;
}

}  // namespace espl
