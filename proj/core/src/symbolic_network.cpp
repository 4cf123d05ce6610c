#include "espl/symbolic_network.hpp"

#include <cmath>

namespace espl {

int LayerLayout::linear_width() const {
  int w = 0;
  for (OperatorKind k : ops) w += arity(k);
  return w;
}

std::string_view structure_name(Structure s) {
  switch (s) {
    case Structure::Plain: return "plain";
    case Structure::Dense: return "dense";
    case Structure::DenseArranged: return "dense-arranged";
  }
  fail("structure_name: bad Structure");
}

Structure structure_from_name(std::string_view name) {
  if (name == "plain") return Structure::Plain;
  if (name == "dense") return Structure::Dense;
  if (name == "dense-arranged") return Structure::DenseArranged;
  fail("unknown structure: '" + std::string(name) + "'");
}

int NetworkConfig::layer_input_width(int layer) const {
  if (structure == Structure::Plain)
    return layer == 0 ? state_dim : layers[layer - 1].output_width();
  int w = state_dim;
  for (int l = 0; l < layer; ++l) w += layers[l].output_width();
  return w;
}

int NetworkConfig::final_input_width() const {
  const int depth = static_cast<int>(layers.size());
  if (structure == Structure::Plain) return layers.back().output_width();
  int w = state_dim;
  for (int l = 0; l < depth; ++l) w += layers[l].output_width();
  return w;
}

int NetworkConfig::weight_count() const {
  int n = 0;
  for (int l = 0; l < static_cast<int>(layers.size()); ++l)
    n += layers[l].linear_width() * layer_input_width(l);
  return n + final_input_width();
}

int NetworkConfig::bias_count() const {
  int n = 1;  // final bias
  for (const LayerLayout& layer : layers) n += layer.linear_width();
  return n;
}

void NetworkConfig::validate() const {
  require(state_dim >= 1, "network config: state_dim must be positive");
  require(action_dims >= 1, "network config: action_dims must be positive");
  require(!layers.empty(), "network config: depth must be positive");
  for (const LayerLayout& layer : layers)
    require(!layer.ops.empty(), "network config: empty layer layout");
  require(init_scale > 0, "network config: init_scale must be positive");
}

std::vector<LayerLayout> NetworkConfig::default_layers(Structure s) {
  using K = OperatorKind;
  switch (s) {
    case Structure::DenseArranged:
      // Mul/Div-heavy shallow layers, transcendentals deeper.
      return {
          LayerLayout{{K::Mul, K::Mul, K::Div, K::Div, K::Sin, K::Cos}},
          LayerLayout{{K::Mul, K::Div, K::Sin, K::Cos, K::Exp, K::Log}},
          LayerLayout{{K::Mul, K::Sin, K::Cos, K::Exp, K::Log}},
      };
    case Structure::Dense:
      return {
          LayerLayout{{K::Mul, K::Div, K::Sin, K::Cos, K::Exp, K::Log}},
          LayerLayout{{K::Mul, K::Div, K::Sin, K::Cos, K::Exp, K::Log}},
          LayerLayout{{K::Mul, K::Div, K::Sin, K::Cos, K::Exp, K::Log}},
      };
    case Structure::Plain:
      // Identity slots carry the previous layer forward.
      return {
          LayerLayout{{K::Mul, K::Div, K::Sin, K::Cos, K::Exp, K::Log, K::Ident}},
          LayerLayout{{K::Mul, K::Div, K::Sin, K::Cos, K::Exp, K::Log, K::Ident}},
          LayerLayout{{K::Mul, K::Div, K::Sin, K::Cos, K::Exp, K::Log, K::Ident}},
      };
  }
  fail("default_layers: bad Structure");
}

NetworkConfig NetworkConfig::defaults(int state_dim, int action_dims, Structure s) {
  NetworkConfig c;
  c.state_dim = state_dim;
  c.action_dims = action_dims;
  c.structure = s;
  c.layers = default_layers(s);
  return c;
}

std::vector<Mat*> SymbolicNetwork::params() {
  std::vector<Mat*> out;
  out.reserve(w.size() + b.size());
  for (Mat& m : w) out.push_back(&m);
  for (Mat& m : b) out.push_back(&m);
  return out;
}

SymbolicNetwork build(const NetworkConfig& config, RngStream& init_rng) {
  config.validate();
  SymbolicNetwork net;
  net.config = config;
  const int depth = static_cast<int>(config.layers.size());
  auto init = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i)
        m(i, j) = init_rng.uniform(-config.init_scale, config.init_scale);
    return m;
  };
  for (int l = 0; l < depth; ++l) {
    const int rows = config.layers[l].linear_width();
    const int cols = config.layer_input_width(l);
    net.w.push_back(init(rows, cols));
    net.b.push_back(Mat::Zero(rows, 1));
  }
  net.w.push_back(init(1, config.final_input_width()));
  net.b.push_back(Mat::Zero(1, 1));
  return net;
}

std::vector<SymbolicNetwork> build_policy(const NetworkConfig& config, RngStream& init_rng) {
  std::vector<SymbolicNetwork> nets;
  nets.reserve(config.action_dims);
  for (int d = 0; d < config.action_dims; ++d) nets.push_back(build(config, init_rng));
  return nets;
}

LiftedNet lift(ad::Tape& t, const SymbolicNetwork& net, bool requires_grad) {
  LiftedNet out;
  out.w.reserve(net.w.size());
  out.b.reserve(net.b.size());
  for (const Mat& m : net.w) out.w.push_back(t.leaf(m, requires_grad));
  for (const Mat& m : net.b) out.b.push_back(t.leaf(m, requires_grad));
  return out;
}

std::vector<ad::Var> masked_weights(ad::Tape& t, const NetworkConfig& config,
                                    std::span<const ad::Var> w, ad::Var mask_flat,
                                    Eigen::Index& offset) {
  std::vector<ad::Var> out;
  out.reserve(w.size());
  for (const ad::Var& wl : w) {
    const Eigen::Index n = wl.rows() * wl.cols();
    ad::Var m = ad::reshape(ad::rows(mask_flat, offset, n), wl.rows(), wl.cols());
    out.push_back(ad::mul(wl, m));
    offset += n;
  }
  (void)config;
  return out;
}

ForwardResult forward(ad::Tape& t, const NetworkConfig& config, std::span<const ad::Var> w,
                      std::span<const ad::Var> b, ad::Var state) {
  const int depth = static_cast<int>(config.layers.size());
  require(static_cast<int>(w.size()) == depth + 1 && static_cast<int>(b.size()) == depth + 1,
          "forward: effective weights do not match network depth");
  require(state.rows() == config.state_dim,
          "forward: state has " + std::to_string(state.rows()) + " rows, expected " +
              std::to_string(config.state_dim));
  require(state.value().allFinite(), "forward: non-finite state");

  const Eigen::Index batch = state.cols();
  std::vector<ad::Var> pool;  // [s, x_1, ..., x_l] outputs available downstream
  pool.push_back(state);
  ad::Var penalty = t.constant(Mat::Zero(1, batch));

  for (int l = 0; l < depth; ++l) {
    ad::Var input = config.structure == Structure::Plain
                        ? pool.back()
                        : (pool.size() == 1 ? pool.front() : ad::concat_rows(pool));
    ad::Var y = ad::add(ad::matmul(w[l], input), b[l]);
    std::vector<ad::Var> outs;
    outs.reserve(config.layers[l].ops.size());
    Eigen::Index r = 0;
    for (OperatorKind kind : config.layers[l].ops) {
      const int k = arity(kind);
      std::vector<ad::Var> args;
      args.reserve(k);
      for (int j = 0; j < k; ++j) args.push_back(ad::row(y, r + j));
      r += k;
      OpVarResult res = apply(t, kind, args);
      outs.push_back(res.output);
      if (res.penalty) penalty = ad::add(penalty, *res.penalty);
    }
    pool.push_back(outs.size() == 1 ? outs.front() : ad::concat_rows(outs));
  }

  ad::Var final_input = config.structure == Structure::Plain ? pool.back() : ad::concat_rows(pool);
  ad::Var out = ad::add(ad::matmul(w[depth], final_input), b[depth]);
  return {out, penalty};
}

ad::Var action(ad::Tape& t, const NetworkConfig& config, std::span<const LiftedNet> nets,
               ad::Var state) {
  std::vector<ad::Var> outs;
  outs.reserve(nets.size());
  for (const LiftedNet& net : nets)
    outs.push_back(forward(t, config, net.w, net.b, state).preactivation);
  ad::Var stacked = outs.size() == 1 ? outs.front() : ad::concat_rows(outs);
  return ad::tanh(stacked);
}

}  // namespace espl
