#pragma once

#include <span>
#include <vector>

#include "espl/autodiff.hpp"
#include "espl/rng.hpp"
#include "espl/symbolic_ops.hpp"

namespace espl {

// Operator slots of one layer, in output order. The linear stage of the
// layer emits one row per operator argument, so its width is the sum of
// arities; the layer output has one row per slot.
struct LayerLayout {
  std::vector<OperatorKind> ops;

  int linear_width() const;
  int output_width() const { return static_cast<int>(ops.size()); }
};

enum class Structure { Plain, Dense, DenseArranged };
std::string_view structure_name(Structure s);
Structure structure_from_name(std::string_view name);

struct NetworkConfig {
  int state_dim = 0;
  int action_dims = 1;
  Structure structure = Structure::DenseArranged;
  std::vector<LayerLayout> layers;
  double init_scale = 0.5;  // weights ~ U(-init_scale, init_scale); biases 0

  // Dense structures feed layer l the concatenation [s, x_1, ..., x_{l-1}];
  // plain feeds only the previous layer's output.
  int layer_input_width(int layer) const;
  int final_input_width() const;
  int weight_count() const;  // maskable weights of one scalar-output network
  int bias_count() const;
  int param_count() const { return weight_count() + bias_count(); }
  void validate() const;

  static std::vector<LayerLayout> default_layers(Structure s);
  static NetworkConfig defaults(int state_dim, int action_dims, Structure s);
};

// One scalar-output network; a policy holds one per action dimension.
// w.back()/b.back() are the final linear map (1 x final_input_width, 1 x 1).
struct SymbolicNetwork {
  NetworkConfig config;
  std::vector<Mat> w;
  std::vector<Mat> b;

  std::vector<Mat*> params();
};

SymbolicNetwork build(const NetworkConfig& config, RngStream& init_rng);
std::vector<SymbolicNetwork> build_policy(const NetworkConfig& config, RngStream& init_rng);

struct LiftedNet {
  std::vector<ad::Var> w, b;
};
LiftedNet lift(ad::Tape& tape, const SymbolicNetwork& net, bool requires_grad);

// Slices `mask_flat` (column of all policies' weights, column-major per
// matrix, net-major then layer-major) into per-layer masks and multiplies
// them onto the lifted weights. Advances `offset`.
std::vector<ad::Var> masked_weights(ad::Tape& tape, const NetworkConfig& config,
                                    std::span<const ad::Var> w, ad::Var mask_flat,
                                    Eigen::Index& offset);

struct ForwardResult {
  ad::Var preactivation;  // 1 x batch
  ad::Var penalty;        // 1 x batch, sum of all operator penalties
};

// Effective weights are passed in rather than read from storage so the
// same path serves masked training, generated (hypernetwork) parameters,
// and extraction checks.
ForwardResult forward(ad::Tape& tape, const NetworkConfig& config, std::span<const ad::Var> w,
                      std::span<const ad::Var> b, ad::Var state);

// tanh-squashed stacked preactivations: the action interface every
// environment wraps around the policy.
ad::Var action(ad::Tape& tape, const NetworkConfig& config,
               std::span<const LiftedNet> nets, ad::Var state);

}  // namespace espl
