#pragma once

#include <optional>
#include <span>
#include <vector>

#include "espl/autodiff.hpp"
#include "espl/rng.hpp"

namespace espl {

enum class Activation { Relu, Tanh };

// Plain fully-connected network storage; forward passes run on a tape.
struct Mlp {
  std::vector<Mat> W;
  std::vector<Mat> b;

  // widths = {in, hidden..., out}; weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  // When given, `last_bias` overrides the output layer's bias init.
  static Mlp make(std::span<const int> widths, RngStream& rng,
                  std::optional<double> last_bias = std::nullopt);

  int param_count() const;
  std::vector<Mat*> params();
  std::vector<const Mat*> params() const;

  // target <- rho * online + (1 - rho) * target
  void polyak_from(const Mlp& online, double rho);
};

struct LiftedMlp {
  std::vector<ad::Var> W, b;
};
LiftedMlp lift(ad::Tape& tape, const Mlp& mlp, bool requires_grad);

// Linear output layer, `act` on the hidden layers.
ad::Var mlp_forward(ad::Tape& tape, const LiftedMlp& mlp, ad::Var x, Activation act);

// Tape-free forward for value-only callers.
Mat mlp_forward_values(const Mlp& mlp, const Mat& x, Activation act);

// Adam with default moment constants. Parameters and gradients correspond
// by position; moment buffers are sized on first use.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<Mat* const> params, std::span<const Mat> grads);
  void reset();

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace espl
