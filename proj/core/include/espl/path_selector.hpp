#pragma once

#include "espl/autodiff.hpp"
#include "espl/rng.hpp"

namespace espl {

struct ScheduleValues {
  double tau;    // gumbel-sigmoid temperature, annealed linearly to tau_target
  double l_min;  // minimum expected L0 norm, annealed parabolically to l_t * P
};

// t in iterations; t_s schedule horizon; tau_target in (0,1); l0_target_ratio
// in (0,1); maskable_count = number of masked weights P.
ScheduleValues schedule(int t, int t_s, double tau_target, double l0_target_ratio,
                        double maskable_count);

struct SelectorConfig {
  double tau_target = 0.2;
  double l0_target_ratio = 0.002;
  int schedule_iters = 400;
  double p_init = 0.95;
};

// Per-weight keep probabilities plus the annealing bookkeeping. p is a raw
// parameter updated by the actor optimizer and clipped to [0,1] after every
// update.
class SelectorState {
 public:
  SelectorState(int weight_count, const SelectorConfig& config);

  Mat& probabilities() { return p_; }
  const Mat& probabilities() const { return p_; }
  int weight_count() const { return static_cast<int>(p_.rows()); }

  ScheduleValues at(int iteration) const;
  void clip();  // clamp p elementwise into [0,1]

  double l0_ratio() const;     // sum(p) / P
  double uncertainty() const;  // mean |p - 0.5|

  Mat threshold_mask() const;                      // 1[p >= 0.5]
  Mat sample_mask_eval(RngStream& rng) const;      // Bernoulli(p) per entry

 private:
  Mat p_;  // P x 1
  SelectorConfig config_;
};

// Gumbel-sigmoid relaxation with the straight-through trick: the forward
// value is exactly binary, the gradient flows through the relaxed sample.
ad::Var sample_mask_train(ad::Tape& tape, ad::Var p, double tau, RngStream& gumbel_rng);
// Same, with the Gumbel noise difference g1 - g0 supplied by the caller
// (used by gradient checks that need frozen noise).
ad::Var sample_mask_train_with_noise(ad::Tape& tape, ad::Var p, double tau, const Mat& noise);

// max(sum(p) - l_min, 0)
ad::Var select_loss(ad::Tape& tape, ad::Var p, double l_min);

double uncertainty(const Mat& p);

}  // namespace espl
