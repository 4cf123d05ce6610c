#include "espl/path_selector.hpp"

#include <cmath>

namespace espl {

namespace {
constexpr double kLogitEps = 1e-6;  // interior protection before log(p/(1-p))
}

ScheduleValues schedule(int t, int t_s, double tau_target, double l0_target_ratio,
                        double maskable_count) {
  require(t >= 0, "schedule: t must be non-negative");
  require(t_s > 0, "schedule: t_s must be positive");
  require(tau_target > 0.0 && tau_target < 1.0, "schedule: tau_target must lie in (0,1)");
  require(l0_target_ratio > 0.0 && l0_target_ratio < 1.0,
          "schedule: l0_target_ratio must lie in (0,1)");
  const double ramp = 1.0 - static_cast<double>(std::min(t, t_s)) / static_cast<double>(t_s);
  const double tau = (1.0 - tau_target) * ramp + tau_target;
  const double l_min = (l0_target_ratio + (1.0 - l0_target_ratio) * ramp * ramp) * maskable_count;
  return {tau, l_min};
}

SelectorState::SelectorState(int weight_count, const SelectorConfig& config)
    : p_(Mat::Constant(weight_count, 1, config.p_init)), config_(config) {
  require(weight_count > 0, "selector: weight count must be positive");
  require(config.p_init >= 0.0 && config.p_init <= 1.0, "selector: p_init must lie in [0,1]");
}

ScheduleValues SelectorState::at(int iteration) const {
  return schedule(iteration, config_.schedule_iters, config_.tau_target, config_.l0_target_ratio,
                  static_cast<double>(weight_count()));
}

void SelectorState::clip() {
  p_ = p_.array().max(0.0).min(1.0);
}

double SelectorState::l0_ratio() const { return p_.sum() / static_cast<double>(p_.rows()); }

double SelectorState::uncertainty() const { return espl::uncertainty(p_); }

Mat SelectorState::threshold_mask() const {
  return (p_.array() >= 0.5).cast<double>();
}

Mat SelectorState::sample_mask_eval(RngStream& rng) const {
  Mat m(p_.rows(), 1);
  for (Eigen::Index i = 0; i < p_.rows(); ++i) m(i, 0) = rng.bernoulli(p_(i, 0)) ? 1.0 : 0.0;
  return m;
}

ad::Var sample_mask_train_with_noise(ad::Tape& t, ad::Var p, double tau, const Mat& noise) {
  require(tau > 0.0, "sample_mask_train: tau must be positive");
  require(noise.rows() == p.rows() && noise.cols() == p.cols(),
          "sample_mask_train: noise shape mismatch");
  using namespace ad;
  Var pc = clamp(p, kLogitEps, 1.0 - kLogitEps);
  Var logits = log(div(pc, sub(1.0, pc)));
  Var m_gs = sigmoid(mul(add(logits, t.constant(noise)), 1.0 / tau));
  Var hard = indicator_ge(m_gs, 0.5);
  // hard + (m_gs - stop_grad(m_gs)): binary forward, relaxed backward
  return add(hard, sub(m_gs, stop_gradient(m_gs)));
}

ad::Var sample_mask_train(ad::Tape& t, ad::Var p, double tau, RngStream& rng) {
  Mat noise(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < noise.size(); ++i) {
    const double g1 = rng.gumbel();
    const double g0 = rng.gumbel();
    noise(i) = g1 - g0;
  }
  return sample_mask_train_with_noise(t, p, tau, noise);
}

ad::Var select_loss(ad::Tape& t, ad::Var p, double l_min) {
  return ad::max(ad::sub(ad::sum_all(p), l_min), 0.0);
}

double uncertainty(const Mat& p) {
  return (p.array() - 0.5).abs().mean();
}

}  // namespace espl
