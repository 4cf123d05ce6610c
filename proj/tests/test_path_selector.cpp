#include <doctest.h>

#include <cmath>

#include "espl/path_selector.hpp"

using namespace espl;
using ad::Tape;
using ad::Var;

TEST_SUITE("path_selector") {

TEST_CASE("bernoulli eval mask endpoints") {
  SelectorConfig cfg;
  RngStream rng(1);
  SelectorState zeros(64, cfg);
  zeros.probabilities().setZero();
  CHECK(zeros.sample_mask_eval(rng).sum() == 0.0);
  SelectorState ones(64, cfg);
  ones.probabilities().setOnes();
  CHECK(ones.sample_mask_eval(rng).sum() == 64.0);
}

TEST_CASE("bernoulli eval mask is unbiased at one half") {
  SelectorConfig cfg;
  cfg.p_init = 0.5;
  SelectorState state(100, cfg);
  RngStream rng(2);
  double total = 0.0;
  const int draws = 1000;  // 1e5 entries
  for (int i = 0; i < draws; ++i) total += state.sample_mask_eval(rng).mean();
  CHECK(std::abs(total / draws - 0.5) < 0.01);
}

TEST_CASE("expected mask size equals the probability sum") {
  SelectorConfig cfg;
  SelectorState state(50, cfg);
  RngStream init(3);
  for (Eigen::Index i = 0; i < 50; ++i) state.probabilities()(i, 0) = init.uniform01();
  const double expected = state.probabilities().sum();
  RngStream rng(4);
  const int draws = 100000;
  double total = 0.0, total_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double n = state.sample_mask_eval(rng).sum();
    total += n;
    total_sq += n * n;
  }
  const double mean = total / draws;
  double var_sum = 0.0;
  for (Eigen::Index i = 0; i < 50; ++i) {
    const double p = state.probabilities()(i, 0);
    var_sum += p * (1 - p);
  }
  const double se = std::sqrt(var_sum / draws);
  CHECK(std::abs(mean - expected) < 3.0 * se + 1e-9);
}

TEST_CASE("train mask with equal gumbel noise at p = 0.5") {
  Tape t;
  Var p = t.leaf(Mat::Constant(4, 1, 0.5));
  Var m = sample_mask_train_with_noise(t, p, 1.0, Mat::Zero(4, 1));
  // m_gs = sigmoid(0) = 0.5; the inclusive indicator rounds up
  for (int i = 0; i < 4; ++i) CHECK(m.value()(i, 0) == 1.0);
}

TEST_CASE("train mask forward is exactly binary") {
  RngStream rng(5);
  for (double tau : {1.0, 0.6, 0.2}) {
    Tape t;
    Mat probs(64, 1);
    for (Eigen::Index i = 0; i < 64; ++i) probs(i, 0) = rng.uniform01();
    Var p = t.leaf(probs);
    Var m = sample_mask_train(t, p, tau, rng);
    for (Eigen::Index i = 0; i < 64; ++i) {
      const double v = m.value()(i, 0);
      CHECK((v == 0.0 || v == 1.0));
    }
  }
}

TEST_CASE("train mask gradient flows through the relaxed sample") {
  // frozen noise, m_gs(p) = sigmoid(logit(p)) = p, so d(sum m)/dp = 1
  Tape t;
  Var p = t.leaf(Mat::Constant(1, 1, 0.5));
  Var m = sample_mask_train_with_noise(t, p, 1.0, Mat::Zero(1, 1));
  t.backward(ad::sum_all(m));
  const double analytic = p.grad()(0, 0);

  // finite-difference oracle on the relaxed m_gs path with the same noise
  auto m_gs = [](double prob) {
    const double pc = std::clamp(prob, 1e-6, 1.0 - 1e-6);
    return 1.0 / (1.0 + std::exp(-std::log(pc / (1.0 - pc))));
  };
  const double h = 1e-6;
  const double fd = (m_gs(0.5 + h) - m_gs(0.5 - h)) / (2 * h);
  CHECK(analytic == doctest::Approx(fd).epsilon(1e-6));
  CHECK(analytic == doctest::Approx(1.0));
}

TEST_CASE("train-time hard threshold matches the bernoulli distribution at saturated p") {
  RngStream rng(6);
  for (double prob : {0.001, 0.999}) {
    Tape t;
    Var p = t.leaf(Mat::Constant(20000, 1, prob));
    Var m = sample_mask_train(t, p, 0.2, rng);
    const double freq = m.value().mean();
    CHECK(std::abs(freq - prob) < 1e-3);
  }
}

TEST_CASE("temperature must be positive") {
  Tape t;
  Var p = t.leaf(Mat::Constant(2, 1, 0.5));
  RngStream rng(7);
  CHECK_THROWS_AS(sample_mask_train(t, p, 0.0, rng), EsplError);
}

TEST_CASE("selection loss hinge") {
  Tape t;
  Mat probs = Mat::Constant(20, 1, 0.5);  // sum 10
  Var p = t.leaf(probs);
  Var loss = select_loss(t, p, 4.0);
  CHECK(loss.value()(0, 0) == 6.0);
  t.backward(loss);
  for (int i = 0; i < 20; ++i) CHECK(p.grad()(i, 0) == 1.0);

  Tape t2;
  Var p2 = t2.leaf(probs);
  Var loss2 = select_loss(t2, p2, 11.0);
  CHECK(loss2.value()(0, 0) == 0.0);
  t2.backward(loss2);
  for (int i = 0; i < 20; ++i) CHECK(p2.grad()(i, 0) == 0.0);
}

TEST_CASE("schedule endpoints and midpoint") {
  const double P = 237.0;
  ScheduleValues start = schedule(0, 400, 0.2, 0.002, P);
  CHECK(start.tau == 1.0);
  CHECK(start.l_min == P);

  ScheduleValues end = schedule(400, 400, 0.2, 0.002, P);
  CHECK(end.tau == 0.2);
  CHECK(end.l_min == 0.002 * P);
  ScheduleValues beyond = schedule(1000, 400, 0.2, 0.002, P);
  CHECK(beyond.tau == 0.2);
  CHECK(beyond.l_min == 0.002 * P);

  ScheduleValues mid = schedule(200, 400, 0.2, 0.002, P);
  CHECK(mid.tau == doctest::Approx(0.6));
  CHECK(mid.l_min == doctest::Approx((0.002 + 0.25 * (1 - 0.002)) * P));
}

TEST_CASE("l_min is monotonically non-increasing in t") {
  double prev = 1e18;
  for (int t = 0; t <= 450; ++t) {
    const double lmin = schedule(t, 400, 0.2, 0.002, 237.0).l_min;
    CHECK(lmin <= prev + 1e-12);
    prev = lmin;
  }
}

TEST_CASE("uncertainty measure") {
  CHECK(uncertainty(Mat::Constant(8, 1, 0.5)) == 0.0);
  Mat saturated(4, 1);
  saturated << 0, 1, 1, 0;
  CHECK(uncertainty(saturated) == 0.5);
}

TEST_CASE("clip keeps probabilities in the unit interval") {
  SelectorConfig cfg;
  SelectorState state(4, cfg);
  state.probabilities() << 1.3, -0.2, 0.7, 0.0;
  state.clip();
  CHECK(state.probabilities()(0, 0) == 1.0);
  CHECK(state.probabilities()(1, 0) == 0.0);
  CHECK(state.probabilities()(2, 0) == 0.7);
  CHECK(state.l0_ratio() == doctest::Approx((1.0 + 0.7) / 4.0));
}

}  // TEST_SUITE
