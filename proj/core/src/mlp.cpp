#include "espl/mlp.hpp"

#include <cmath>

namespace espl {

Mlp Mlp::make(std::span<const int> widths, RngStream& rng, std::optional<double> last_bias) {
  require(widths.size() >= 2, "mlp: need at least input and output widths");
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    require(in > 0 && out > 0, "mlp: widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Mat w(out, in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    Mat bias(out, 1);
    for (Eigen::Index i = 0; i < bias.rows(); ++i) bias(i, 0) = rng.uniform(-bound, bound);
    mlp.W.push_back(std::move(w));
    mlp.b.push_back(std::move(bias));
  }
  if (last_bias) mlp.b.back().setConstant(*last_bias);
  return mlp;
}

int Mlp::param_count() const {
  int n = 0;
  for (const Mat& w : W) n += static_cast<int>(w.size());
  for (const Mat& bias : b) n += static_cast<int>(bias.size());
  return n;
}

std::vector<Mat*> Mlp::params() {
  std::vector<Mat*> out;
  out.reserve(W.size() + b.size());
  for (std::size_t i = 0; i < W.size(); ++i) {
    out.push_back(&W[i]);
    out.push_back(&b[i]);
  }
  return out;
}

std::vector<const Mat*> Mlp::params() const {
  std::vector<const Mat*> out;
  out.reserve(W.size() + b.size());
  for (std::size_t i = 0; i < W.size(); ++i) {
    out.push_back(&W[i]);
    out.push_back(&b[i]);
  }
  return out;
}

void Mlp::polyak_from(const Mlp& online, double rho) {
  require(W.size() == online.W.size(), "polyak: mismatched nets");
  for (std::size_t i = 0; i < W.size(); ++i) {
    W[i] = rho * online.W[i] + (1.0 - rho) * W[i];
    b[i] = rho * online.b[i] + (1.0 - rho) * b[i];
  }
}

LiftedMlp lift(ad::Tape& t, const Mlp& mlp, bool requires_grad) {
  LiftedMlp out;
  out.W.reserve(mlp.W.size());
  out.b.reserve(mlp.b.size());
  for (const Mat& w : mlp.W) out.W.push_back(t.leaf(w, requires_grad));
  for (const Mat& b : mlp.b) out.b.push_back(t.leaf(b, requires_grad));
  return out;
}

ad::Var mlp_forward(ad::Tape& t, const LiftedMlp& mlp, ad::Var x, Activation act) {
  ad::Var h = x;
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    h = ad::add(ad::matmul(mlp.W[l], h), mlp.b[l]);
    if (l + 1 < mlp.W.size())
      h = act == Activation::Relu ? ad::max(h, 0.0) : ad::tanh(h);
  }
  return h;
}

Mat mlp_forward_values(const Mlp& mlp, const Mat& x, Activation act) {
  Mat h = x;
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    h = (mlp.W[l] * h).colwise() + mlp.b[l].col(0);
    if (l + 1 < mlp.W.size())
      h = act == Activation::Relu ? h.cwiseMax(0.0).eval() : h.array().tanh().matrix().eval();
  }
  return h;
}

void Adam::step(std::span<Mat* const> params, std::span<const Mat> grads) {
  require(params.size() == grads.size(), "adam: params/grads size mismatch");
  if (m_.empty()) {
    for (const Mat* p : params) {
      m_.push_back(Mat::Zero(p->rows(), p->cols()));
      v_.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  require(m_.size() == params.size(), "adam: parameter set changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat& p = *params[i];
    const Mat& g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    p.array() -= lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

}  // namespace espl
