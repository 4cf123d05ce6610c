#include "espl/autodiff.hpp"

#include <cmath>

namespace espl::ad {

namespace {

void check_same_tape(const Var& a, const Var& b, const char* op) {
  require(a.valid() && b.valid(), std::string(op) + ": invalid operand");
  require(a.tape() == b.tape(), std::string(op) + ": operands on different tapes");
}

[[noreturn]] void shape_error(const char* op, const Mat& a, const Mat& b) {
  fail(std::string(op) + ": shape mismatch (" + shape_str(a) + " vs " + shape_str(b) + ")");
}

enum class Broadcast { None, RightCol, LeftCol };

Broadcast broadcast_kind(const char* op, const Mat& a, const Mat& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::None;
  if (a.rows() == b.rows() && b.cols() == 1) return Broadcast::RightCol;
  if (a.rows() == b.rows() && a.cols() == 1) return Broadcast::LeftCol;
  shape_error(op, a, b);
}

}  // namespace

const Mat& Var::value() const { return tape_->val(idx_); }
Mat Var::grad() const { return tape_->grad(*this); }

Var Tape::leaf(Mat value, bool requires_grad) {
  return emit(std::move(value), {}, nullptr, requires_grad);
}

Var Tape::emit(Mat value, std::vector<int> parents, BackFn back, bool needs_grad_override) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.back = std::move(back);
  n.needs_grad = false;
  if (needs_grad_override) {
    if (n.parents.empty() && !n.back) {
      n.needs_grad = true;  // leaf with requires_grad
    } else {
      for (int p : n.parents)
        if (nodes_[p].needs_grad) n.needs_grad = true;
    }
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Mat Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.idx_];
  if (n.grad_live) return n.grad;
  return Mat::Zero(n.value.rows(), n.value.cols());
}

void Tape::backward(const Var& output) {
  require(output.valid() && output.tape() == this, "backward: output not on this tape");
  const int root = output.idx_;
  require(nodes_[root].value.rows() == 1 && nodes_[root].value.cols() == 1,
          "backward: output must be scalar, got " + shape_str(nodes_[root].value));
  for (Node& n : nodes_) n.grad_live = false;
  if (!nodes_[root].needs_grad) return;
  touch(nodes_[root]);
  nodes_[root].grad(0, 0) = 1.0;
  for (int i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad_live && n.back) n.back(*this, n.grad, i);
  }
}

void Tape::clear() { nodes_.clear(); }

// ---- arithmetic ----

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  switch (broadcast_kind("add", a.value(), b.value())) {
    case Broadcast::None:
      return t.emit(a.value() + b.value(), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum(ia, g);
                      tp.accum(ib, g);
                    });
    case Broadcast::RightCol:
      return t.emit(a.value().colwise() + b.value().col(0), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum(ia, g);
                      tp.accum(ib, g.rowwise().sum());
                    });
    case Broadcast::LeftCol:
      return t.emit(b.value().colwise() + a.value().col(0), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum(ia, g.rowwise().sum());
                      tp.accum(ib, g);
                    });
  }
  fail("unreachable");
}

Var add(Var a, double s) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array() + s, {ia},
                [ia](Tape& tp, const Mat& g, int) { tp.accum(ia, g); });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  switch (broadcast_kind("sub", a.value(), b.value())) {
    case Broadcast::None:
      return t.emit(a.value() - b.value(), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum(ia, g);
                      tp.accum(ib, -g);
                    });
    case Broadcast::RightCol:
      return t.emit(a.value().colwise() - b.value().col(0), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum(ia, g);
                      tp.accum(ib, -g.rowwise().sum());
                    });
    case Broadcast::LeftCol:
      return t.emit((-b.value()).colwise() + a.value().col(0), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum(ia, g.rowwise().sum());
                      tp.accum(ib, -g);
                    });
  }
  fail("unreachable");
}

Var sub(Var a, double s) { return add(a, -s); }

Var sub(double s, Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(s - a.value().array(), {ia},
                [ia](Tape& tp, const Mat& g, int) { tp.accum(ia, -g); });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  switch (broadcast_kind("mul", a.value(), b.value())) {
    case Broadcast::None:
      return t.emit(a.value().cwiseProduct(b.value()), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum(ia, g.cwiseProduct(tp.val(ib)));
                      tp.accum(ib, g.cwiseProduct(tp.val(ia)));
                    });
    case Broadcast::RightCol:
      return t.emit(a.value().array().colwise() * b.value().col(0).array(), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum_array(ia, g.array().colwise() * tp.val(ib).col(0).array());
                      tp.accum(ib, g.cwiseProduct(tp.val(ia)).rowwise().sum());
                    });
    case Broadcast::LeftCol:
      return t.emit(b.value().array().colwise() * a.value().col(0).array(), {ia, ib},
                    [ia, ib](Tape& tp, const Mat& g, int) {
                      tp.accum(ia, g.cwiseProduct(tp.val(ib)).rowwise().sum());
                      tp.accum_array(ib, g.array().colwise() * tp.val(ia).col(0).array());
                    });
  }
  fail("unreachable");
}

Var mul(Var a, double s) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value() * s, {ia},
                [ia, s](Tape& tp, const Mat& g, int) { tp.accum(ia, g * s); });
}

Var div(Var a, Var b) {
  check_same_tape(a, b, "div");
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "div: shape mismatch (" + shape_str(a.value()) + " vs " + shape_str(b.value()) + ")");
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  return t.emit(a.value().cwiseQuotient(b.value()), {ia, ib},
                [ia, ib](Tape& tp, const Mat& g, int) {
                  const auto& bv = tp.val(ib).array();
                  tp.accum_array(ia, g.array() / bv);
                  tp.accum_array(ib, -g.array() * tp.val(ia).array() / (bv * bv));
                });
}

Var div(double s, Var b) {
  Tape& t = *b.tape();
  const int ib = b.index();
  return t.emit(s / b.value().array(), {ib},
                [ib, s](Tape& tp, const Mat& g, int) {
                  const auto& bv = tp.val(ib).array();
                  tp.accum_array(ib, -g.array() * s / (bv * bv));
                });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  require(a.cols() == b.rows(), "matmul: inner dimensions differ (" + shape_str(a.value()) +
                                    " vs " + shape_str(b.value()) + ")");
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  return t.emit(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& tp, const Mat& g, int) {
    tp.accum(ia, g * tp.val(ib).transpose());
    tp.accum(ib, tp.val(ia).transpose() * g);
  });
}

Var neg(Var a) { return mul(a, -1.0); }

// ---- elementwise transcendentals ----

Var sin(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().sin(), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum_array(ia, g.array() * tp.val(ia).array().cos());
  });
}

Var cos(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().cos(), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum_array(ia, -g.array() * tp.val(ia).array().sin());
  });
}

Var exp(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().exp(), {ia}, [ia](Tape& tp, const Mat& g, int self) {
    tp.accum_array(ia, g.array() * tp.val(self).array());
  });
}

Var log(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().log(), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum_array(ia, g.array() / tp.val(ia).array());
  });
}

Var sqrt(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().sqrt(), {ia}, [ia](Tape& tp, const Mat& g, int self) {
    tp.accum_array(ia, g.array() / (2.0 * tp.val(self).array()));
  });
}

Var square(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().square(), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum_array(ia, 2.0 * g.array() * tp.val(ia).array());
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().tanh(), {ia}, [ia](Tape& tp, const Mat& g, int self) {
    tp.accum_array(ia, g.array() * (1.0 - tp.val(self).array().square()));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(1.0 / (1.0 + (-a.value().array()).exp()), {ia},
                [ia](Tape& tp, const Mat& g, int self) {
                  const auto& s = tp.val(self).array();
                  tp.accum_array(ia, g.array() * s * (1.0 - s));
                });
}

Var softplus(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  Mat v = a.value().unaryExpr(
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return t.emit(std::move(v), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum_array(ia, g.array() / (1.0 + (-tp.val(ia).array()).exp()));
  });
}

// ---- kinks: at exact ties the gradient routes to the second operand ----

Var min(Var a, Var b) {
  check_same_tape(a, b, "min");
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "min: shape mismatch (" + shape_str(a.value()) + " vs " + shape_str(b.value()) + ")");
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  return t.emit(a.value().cwiseMin(b.value()), {ia, ib}, [ia, ib](Tape& tp, const Mat& g, int) {
    const auto pick_a = (tp.val(ia).array() < tp.val(ib).array()).cast<double>();
    tp.accum_array(ia, g.array() * pick_a);
    tp.accum_array(ib, g.array() * (1.0 - pick_a));
  });
}

Var max(Var a, Var b) {
  check_same_tape(a, b, "max");
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "max: shape mismatch (" + shape_str(a.value()) + " vs " + shape_str(b.value()) + ")");
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  return t.emit(a.value().cwiseMax(b.value()), {ia, ib}, [ia, ib](Tape& tp, const Mat& g, int) {
    const auto pick_a = (tp.val(ia).array() > tp.val(ib).array()).cast<double>();
    tp.accum_array(ia, g.array() * pick_a);
    tp.accum_array(ib, g.array() * (1.0 - pick_a));
  });
}

Var min(Var a, double c) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().min(c), {ia}, [ia, c](Tape& tp, const Mat& g, int) {
    tp.accum_array(ia, g.array() * (tp.val(ia).array() < c).cast<double>());
  });
}

Var max(Var a, double c) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().max(c), {ia}, [ia, c](Tape& tp, const Mat& g, int) {
    tp.accum_array(ia, g.array() * (tp.val(ia).array() > c).cast<double>());
  });
}

Var clamp(Var a, double lo, double hi) {
  require(lo < hi, "clamp: lo must be < hi");
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().array().max(lo).min(hi), {ia},
                [ia, lo, hi](Tape& tp, const Mat& g, int) {
                  const auto& x = tp.val(ia).array();
                  tp.accum_array(ia, g.array() * ((x > lo) && (x < hi)).cast<double>());
                });
}

Var indicator_ge(Var a, double c) {
  Tape& t = *a.tape();
  return t.emit((a.value().array() >= c).cast<double>(), {}, nullptr, false);
}

Var stop_gradient(Var a) {
  Tape& t = *a.tape();
  return t.emit(a.value(), {}, nullptr, false);
}

// ---- structure ----

Var concat_rows(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_rows: empty input");
  Tape& t = *xs.front().tape();
  Eigen::Index total = 0;
  const Eigen::Index c = xs.front().cols();
  std::vector<int> parents;
  parents.reserve(xs.size());
  for (const Var& x : xs) {
    require(x.tape() == &t, "concat_rows: operands on different tapes");
    require(x.cols() == c, "concat_rows: column mismatch (" + shape_str(x.value()) + ")");
    total += x.rows();
    parents.push_back(x.index());
  }
  Mat v(total, c);
  Eigen::Index r = 0;
  for (const Var& x : xs) {
    v.middleRows(r, x.rows()) = x.value();
    r += x.rows();
  }
  return t.emit(std::move(v), parents, [parents](Tape& tp, const Mat& g, int) {
    Eigen::Index r0 = 0;
    for (int p : parents) {
      const Eigen::Index nr = tp.val(p).rows();
      tp.accum(p, g.middleRows(r0, nr));
      r0 += nr;
    }
  });
}

Var row(Var a, Eigen::Index i) { return rows(a, i, 1); }

Var rows(Var a, Eigen::Index i0, Eigen::Index n) {
  require(i0 >= 0 && n >= 1 && i0 + n <= a.rows(),
          "rows: range [" + std::to_string(i0) + ", " + std::to_string(i0 + n) +
              ") out of bounds for " + shape_str(a.value()));
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().middleRows(i0, n), {ia}, [ia, i0, n](Tape& tp, const Mat& g, int) {
    tp.accum_rows(ia, i0, n, g);
  });
}

Var cols(Var a, Eigen::Index j0, Eigen::Index n) {
  require(j0 >= 0 && n >= 1 && j0 + n <= a.cols(),
          "cols: range out of bounds for " + shape_str(a.value()));
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().middleCols(j0, n), {ia}, [ia, j0, n](Tape& tp, const Mat& g, int) {
    tp.accum_cols(ia, j0, n, g);
  });
}

Var reshape(Var a, Eigen::Index r, Eigen::Index c) {
  require(r * c == a.rows() * a.cols(),
          "reshape: size mismatch (" + shape_str(a.value()) + " to " + std::to_string(r) + "x" +
              std::to_string(c) + ")");
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().reshaped(r, c), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum(ia, g.reshaped(tp.val(ia).rows(), tp.val(ia).cols()));
  });
}

Var repeat_cols(Var a, Eigen::Index n) {
  require(a.cols() == 1, "repeat_cols: expected a column, got " + shape_str(a.value()));
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().replicate(1, n), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum(ia, g.rowwise().sum());
  });
}

// ---- reductions ----

Var sum_all(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(Mat::Constant(1, 1, a.value().sum()), {ia}, [ia](Tape& tp, const Mat& g, int) {
    const Mat& v = tp.val(ia);
    tp.accum(ia, Mat::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

Var mean_all(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(Mat::Constant(1, 1, a.value().mean()), {ia}, [ia](Tape& tp, const Mat& g, int) {
    const Mat& v = tp.val(ia);
    tp.accum(ia, Mat::Constant(v.rows(), v.cols(), g(0, 0) / static_cast<double>(v.size())));
  });
}

Var sum_over_rows(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().colwise().sum(), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum(ia, g.replicate(tp.val(ia).rows(), 1));
  });
}

Var sum_over_cols(Var a) {
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(a.value().rowwise().sum(), {ia}, [ia](Tape& tp, const Mat& g, int) {
    tp.accum(ia, g.replicate(1, tp.val(ia).cols()));
  });
}

// ---- composites ----

Var gaussian_log_density(Var x, Var mu, Var log_std) {
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);
  Var z = mul(sub(x, mu), exp(neg(log_std)));
  return sub(sub(mul(square(z), -0.5), log_std), kHalfLog2Pi);
}

Var reparam_sample(Var mu, Var std, const Mat& noise) {
  Tape& t = *mu.tape();
  return add(mu, mul(std, t.constant(noise)));
}

double grad_check(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                  const std::vector<Mat>& point, double h) {
  require(h > 0, "grad_check: h must be positive");

  auto eval_at = [&](const std::vector<Mat>& p) {
    Tape t;
    std::vector<Var> leaves;
    leaves.reserve(p.size());
    for (const Mat& m : p) leaves.push_back(t.leaf(m, false));
    Var out = f(t, leaves);
    require(out.rows() == 1 && out.cols() == 1, "grad_check: function must be scalar-valued");
    return out.value()(0, 0);
  };

  Tape t;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Mat& m : point) leaves.push_back(t.leaf(m, true));
  Var out = f(t, leaves);
  require(out.rows() == 1 && out.cols() == 1, "grad_check: function must be scalar-valued");
  t.backward(out);
  std::vector<Mat> analytic;
  analytic.reserve(leaves.size());
  for (const Var& v : leaves) analytic.push_back(t.grad(v));

  double worst = 0.0;
  std::vector<Mat> probe = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    for (Eigen::Index j = 0; j < point[k].size(); ++j) {
      const double orig = probe[k](j);
      probe[k](j) = orig + h;
      const double fp = eval_at(probe);
      probe[k](j) = orig - h;
      const double fm = eval_at(probe);
      probe[k](j) = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        fail("grad_check: non-finite value at leaf " + std::to_string(k) + " coordinate " +
             std::to_string(j));
      const double fd = (fp - fm) / (2.0 * h);
      const double rel = std::abs(analytic[k](j) - fd) / (std::abs(fd) + 1e-8);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace espl::ad
