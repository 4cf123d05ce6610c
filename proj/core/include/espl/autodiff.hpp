#pragma once

#include <functional>
#include <vector>

#include "espl/common.hpp"

namespace espl::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; invalidated by Tape::clear().
class Var {
 public:
  Var() = default;

  const Mat& value() const;
  Mat grad() const;  // zeros if backward never reached this node
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int index() const { return idx_; }

 private:
  friend class Tape;
  Var(Tape* tape, int idx) : tape_(tape), idx_(idx) {}
  Tape* tape_ = nullptr;
  int idx_ = -1;
};

// Define-by-run reverse-mode tape over dense f64 matrices. The graph is
// rebuilt every training step; backward may be called on several scalar
// roots of the same tape (gradients reset per call).
//
// Single-writer: a tape is owned by one execution context. Independent
// tapes may run concurrently.
class Tape {
 public:
  // (tape, upstream gradient, index of the node itself)
  using BackFn = std::function<void(Tape&, const Mat&, int)>;

  Var leaf(Mat value, bool requires_grad = true);
  Var constant(Mat value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Mat::Constant(1, 1, v), false); }

  // Seeds d(output)/d(output) = 1 and sweeps the tape in reverse.
  // `output` must be 1x1. Deterministic: same tape, same gradients.
  void backward(const Var& output);

  const Mat& val(int idx) const { return nodes_[idx].value; }
  const Mat& val(const Var& v) const { return nodes_[v.idx_].value; }
  // Gradient of a node after backward; zeros if the sweep never touched it.
  Mat grad(const Var& v) const;

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // --- plumbing used by the primitive implementations ---

  Var emit(Mat value, std::vector<int> parents, BackFn back,
           bool needs_grad_override = true);
  bool needs_grad(int idx) const { return nodes_[idx].needs_grad; }

  template <class E>
  void accum(int idx, const E& expr) {
    Node& n = nodes_[idx];
    if (!n.needs_grad) return;
    touch(n);
    n.grad.noalias() += expr;
  }
  template <class E>
  void accum_array(int idx, const E& expr) {  // for array-expression rhs
    Node& n = nodes_[idx];
    if (!n.needs_grad) return;
    touch(n);
    n.grad.array() += expr;
  }
  template <class E>
  void accum_rows(int idx, Eigen::Index r0, Eigen::Index nr, const E& expr) {
    Node& n = nodes_[idx];
    if (!n.needs_grad) return;
    touch(n);
    n.grad.middleRows(r0, nr).noalias() += expr;
  }
  template <class E>
  void accum_cols(int idx, Eigen::Index c0, Eigen::Index nc, const E& expr) {
    Node& n = nodes_[idx];
    if (!n.needs_grad) return;
    touch(n);
    n.grad.middleCols(c0, nc).noalias() += expr;
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::vector<int> parents;
    BackFn back;
    bool needs_grad = false;
    bool grad_live = false;
  };

  void touch(Node& n) {
    if (!n.grad_live) {
      n.grad.setZero(n.value.rows(), n.value.cols());
      n.grad_live = true;
    }
  }

  std::vector<Node> nodes_;
};

// ---- primitives ----
// Elementwise binaries accept equal shapes or broadcast an (n x 1) column
// across the columns of an (n x m) operand. Shape mismatches throw
// EsplError naming the op and shapes.

Var add(Var a, Var b);
Var add(Var a, double s);
Var sub(Var a, Var b);
Var sub(Var a, double s);
Var sub(double s, Var a);
Var mul(Var a, Var b);
Var mul(Var a, double s);
Var div(Var a, Var b);
Var div(double s, Var b);
Var matmul(Var a, Var b);
Var neg(Var a);

Var sin(Var a);
Var cos(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);

// kink rule: at exact ties the gradient routes to the second operand
// (0 for the scalar forms), keeping penalty hinges one-sided.
Var min(Var a, Var b);
Var max(Var a, Var b);
Var min(Var a, double c);
Var max(Var a, double c);
Var clamp(Var a, double lo, double hi);

Var indicator_ge(Var a, double c);  // 1[a >= c], zero gradient
Var stop_gradient(Var a);

Var concat_rows(const std::vector<Var>& xs);
Var row(Var a, Eigen::Index i);
Var rows(Var a, Eigen::Index i0, Eigen::Index n);
Var cols(Var a, Eigen::Index j0, Eigen::Index n);
Var reshape(Var a, Eigen::Index r, Eigen::Index c);  // column-major order
Var repeat_cols(Var a, Eigen::Index n);

Var sum_all(Var a);        // 1x1
Var mean_all(Var a);       // 1x1
Var sum_over_rows(Var a);  // 1 x cols
Var sum_over_cols(Var a);  // rows x 1

// log N(x; mu, exp(log_std)), elementwise
Var gaussian_log_density(Var x, Var mu, Var log_std);
// mu + std .* noise; noise enters as a constant so gradients flow to mu/std
Var reparam_sample(Var mu, Var std, const Mat& noise);

// Max over all leaf coordinates of |analytic - central difference| /
// (|central difference| + 1e-8). `f` must be deterministic (freeze any
// sampling noise before calling) and scalar-valued.
double grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& f,
    const std::vector<Mat>& point, double h);

}  // namespace espl::ad
