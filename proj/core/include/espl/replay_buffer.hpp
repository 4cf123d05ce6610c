#pragma once

#include "espl/envs.hpp"
#include "espl/rng.hpp"

namespace espl {

// Fixed-capacity ring buffer of transitions with uniform sampling.
// Stored column-per-transition so minibatches gather into dense blocks;
// storage grows geometrically up to the capacity.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim)
      : capacity_(capacity), obs_dim_(obs_dim), action_dim_(action_dim) {
    require(capacity > 0 && obs_dim > 0 && action_dim > 0, "replay buffer: bad dimensions");
  }

  void add(const Vec& s, const Vec& a, const Vec& s_next, double r, bool done) {
    if (head_ >= allocated() && allocated() < capacity_) grow();
    const Eigen::Index col = static_cast<Eigen::Index>(head_);
    s_.col(col) = s;
    a_.col(col) = a;
    s_next_.col(col) = s_next;
    r_(0, col) = r;
    done_(0, col) = done ? 1.0 : 0.0;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  struct Batch {
    Mat s;       // obs_dim x B
    Mat a;       // action_dim x B
    Mat s_next;  // obs_dim x B
    Mat r;       // 1 x B
    Mat done;    // 1 x B, 1.0 only on true termination
  };

  Batch sample(int batch_size, RngStream& rng) const {
    require(size_ > 0, "replay buffer: sampling from an empty buffer");
    require(batch_size > 0, "replay buffer: batch size must be positive");
    Batch batch;
    batch.s.resize(obs_dim_, batch_size);
    batch.a.resize(action_dim_, batch_size);
    batch.s_next.resize(obs_dim_, batch_size);
    batch.r.resize(1, batch_size);
    batch.done.resize(1, batch_size);
    for (int j = 0; j < batch_size; ++j) {
      const Eigen::Index i = static_cast<Eigen::Index>(rng.integer(size_));
      batch.s.col(j) = s_.col(i);
      batch.a.col(j) = a_.col(i);
      batch.s_next.col(j) = s_next_.col(i);
      batch.r(0, j) = r_(0, i);
      batch.done(0, j) = done_(0, i);
    }
    return batch;
  }

 private:
  std::size_t allocated() const { return static_cast<std::size_t>(s_.cols()); }

  void grow() {
    const std::size_t want =
        std::min(capacity_, allocated() == 0 ? std::size_t{1024} : allocated() * 2);
    auto grow_mat = [&](Mat& m, int rows) {
      Mat bigger(rows, static_cast<Eigen::Index>(want));
      if (m.cols() > 0) bigger.leftCols(m.cols()) = m;
      m.swap(bigger);
    };
    grow_mat(s_, obs_dim_);
    grow_mat(a_, action_dim_);
    grow_mat(s_next_, obs_dim_);
    grow_mat(r_, 1);
    grow_mat(done_, 1);
  }

  std::size_t capacity_;
  int obs_dim_;
  int action_dim_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
  Mat s_, a_, s_next_;
  Mat r_, done_;
};

}  // namespace espl
