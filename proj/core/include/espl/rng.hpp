#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace espl {

// splitmix64 step, used to mix (seed, stream name) into substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One random stream. Drawing from one stream never perturbs another, so
// components can be reseeded or reordered without shifting each other.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  // uniform on the open interval (0, 1)
  double uniform01() {
    const std::uint64_t bits = gen_() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = uniform01();
    const double v = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u));
    spare_ = r * std::sin(2.0 * M_PI * v);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * v);
  }

  double gumbel() { return -std::log(-std::log(uniform01())); }

  bool bernoulli(double p) { return uniform01() < p; }

  // uniform integer in [0, n)
  std::uint64_t integer(std::uint64_t n) {
    const std::uint64_t threshold = (~n + 1) % n;  // rejection bound
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  std::string serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }
  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    have_spare_ = false;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Root seed plus named substreams: stream("gumbel"), stream("env", 3), ...
class RngPool {
 public:
  explicit RngPool(std::uint64_t seed) : seed_(seed) {}

  RngStream stream(std::string_view name, std::uint64_t salt = 0) const {
    std::uint64_t x = seed_;
    for (char c : name) x = x * 1099511628211ULL + static_cast<unsigned char>(c);
    x ^= salt * 0x9e3779b97f4a7c15ULL;
    std::uint64_t state = x;
    return RngStream(splitmix64(state));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace espl
