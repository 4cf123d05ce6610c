#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace espl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

class EsplError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw EsplError(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace espl
