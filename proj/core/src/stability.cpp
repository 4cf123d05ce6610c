#include "espl/stability.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace espl {

LinearSystem linearize(double k_theta, double k_theta_dot, double offset,
                       const TaskParams& p) {
  require(std::abs(offset) <= 1e-3,
          "linearize: policy offset " + std::to_string(offset) +
              " shifts the equilibrium away from the origin; the eigenvalue "
              "check only applies to policies that vanish at the upright state");
  const double f = p.force, m = p.pole_mass, M = p.cart_mass, L = p.half_length, g = p.gravity;
  // denominator of the nonlinear theta_acc at theta = 0; the pole mass m
  // appears here (see cartpole_accel), reproducing the published eigenvalues
  const double d_theta = L * (4.0 / 3.0 - m / (m + M));
  const double d_x = 8.0 * M + 2.0 * m;

  LinearSystem sys;
  sys.params = p;
  sys.k_theta = k_theta;
  sys.k_theta_dot = k_theta_dot;
  sys.A.setZero();
  sys.A(0, 1) = 1.0;
  sys.A(2, 3) = 1.0;
  sys.A(1, 2) = (8.0 * f * k_theta - 6.0 * g * m) / d_x;
  sys.A(1, 3) = 8.0 * f * k_theta_dot / d_x;
  sys.A(3, 2) = (g - f * k_theta / (m + M)) / d_theta;
  sys.A(3, 3) = -f * k_theta_dot / ((m + M) * d_theta);
  return sys;
}

Eigen::Matrix4d linearize_fd(const std::function<double(const Vec&)>& policy,
                             const TaskParams& params, double h) {
  require(h > 0, "linearize_fd: h must be positive");
  auto field = [&](const Vec& s) {
    const CartPoleAccel acc = cartpole_accel(s, policy(s), params);
    Vec d(4);
    d << s(1), acc.x_acc, s(3), acc.theta_acc;
    return d;
  };
  Eigen::Matrix4d jac;
  for (int j = 0; j < 4; ++j) {
    Vec plus = Vec::Zero(4), minus = Vec::Zero(4);
    plus(j) = h;
    minus(j) = -h;
    jac.col(j) = (field(plus) - field(minus)) / (2.0 * h);
  }
  return jac;
}

std::array<std::complex<double>, 2> eig2(const Eigen::Matrix2d& m) {
  // roots of lambda^2 - tr lambda + det
  const double tr = m(0, 0) + m(1, 1);
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double disc = tr * tr / 4.0 - det;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    return {std::complex<double>(tr / 2.0 + root, 0.0),
            std::complex<double>(tr / 2.0 - root, 0.0)};
  }
  const double imag = std::sqrt(-disc);
  return {std::complex<double>(tr / 2.0, imag), std::complex<double>(tr / 2.0, -imag)};
}

namespace {

bool has_shift_structure(const Eigen::Matrix4d& a) {
  // columns 0 and 1 feed nothing but the x shift row; rows 0 and 2 are shifts
  const double eps = 0.0;
  return a.col(0).cwiseAbs().maxCoeff() <= eps && a(0, 1) == 1.0 && a(0, 2) == 0.0 &&
         a(0, 3) == 0.0 && a(2, 0) == 0.0 && a(2, 1) == 0.0 && a(2, 2) == 0.0 && a(2, 3) == 1.0 &&
         a(1, 1) == 0.0 && a(3, 1) == 0.0;
}

}  // namespace

std::array<std::complex<double>, 4> eigenvalues_qr(const Eigen::Matrix4d& a) {
  Eigen::EigenSolver<Eigen::Matrix4d> solver(a, /*computeEigenvectors=*/false);
  require(solver.info() == Eigen::Success, "eigenvalues: QR iteration failed to converge");
  std::array<std::complex<double>, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = solver.eigenvalues()(i);
  return out;
}

std::array<std::complex<double>, 4> eigenvalues(const Eigen::Matrix4d& a) {
  if (has_shift_structure(a)) {
    Eigen::Matrix2d block;
    block << 0.0, 1.0, a(3, 2), a(3, 3);
    const auto pair = eig2(block);
    return {std::complex<double>(0.0, 0.0), std::complex<double>(0.0, 0.0), pair[0], pair[1]};
  }
  return eigenvalues_qr(a);
}

std::string_view stability_name(StabilityClass c) {
  switch (c) {
    case StabilityClass::Stable: return "stable";
    case StabilityClass::Unstable: return "unstable";
    case StabilityClass::Marginal: return "marginal";
  }
  fail("stability_name: bad class");
}

StabilityClass classify(std::span<const std::complex<double>> eigs, double tol) {
  int zero_modes = 0;
  bool any_positive = false;
  bool all_negative = true;
  for (const std::complex<double>& e : eigs) {
    if (e.real() > tol) any_positive = true;
    if (std::abs(e) <= tol) {
      ++zero_modes;
      continue;
    }
    if (e.real() >= -tol) all_negative = false;
  }
  if (any_positive) return StabilityClass::Unstable;
  // the two uncontrolled (x, xdot) shift states contribute exactly two zeros
  if (zero_modes == 2 && all_negative) return StabilityClass::Stable;
  return StabilityClass::Marginal;
}

}  // namespace espl
