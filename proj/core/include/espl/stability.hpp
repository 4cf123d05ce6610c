#pragma once

#include <array>
#include <complex>
#include <functional>
#include <span>

#include "espl/envs.hpp"

namespace espl {

// Closed-loop cartpole linearized at the upright equilibrium under an
// affine policy a = k_theta * theta + k_theta_dot * theta_dot. The cart
// states (x, xdot) never feed back, so rows 0 and 2 are shift rows and the
// spectrum is {0, 0} plus the (theta, theta_dot) block's.
struct LinearSystem {
  Eigen::Matrix4d A;
  TaskParams params;
  double k_theta = 0.0;
  double k_theta_dot = 0.0;
};

// `offset` is the policy's constant term; anything beyond 1e-3 shifts the
// equilibrium away from the origin and is rejected.
LinearSystem linearize(double k_theta, double k_theta_dot, double offset,
                       const TaskParams& params);

// Finite-difference Jacobian of the closed-loop continuous-time vector
// field at the origin; the cross-check path for the analytic matrix.
// `policy` maps the 4-dim state to the action (tanh already applied or not;
// both have the same derivative at the origin when the policy is zero there).
Eigen::Matrix4d linearize_fd(const std::function<double(const Vec&)>& policy,
                             const TaskParams& params, double h = 1e-5);

// Quadratic formula for the 2x2 block.
std::array<std::complex<double>, 2> eig2(const Eigen::Matrix2d& m);

// All four eigenvalues. Uses the {0,0} + 2x2-block closed form when the
// matrix has the cartpole shift structure, a QR solver otherwise.
std::array<std::complex<double>, 4> eigenvalues(const Eigen::Matrix4d& a);
std::array<std::complex<double>, 4> eigenvalues_qr(const Eigen::Matrix4d& a);

enum class StabilityClass { Stable, Unstable, Marginal };
std::string_view stability_name(StabilityClass c);

// Hartman-Grobman at the equilibrium: unstable if any real part > tol;
// stable if exactly the two uncontrolled shift modes are zero and every
// other real part < -tol; marginal otherwise.
StabilityClass classify(std::span<const std::complex<double>> eigs, double tol = 1e-9);

}  // namespace espl
