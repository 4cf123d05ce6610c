#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "espl/autodiff.hpp"
#include "espl/common.hpp"

namespace espl {

// Regularized operator library. Every operator is total on finite inputs:
// inputs near a pole or overflow region are clamped/cut and a one-sided
// hinge penalty reports how far the input strayed.
enum class OperatorKind { Mul, Div, Sin, Cos, Exp, Log, Ident, Cond };

int arity(OperatorKind kind);
std::string_view op_name(OperatorKind kind);      // "mul", "div", ...
OperatorKind op_from_name(std::string_view name);  // throws on unknown tag

struct OperatorBounds {
  static constexpr double mul_clamp = 100.0;
  static constexpr double div_bound = 0.01;
  static constexpr double exp_hi = 4.0;
  static constexpr double exp_lo = -10.0;
  static constexpr double log_bound = 0.001;
};

struct OpResult {
  double output;
  double penalty;  // >= 0; 0 iff the regularized and plain forms agree
};

// Scalar form of the piecewise rules.
OpResult apply(OperatorKind kind, std::span<const double> inputs);

// Plain (unregularized) form; Div divides by zero if asked to.
double apply_plain(OperatorKind kind, std::span<const double> inputs);

// Tape form used inside the symbolic network. Inputs are 1 x batch rows.
// penalty is absent for operators whose penalty is identically zero.
struct OpVarResult {
  ad::Var output;
  std::optional<ad::Var> penalty;
};
OpVarResult apply(ad::Tape& tape, OperatorKind kind, std::span<const ad::Var> inputs);

}  // namespace espl
