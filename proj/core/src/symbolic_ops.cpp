#include "espl/symbolic_ops.hpp"

#include <cmath>

namespace espl {

int arity(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Mul:
    case OperatorKind::Div:
      return 2;
    case OperatorKind::Cond:
      return 3;
    default:
      return 1;
  }
}

std::string_view op_name(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Mul: return "mul";
    case OperatorKind::Div: return "div";
    case OperatorKind::Sin: return "sin";
    case OperatorKind::Cos: return "cos";
    case OperatorKind::Exp: return "exp";
    case OperatorKind::Log: return "log";
    case OperatorKind::Ident: return "ident";
    case OperatorKind::Cond: return "cond";
  }
  fail("op_name: bad OperatorKind");
}

OperatorKind op_from_name(std::string_view name) {
  if (name == "mul") return OperatorKind::Mul;
  if (name == "div") return OperatorKind::Div;
  if (name == "sin") return OperatorKind::Sin;
  if (name == "cos") return OperatorKind::Cos;
  if (name == "exp") return OperatorKind::Exp;
  if (name == "log") return OperatorKind::Log;
  if (name == "ident") return OperatorKind::Ident;
  if (name == "cond") return OperatorKind::Cond;
  fail("unknown operator tag: '" + std::string(name) + "'");
}

namespace {

double hinge(double x) { return x > 0.0 ? x : 0.0; }

void check_arity(OperatorKind kind, std::size_t n) {
  require(static_cast<int>(n) == arity(kind),
          std::string(op_name(kind)) + ": expected " + std::to_string(arity(kind)) +
              " inputs, got " + std::to_string(n));
}

}  // namespace

OpResult apply(OperatorKind kind, std::span<const double> in) {
  check_arity(kind, in.size());
  constexpr double kMul = OperatorBounds::mul_clamp;
  constexpr double kDiv = OperatorBounds::div_bound;
  constexpr double kExpHi = OperatorBounds::exp_hi;
  constexpr double kExpLo = OperatorBounds::exp_lo;
  constexpr double kLog = OperatorBounds::log_bound;
  switch (kind) {
    case OperatorKind::Mul: {
      const double a = std::min(std::max(in[0], -kMul), kMul);
      const double b = std::min(std::max(in[1], -kMul), kMul);
      const double pen = hinge(in[0] - kMul) + hinge(-kMul - in[0]) +
                         hinge(in[1] - kMul) + hinge(-kMul - in[1]);
      return {a * b, pen};
    }
    case OperatorKind::Div: {
      const double out = in[1] >= kDiv ? in[0] / in[1] : 0.0;
      return {out, hinge(kDiv - in[1])};
    }
    case OperatorKind::Sin:
      return {std::sin(in[0]), 0.0};
    case OperatorKind::Cos:
      return {std::cos(in[0]), 0.0};
    case OperatorKind::Exp:
      return {std::exp(std::min(std::max(in[0], kExpLo), kExpHi)),
              hinge(in[0] - kExpHi) + hinge(kExpLo - in[0])};
    case OperatorKind::Log:
      return {std::log(std::max(in[0], kLog)), hinge(kLog - in[0])};
    case OperatorKind::Ident:
      return {in[0], 0.0};
    case OperatorKind::Cond: {
      const double s = 1.0 / (1.0 + std::exp(-in[0]));
      return {s * in[1] + (1.0 - s) * in[2], 0.0};
    }
  }
  fail("apply: bad OperatorKind");
}

double apply_plain(OperatorKind kind, std::span<const double> in) {
  check_arity(kind, in.size());
  switch (kind) {
    case OperatorKind::Mul: return in[0] * in[1];
    case OperatorKind::Div: return in[0] / in[1];
    case OperatorKind::Sin: return std::sin(in[0]);
    case OperatorKind::Cos: return std::cos(in[0]);
    case OperatorKind::Exp: return std::exp(in[0]);
    case OperatorKind::Log: return std::log(in[0]);
    case OperatorKind::Ident: return in[0];
    case OperatorKind::Cond: {
      const double s = 1.0 / (1.0 + std::exp(-in[0]));
      return s * in[1] + (1.0 - s) * in[2];
    }
  }
  fail("apply_plain: bad OperatorKind");
}

OpVarResult apply(ad::Tape& t, OperatorKind kind, std::span<const ad::Var> in) {
  check_arity(kind, in.size());
  constexpr double kMul = OperatorBounds::mul_clamp;
  constexpr double kDiv = OperatorBounds::div_bound;
  constexpr double kExpHi = OperatorBounds::exp_hi;
  constexpr double kExpLo = OperatorBounds::exp_lo;
  constexpr double kLog = OperatorBounds::log_bound;
  using namespace ad;
  switch (kind) {
    case OperatorKind::Mul: {
      Var a = clamp(in[0], -kMul, kMul);
      Var b = clamp(in[1], -kMul, kMul);
      Var pen = add(add(max(sub(in[0], kMul), 0.0), max(sub(-kMul, in[0]), 0.0)),
                    add(max(sub(in[1], kMul), 0.0), max(sub(-kMul, in[1]), 0.0)));
      return {mul(a, b), pen};
    }
    case OperatorKind::Div: {
      Var gate = indicator_ge(in[1], kDiv);
      Var safe = max(in[1], kDiv);
      Var pen = max(sub(kDiv, in[1]), 0.0);
      return {mul(gate, div(in[0], safe)), pen};
    }
    case OperatorKind::Sin:
      return {sin(in[0]), std::nullopt};
    case OperatorKind::Cos:
      return {cos(in[0]), std::nullopt};
    case OperatorKind::Exp: {
      Var pen = add(max(sub(in[0], kExpHi), 0.0), max(sub(kExpLo, in[0]), 0.0));
      return {exp(clamp(in[0], kExpLo, kExpHi)), pen};
    }
    case OperatorKind::Log: {
      Var pen = max(sub(kLog, in[0]), 0.0);
      return {log(max(in[0], kLog)), pen};
    }
    case OperatorKind::Ident:
      return {in[0], std::nullopt};
    case OperatorKind::Cond: {
      Var s = sigmoid(in[0]);
      return {add(mul(s, in[1]), mul(sub(1.0, s), in[2])), std::nullopt};
    }
  }
  fail("apply: bad OperatorKind");
}

}  // namespace espl
