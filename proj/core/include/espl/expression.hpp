#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "espl/rng.hpp"
#include "espl/symbolic_network.hpp"
#include "espl/symbolic_ops.hpp"

namespace espl {

enum class ExprKind { Constant, Var, Op, Affine };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct AffineTerm {
  double coef;
  ExprPtr child;
};

// Immutable expression node. Op nodes carry the `regularized` flag: when
// set, evaluation uses the clamped/cut operator semantics so an extracted
// tree reproduces the masked network exactly; verify_and_strip clears the
// flag where the clamp provably never fires on the reachable state box.
struct Expr {
  ExprKind kind = ExprKind::Constant;
  double value = 0.0;                // Constant
  int var = -1;                      // Var: 0-based state index
  OperatorKind op = OperatorKind::Sin;
  bool regularized = true;
  std::vector<ExprPtr> children;     // Op arguments
  std::vector<AffineTerm> terms;     // Affine: bias + sum coef_i * child_i
  double bias = 0.0;
};

ExprPtr make_constant(double v);
ExprPtr make_var(int index);
ExprPtr make_op(OperatorKind op, std::vector<ExprPtr> children, bool regularized = true);
ExprPtr make_affine(std::vector<AffineTerm> terms, double bias);

double evaluate(const Expr& e, std::span<const double> state);
bool structurally_equal(const Expr& a, const Expr& b);

// Closed-form policy from a masked network, by symbolic forward
// substitution; zero-weight paths are dropped. Pre-tanh.
std::vector<ExprPtr> extract(const NetworkConfig& config,
                             std::span<const SymbolicNetwork> nets, const Mat& mask_flat);
// Deterministic mode: mask = 1[p >= 0.5].
std::vector<ExprPtr> extract_deterministic(const NetworkConfig& config,
                                           std::span<const SymbolicNetwork> nets, const Mat& p);

// Constant folding, identity elimination, affine merging. Evaluation-
// equivalent on the reachable box (semantics-changing rewrites only touch
// non-regularized nodes).
ExprPtr simplify(const ExprPtr& e);

struct StateBox {
  Vec lo, hi;
};

// Samples the box; clamped operators whose inputs clear their bound by a
// 10% margin on every sample are replaced by the plain operator. Each
// replacement is recorded as a human-readable assumption.
ExprPtr verify_and_strip(const ExprPtr& e, const StateBox& box, int samples, RngStream& rng,
                         std::vector<std::string>* assumptions = nullptr);

struct DimMetrics {
  int operators = 0;
  int constant_terms = 0;
  int variable_terms = 0;
  int total() const { return operators + constant_terms + variable_terms; }
};

struct PolicyReport {
  std::vector<ExprPtr> trees;  // one per action dimension
  std::vector<DimMetrics> per_dim;
  double length = 0.0;  // mean over dims of (N_o + N_c + N_v)
  std::string config_hash;
  std::uint64_t seed = 0;
  int iteration = 0;
  std::vector<std::string> assumptions;
};

DimMetrics count_terms(const Expr& e);
PolicyReport metrics(std::vector<ExprPtr> trees);

// Human-readable infix; constants rounded to two decimals, state
// variables printed 1-based ("s3" is state index 2).
std::string to_infix(const Expr& e);

// Lossless structured AST (JSON text); round-trips through parse_json.
std::string to_json_text(const Expr& e);
ExprPtr parse_json(std::string_view json_text);

// Parses the infix form back into a tree (plain operator semantics).
ExprPtr parse_infix(std::string_view text);

// policy.json (AST + metrics + provenance) and policy.txt (one infix
// line per action dimension).
void write_policy_files(const std::string& directory, const PolicyReport& report);
PolicyReport read_policy_json(const std::string& path);
std::vector<ExprPtr> read_policy_txt(const std::string& path);

}  // namespace espl
