#include "espl/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace espl {

using nlohmann::json;

ExprPtr make_constant(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Constant;
  e->value = v;
  return e;
}

ExprPtr make_var(int index) {
  require(index >= 0, "make_var: negative state index");
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Var;
  e->var = index;
  return e;
}

ExprPtr make_op(OperatorKind op, std::vector<ExprPtr> children, bool regularized) {
  require(static_cast<int>(children.size()) == arity(op),
          std::string(op_name(op)) + ": wrong argument count");
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Op;
  e->op = op;
  e->regularized = regularized;
  e->children = std::move(children);
  return e;
}

ExprPtr make_affine(std::vector<AffineTerm> terms, double bias) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Affine;
  e->terms = std::move(terms);
  e->bias = bias;
  return e;
}

double evaluate(const Expr& e, std::span<const double> state) {
  switch (e.kind) {
    case ExprKind::Constant:
      return e.value;
    case ExprKind::Var:
      require(e.var < static_cast<int>(state.size()),
              "evaluate: state index s" + std::to_string(e.var + 1) + " out of range");
      return state[e.var];
    case ExprKind::Op: {
      double args[3];
      for (std::size_t i = 0; i < e.children.size(); ++i)
        args[i] = evaluate(*e.children[i], state);
      std::span<const double> in(args, e.children.size());
      return e.regularized ? apply(e.op, in).output : apply_plain(e.op, in);
    }
    case ExprKind::Affine: {
      double acc = 0.0;
      for (const AffineTerm& t : e.terms) acc += t.coef * evaluate(*t.child, state);
      return acc + e.bias;
    }
  }
  fail("evaluate: bad ExprKind");
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::Constant:
      return a.value == b.value;
    case ExprKind::Var:
      return a.var == b.var;
    case ExprKind::Op:
      if (a.op != b.op || a.regularized != b.regularized) return false;
      for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!structurally_equal(*a.children[i], *b.children[i])) return false;
      return true;
    case ExprKind::Affine:
      if (a.bias != b.bias || a.terms.size() != b.terms.size()) return false;
      for (std::size_t i = 0; i < a.terms.size(); ++i) {
        if (a.terms[i].coef != b.terms[i].coef) return false;
        if (!structurally_equal(*a.terms[i].child, *b.terms[i].child)) return false;
      }
      return true;
  }
  return false;
}

// ---- extraction ----

namespace {

ExprPtr affine_row(const Mat& w, const Mat& mask, const Mat& b, Eigen::Index r,
                   const std::vector<ExprPtr>& inputs, Eigen::Index mask_offset) {
  std::vector<AffineTerm> terms;
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    // mask is the flat column-major slice of this weight matrix
    const double m = mask(mask_offset + c * w.rows() + r, 0);
    const double coef = w(r, c) * m;
    if (coef != 0.0) terms.push_back({coef, inputs[c]});
  }
  return make_affine(std::move(terms), b(r, 0));
}

}  // namespace

std::vector<ExprPtr> extract(const NetworkConfig& config, std::span<const SymbolicNetwork> nets,
                             const Mat& mask_flat) {
  Eigen::Index expected = 0;
  for (const SymbolicNetwork& net : nets)
    for (const Mat& w : net.w) expected += w.size();
  require(mask_flat.rows() == expected && mask_flat.cols() == 1,
          "extract: mask has " + shape_str(mask_flat) + ", expected " + std::to_string(expected) +
              "x1");

  const int depth = static_cast<int>(config.layers.size());
  std::vector<ExprPtr> trees;
  Eigen::Index offset = 0;
  for (const SymbolicNetwork& net : nets) {
    std::vector<ExprPtr> pool;
    for (int i = 0; i < config.state_dim; ++i) pool.push_back(make_var(i));
    Eigen::Index pool_start = 0;  // plain structure consumes only the last layer

    for (int l = 0; l < depth; ++l) {
      std::vector<ExprPtr> inputs(pool.begin() + pool_start, pool.end());
      std::vector<ExprPtr> rows_exprs;
      const Mat& w = net.w[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        rows_exprs.push_back(affine_row(w, mask_flat, net.b[l], r, inputs, offset));
      offset += w.size();

      std::vector<ExprPtr> outs;
      Eigen::Index r = 0;
      for (OperatorKind kind : config.layers[l].ops) {
        const int k = arity(kind);
        if (kind == OperatorKind::Ident) {
          outs.push_back(rows_exprs[r]);
        } else {
          std::vector<ExprPtr> args(rows_exprs.begin() + r, rows_exprs.begin() + r + k);
          outs.push_back(make_op(kind, std::move(args), /*regularized=*/true));
        }
        r += k;
      }
      if (config.structure == Structure::Plain) pool_start = static_cast<Eigen::Index>(pool.size());
      for (ExprPtr& o : outs) pool.push_back(std::move(o));
    }

    std::vector<ExprPtr> final_inputs(pool.begin() + pool_start, pool.end());
    trees.push_back(
        affine_row(net.w[depth], mask_flat, net.b[depth], 0, final_inputs, offset));
    offset += net.w[depth].size();
  }
  return trees;
}

std::vector<ExprPtr> extract_deterministic(const NetworkConfig& config,
                                           std::span<const SymbolicNetwork> nets, const Mat& p) {
  return extract(config, nets, (p.array() >= 0.5).cast<double>());
}

// ---- simplification ----

namespace {

bool is_constant(const ExprPtr& e) { return e->kind == ExprKind::Constant; }

ExprPtr simplify_impl(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Constant:
    case ExprKind::Var:
      return e;
    case ExprKind::Op: {
      std::vector<ExprPtr> kids;
      kids.reserve(e->children.size());
      bool all_const = true;
      for (const ExprPtr& c : e->children) {
        kids.push_back(simplify_impl(c));
        all_const = all_const && is_constant(kids.back());
      }
      if (all_const) {
        double args[3];
        for (std::size_t i = 0; i < kids.size(); ++i) args[i] = kids[i]->value;
        std::span<const double> in(args, kids.size());
        return make_constant(e->regularized ? apply(e->op, in).output : apply_plain(e->op, in));
      }
      // semantics-changing rewrites only when the clamp is gone
      if (!e->regularized && e->op == OperatorKind::Mul) {
        if (is_constant(kids[0])) return simplify_impl(make_affine({{kids[0]->value, kids[1]}}, 0.0));
        if (is_constant(kids[1])) return simplify_impl(make_affine({{kids[1]->value, kids[0]}}, 0.0));
      }
      if (!e->regularized && e->op == OperatorKind::Div && is_constant(kids[1]) &&
          kids[1]->value != 0.0)
        return simplify_impl(make_affine({{1.0 / kids[1]->value, kids[0]}}, 0.0));
      if (e->op == OperatorKind::Ident) return kids[0];
      return make_op(e->op, std::move(kids), e->regularized);
    }
    case ExprKind::Affine: {
      std::vector<AffineTerm> terms;
      double bias = e->bias;
      for (const AffineTerm& t : e->terms) {
        if (t.coef == 0.0) continue;
        ExprPtr c = simplify_impl(t.child);
        if (c->kind == ExprKind::Constant) {
          bias += t.coef * c->value;
        } else if (c->kind == ExprKind::Affine) {
          bias += t.coef * c->bias;
          for (const AffineTerm& inner : c->terms)
            terms.push_back({t.coef * inner.coef, inner.child});
        } else {
          terms.push_back({t.coef, c});
        }
      }
      // merge structurally identical children
      std::vector<AffineTerm> merged;
      for (const AffineTerm& t : terms) {
        bool found = false;
        for (AffineTerm& m : merged) {
          if (structurally_equal(*m.child, *t.child)) {
            m.coef += t.coef;
            found = true;
            break;
          }
        }
        if (!found) merged.push_back(t);
      }
      std::erase_if(merged, [](const AffineTerm& t) { return t.coef == 0.0; });
      if (merged.empty()) return make_constant(bias);
      if (merged.size() == 1 && merged[0].coef == 1.0 && bias == 0.0) return merged[0].child;
      return make_affine(std::move(merged), bias);
    }
  }
  fail("simplify: bad ExprKind");
}

}  // namespace

ExprPtr simplify(const ExprPtr& e) { return simplify_impl(e); }

// ---- verify_and_strip ----

namespace {

struct InputRange {
  double lo[3] = {INFINITY, INFINITY, INFINITY};
  double hi[3] = {-INFINITY, -INFINITY, -INFINITY};
};

double eval_recording(const Expr& e, std::span<const double> state,
                      std::map<const Expr*, InputRange>& ranges) {
  switch (e.kind) {
    case ExprKind::Constant:
      return e.value;
    case ExprKind::Var:
      return state[e.var];
    case ExprKind::Op: {
      double args[3];
      for (std::size_t i = 0; i < e.children.size(); ++i)
        args[i] = eval_recording(*e.children[i], state, ranges);
      InputRange& r = ranges[&e];
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        r.lo[i] = std::min(r.lo[i], args[i]);
        r.hi[i] = std::max(r.hi[i], args[i]);
      }
      std::span<const double> in(args, e.children.size());
      return e.regularized ? apply(e.op, in).output : apply_plain(e.op, in);
    }
    case ExprKind::Affine: {
      double acc = e.bias;
      for (const AffineTerm& t : e.terms) acc += t.coef * eval_recording(*t.child, state, ranges);
      return acc;
    }
  }
  fail("eval_recording: bad ExprKind");
}

std::string range_str(double lo, double hi) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "[%.4g, %.4g]", lo, hi);
  return buf;
}

ExprPtr strip(const ExprPtr& e, const std::map<const Expr*, InputRange>& ranges,
              std::vector<std::string>* assumptions) {
  switch (e->kind) {
    case ExprKind::Constant:
    case ExprKind::Var:
      return e;
    case ExprKind::Op: {
      std::vector<ExprPtr> kids;
      for (const ExprPtr& c : e->children) kids.push_back(strip(c, ranges, assumptions));
      bool reg = e->regularized;
      auto it = ranges.find(e.get());
      if (reg && it != ranges.end()) {
        const InputRange& r = it->second;
        bool safe = false;
        std::string note;
        switch (e->op) {
          case OperatorKind::Mul: {
            const double m = OperatorBounds::mul_clamp * 0.9;
            safe = std::abs(r.lo[0]) <= m && std::abs(r.hi[0]) <= m && std::abs(r.lo[1]) <= m &&
                   std::abs(r.hi[1]) <= m;
            note = "mul inputs " + range_str(r.lo[0], r.hi[0]) + ", " +
                   range_str(r.lo[1], r.hi[1]) + " stay inside the +-100 clamp";
            break;
          }
          case OperatorKind::Div:
            safe = r.lo[1] >= OperatorBounds::div_bound * 1.1;
            note = "div denominator " + range_str(r.lo[1], r.hi[1]) + " stays above 0.01";
            break;
          case OperatorKind::Exp:
            safe = r.lo[0] >= OperatorBounds::exp_lo * 0.9 &&
                   r.hi[0] <= OperatorBounds::exp_hi * 0.9;
            note = "exp input " + range_str(r.lo[0], r.hi[0]) + " stays inside [-10, 4]";
            break;
          case OperatorKind::Log:
            safe = r.lo[0] >= OperatorBounds::log_bound * 1.1;
            note = "log input " + range_str(r.lo[0], r.hi[0]) + " stays above 0.001";
            break;
          default:
            reg = false;  // sin/cos/ident/cond have no forbidden region
            break;
        }
        if (safe) {
          reg = false;
          if (assumptions) assumptions->push_back(note);
        }
      }
      return make_op(e->op, std::move(kids), reg);
    }
    case ExprKind::Affine: {
      std::vector<AffineTerm> terms;
      for (const AffineTerm& t : e->terms)
        terms.push_back({t.coef, strip(t.child, ranges, assumptions)});
      return make_affine(std::move(terms), e->bias);
    }
  }
  fail("strip: bad ExprKind");
}

}  // namespace

ExprPtr verify_and_strip(const ExprPtr& e, const StateBox& box, int samples, RngStream& rng,
                         std::vector<std::string>* assumptions) {
  require(box.lo.size() == box.hi.size() && box.lo.size() > 0, "verify_and_strip: bad state box");
  require(samples > 0, "verify_and_strip: samples must be positive");
  std::map<const Expr*, InputRange> ranges;
  std::vector<double> s(box.lo.size());
  for (int k = 0; k < samples; ++k) {
    for (Eigen::Index i = 0; i < box.lo.size(); ++i) s[i] = rng.uniform(box.lo[i], box.hi[i]);
    eval_recording(*e, s, ranges);
  }
  return strip(e, ranges, assumptions);
}

// ---- metrics ----

namespace {

void count_into(const Expr& e, DimMetrics& m) {
  switch (e.kind) {
    case ExprKind::Constant:
      m.constant_terms += 1;
      return;
    case ExprKind::Var:
      m.variable_terms += 1;
      return;
    case ExprKind::Op:
      m.operators += 1;
      for (const ExprPtr& c : e.children) count_into(*c, m);
      return;
    case ExprKind::Affine: {
      // coefficient * variable counts as one variable term; coefficients on
      // operator subtrees are uncounted; additions between parts count as
      // operators; a nonzero bias is one constant term.
      const int parts = static_cast<int>(e.terms.size()) + (e.bias != 0.0 ? 1 : 0);
      if (parts == 0) {
        m.constant_terms += 1;  // degenerate zero affine
        return;
      }
      m.operators += parts - 1;
      if (e.bias != 0.0) m.constant_terms += 1;
      for (const AffineTerm& t : e.terms) count_into(*t.child, m);
      return;
    }
  }
}

}  // namespace

DimMetrics count_terms(const Expr& e) {
  DimMetrics m;
  count_into(e, m);
  return m;
}

PolicyReport metrics(std::vector<ExprPtr> trees) {
  require(!trees.empty(), "metrics: no trees");
  PolicyReport report;
  report.trees = std::move(trees);
  double total = 0.0;
  for (const ExprPtr& t : report.trees) {
    report.per_dim.push_back(count_terms(*t));
    total += report.per_dim.back().total();
  }
  report.length = total / static_cast<double>(report.trees.size());
  return report;
}

// ---- infix ----

namespace {

std::string format_coef(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

enum class Ctx { Sum, Product, Atom };

std::string infix(const Expr& e, Ctx ctx);

std::string infix_term(double coef, const Expr& child) {
  std::string body = infix(child, Ctx::Product);
  if (coef == 1.0) return body;
  if (coef == -1.0) return "-" + body;
  return format_coef(coef) + "*" + body;
}

std::string infix(const Expr& e, Ctx ctx) {
  switch (e.kind) {
    case ExprKind::Constant:
      return format_coef(e.value);
    case ExprKind::Var:
      return "s" + std::to_string(e.var + 1);
    case ExprKind::Op: {
      if (e.op == OperatorKind::Mul) {
        std::string s = infix(*e.children[0], Ctx::Product) + "*" +
                        infix(*e.children[1], Ctx::Product);
        return ctx == Ctx::Atom ? "(" + s + ")" : s;
      }
      if (e.op == OperatorKind::Div) {
        std::string s = infix(*e.children[0], Ctx::Product) + "/" +
                        infix(*e.children[1], Ctx::Atom);
        return ctx == Ctx::Atom ? "(" + s + ")" : s;
      }
      std::string s(op_name(e.op));
      s += "(";
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) s += ", ";
        s += infix(*e.children[i], Ctx::Sum);
      }
      return s + ")";
    }
    case ExprKind::Affine: {
      if (e.terms.empty()) return format_coef(e.bias);
      std::string s = infix_term(e.terms[0].coef, *e.terms[0].child);
      for (std::size_t i = 1; i < e.terms.size(); ++i) {
        const double c = e.terms[i].coef;
        if (c < 0.0)
          s += " - " + infix_term(-c, *e.terms[i].child);
        else
          s += " + " + infix_term(c, *e.terms[i].child);
      }
      if (e.bias != 0.0)
        s += (e.bias < 0.0 ? " - " + format_coef(-e.bias) : " + " + format_coef(e.bias));
      return ctx == Ctx::Sum ? s : "(" + s + ")";
    }
  }
  fail("infix: bad ExprKind");
}

}  // namespace

std::string to_infix(const Expr& e) {
  if (e.kind == ExprKind::Constant && e.value == 0.0) return "0.00";
  return infix(e, Ctx::Sum);
}

// ---- JSON AST ----

namespace {

json expr_to_json(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Constant:
      return json{{"kind", "const"}, {"value", e.value}};
    case ExprKind::Var:
      return json{{"kind", "var"}, {"index", e.var}};
    case ExprKind::Op: {
      json args = json::array();
      for (const ExprPtr& c : e.children) args.push_back(expr_to_json(*c));
      return json{{"kind", "op"},
                  {"op", std::string(op_name(e.op))},
                  {"regularized", e.regularized},
                  {"args", std::move(args)}};
    }
    case ExprKind::Affine: {
      json terms = json::array();
      for (const AffineTerm& t : e.terms)
        terms.push_back(json{{"coef", t.coef}, {"child", expr_to_json(*t.child)}});
      return json{{"kind", "affine"}, {"bias", e.bias}, {"terms", std::move(terms)}};
    }
  }
  fail("expr_to_json: bad ExprKind");
}

ExprPtr expr_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "const") return make_constant(j.at("value").get<double>());
  if (kind == "var") return make_var(j.at("index").get<int>());
  if (kind == "op") {
    std::vector<ExprPtr> kids;
    for (const json& a : j.at("args")) kids.push_back(expr_from_json(a));
    return make_op(op_from_name(j.at("op").get<std::string>()), std::move(kids),
                   j.value("regularized", true));
  }
  if (kind == "affine") {
    std::vector<AffineTerm> terms;
    for (const json& t : j.at("terms"))
      terms.push_back({t.at("coef").get<double>(), expr_from_json(t.at("child"))});
    return make_affine(std::move(terms), j.at("bias").get<double>());
  }
  fail("expr_from_json: unknown node kind '" + kind + "'");
}

}  // namespace

std::string to_json_text(const Expr& e) { return expr_to_json(e).dump(); }

ExprPtr parse_json(std::string_view text) { return expr_from_json(json::parse(text)); }

// ---- infix parser ----

namespace {

class InfixParser {
 public:
  explicit InfixParser(std::string_view s) : s_(s) {}

  ExprPtr parse() {
    ExprPtr e = sum();
    skip_ws();
    require(pos_ == s_.size(), "parse_infix: trailing input at position " + std::to_string(pos_));
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  ExprPtr sum() {
    std::vector<AffineTerm> terms;
    double sign = 1.0;
    if (eat('-')) sign = -1.0;
    terms.push_back({sign, product()});
    for (;;) {
      if (eat('+'))
        terms.push_back({1.0, product()});
      else if (eat('-'))
        terms.push_back({-1.0, product()});
      else
        break;
    }
    if (terms.size() == 1 && terms[0].coef == 1.0) return terms[0].child;
    return make_affine(std::move(terms), 0.0);
  }

  ExprPtr product() {
    ExprPtr left = atom();
    for (;;) {
      if (eat('*'))
        left = make_op(OperatorKind::Mul, {left, atom()}, /*regularized=*/false);
      else if (eat('/'))
        left = make_op(OperatorKind::Div, {left, atom()}, /*regularized=*/false);
      else
        break;
    }
    return left;
  }

  ExprPtr atom() {
    skip_ws();
    require(pos_ < s_.size(), "parse_infix: unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = sum();
      require(eat(')'), "parse_infix: missing ')'");
      return e;
    }
    if (c == '-') {
      ++pos_;
      return make_affine({{-1.0, atom()}}, 0.0);
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("parse_infix: unexpected character '" + std::string(1, c) + "' at position " +
         std::to_string(pos_));
  }

  ExprPtr number() {
    std::size_t n = 0;
    const double v = std::stod(std::string(s_.substr(pos_)), &n);
    pos_ += n;
    return make_constant(v);
  }

  ExprPtr identifier() {
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    std::string name(s_.substr(start, pos_ - start));
    if (name.size() >= 2 && name[0] == 's' &&
        std::all_of(name.begin() + 1, name.end(),
                    [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      const int one_based = std::stoi(name.substr(1));
      require(one_based >= 1, "parse_infix: bad state variable " + name);
      return make_var(one_based - 1);
    }
    // function call
    OperatorKind op = op_from_name(name);
    require(eat('('), "parse_infix: expected '(' after " + name);
    std::vector<ExprPtr> args;
    args.push_back(sum());
    while (eat(',')) args.push_back(sum());
    require(eat(')'), "parse_infix: missing ')' after " + name + "(...");
    return make_op(op, std::move(args), /*regularized=*/false);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

ExprPtr parse_infix(std::string_view text) { return InfixParser(text).parse(); }

// ---- policy files ----

void write_policy_files(const std::string& directory, const PolicyReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);

  json trees = json::array();
  for (const ExprPtr& t : report.trees) trees.push_back(json::parse(to_json_text(*t)));
  json per_dim = json::array();
  for (const DimMetrics& m : report.per_dim)
    per_dim.push_back(json{{"operators", m.operators},
                           {"constant_terms", m.constant_terms},
                           {"variable_terms", m.variable_terms}});
  json doc{{"action_dims", report.trees.size()},
           {"trees", std::move(trees)},
           {"metrics", json{{"length", report.length}, {"per_dim", std::move(per_dim)}}},
           {"provenance", json{{"config_hash", report.config_hash},
                               {"seed", report.seed},
                               {"iteration", report.iteration}}},
           {"assumptions", report.assumptions}};

  std::ofstream jf(fs::path(directory) / "policy.json");
  require(jf.good(), "cannot write policy.json in " + directory);
  jf << doc.dump(2) << "\n";

  std::ofstream tf(fs::path(directory) / "policy.txt");
  require(tf.good(), "cannot write policy.txt in " + directory);
  for (std::size_t d = 0; d < report.trees.size(); ++d)
    tf << "a" << (d + 1) << " = " << to_infix(*report.trees[d]) << "\n";
}

PolicyReport read_policy_json(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "cannot open " + path);
  json doc = json::parse(f);
  PolicyReport report;
  for (const json& t : doc.at("trees")) report.trees.push_back(expr_from_json(t));
  if (doc.contains("metrics")) {
    report.length = doc["metrics"].value("length", 0.0);
    if (doc["metrics"].contains("per_dim"))
      for (const json& m : doc["metrics"]["per_dim"])
        report.per_dim.push_back(DimMetrics{m.value("operators", 0), m.value("constant_terms", 0),
                                            m.value("variable_terms", 0)});
  }
  if (doc.contains("provenance")) {
    report.config_hash = doc["provenance"].value("config_hash", "");
    report.seed = doc["provenance"].value("seed", std::uint64_t{0});
    report.iteration = doc["provenance"].value("iteration", 0);
  }
  if (doc.contains("assumptions"))
    for (const json& a : doc["assumptions"]) report.assumptions.push_back(a.get<std::string>());
  return report;
}

std::vector<ExprPtr> read_policy_txt(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "cannot open " + path);
  std::vector<ExprPtr> trees;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    // accept both bare expressions and "aK = expr" lines
    const auto eq = line.find('=');
    std::string body = line;
    if (eq != std::string::npos && line.find_first_not_of(" \t") == line.find('a'))
      body = line.substr(eq + 1);
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    trees.push_back(parse_infix(body));
  }
  require(!trees.empty(), "no expressions found in " + path);
  return trees;
}

}  // namespace espl
