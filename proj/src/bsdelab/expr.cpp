#include "bsdelab/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>

#include "bsdelab/errors.hpp"

namespace bsdelab {

namespace {

struct Parser {
  const std::string& text;
  std::size_t pos = 0;

  explicit Parser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  [[noreturn]] void fail(const std::string& what) {
    throw ConfigError("expression error at position " + std::to_string(pos) + ": " +
                      what + " in \"" + text + "\"");
  }

  ExprPtr make(ExprNode::Op op, std::vector<ExprPtr> args = {}, double value = 0.0,
               std::string var = {}) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = value;
    n->var = std::move(var);
    n->args = std::move(args);
    return n;
  }

  ExprPtr parse() {
    ExprPtr e = expr();
    skip_ws();
    if (pos != text.size()) fail("trailing input");
    return e;
  }

  ExprPtr expr() {
    ExprPtr lhs = term();
    for (;;) {
      if (eat('+')) {
        lhs = make(ExprNode::Op::Add, {lhs, term()});
      } else if (eat('-')) {
        lhs = make(ExprNode::Op::Sub, {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    for (;;) {
      if (eat('*')) {
        lhs = make(ExprNode::Op::Mul, {lhs, unary()});
      } else if (eat('/')) {
        lhs = make(ExprNode::Op::Div, {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  ExprPtr unary() {
    if (eat('-')) return make(ExprNode::Op::Neg, {unary()});
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    if (eat('^')) {
      // right-associative
      return make(ExprNode::Op::Pow, {base, unary()});
    }
    return base;
  }

  ExprPtr primary() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of expression");
    const char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      const double v = std::strtod(text.c_str() + pos, &end);
      if (end == text.c_str() + pos) fail("bad number");
      pos = static_cast<std::size_t>(end - text.c_str());
      return make(ExprNode::Op::Const, {}, v);
    }
    if (c == '(') {
      ++pos;
      ExprPtr e = expr();
      if (!eat(')')) fail("missing )");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
        ++pos;
      }
      std::string name = text.substr(start, pos - start);
      if (peek() == '(') {
        eat('(');
        std::vector<ExprPtr> args;
        if (peek() != ')') {
          args.push_back(expr());
          while (eat(',')) args.push_back(expr());
        }
        if (!eat(')')) fail("missing ) after arguments of " + name);
        return function(name, std::move(args));
      }
      return make(ExprNode::Op::Var, {}, 0.0, name);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  ExprPtr function(const std::string& name, std::vector<ExprPtr> args) {
    auto need = [&](std::size_t n) {
      if (args.size() != n) {
        fail(name + " expects " + std::to_string(n) + " argument(s)");
      }
    };
    if (name == "sin") { need(1); return make(ExprNode::Op::Sin, std::move(args)); }
    if (name == "exp") { need(1); return make(ExprNode::Op::Exp, std::move(args)); }
    if (name == "abs") { need(1); return make(ExprNode::Op::Abs, std::move(args)); }
    if (name == "min") { need(2); return make(ExprNode::Op::Min, std::move(args)); }
    if (name == "max") { need(2); return make(ExprNode::Op::Max, std::move(args)); }
    if (name == "pow") { need(2); return make(ExprNode::Op::Pow, std::move(args)); }
    if (name == "ind") { need(1); return make(ExprNode::Op::Ind, std::move(args)); }
    if (name == "intb") {
      need(1);
      if (args[0]->op != ExprNode::Op::Const) fail("intb exponent must be a literal");
      return make(ExprNode::Op::IntB, {}, args[0]->value);
    }
    fail("unknown function " + name);
  }
};

void walk(const ExprPtr& node, const std::function<void(const ExprNode&)>& fn) {
  fn(*node);
  for (const auto& a : node->args) walk(a, fn);
}

std::string intb_key(double q) { return "intb:" + std::to_string(q); }

int component_suffix(const std::string& var, char prefix) {
  if (var.size() == 2 && var[0] == prefix && var[1] >= '1' && var[1] <= '9') {
    return var[1] - '0';
  }
  return 0;
}

}  // namespace

ExprPtr parse_expression(const std::string& text) {
  Parser p(text);
  return p.parse();
}

std::set<std::string> expression_variables(const ExprPtr& ast) {
  std::set<std::string> vars;
  walk(ast, [&](const ExprNode& n) {
    if (n.op == ExprNode::Op::Var) vars.insert(n.var);
  });
  return vars;
}

std::set<double> expression_intb_exponents(const ExprPtr& ast) {
  std::set<double> qs;
  walk(ast, [&](const ExprNode& n) {
    if (n.op == ExprNode::Op::IntB) qs.insert(n.value);
  });
  return qs;
}

double eval_expression(const ExprNode& n, const ExprEnv& env) {
  using Op = ExprNode::Op;
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: {
      if (n.var == "t") return env.t;
      if (n.var == "b") return env.abs_b;
      if (n.var == "supb") return env.sup_abs_b;
      if (n.var == "z") {
        if (!env.z_in_scope) throw ConfigError("variable z not available here");
        return env.z_norm;
      }
      if (n.var == "y") {
        if (env.y.empty()) throw ConfigError("variable y not available here");
        return env.y[0];
      }
      if (int i = component_suffix(n.var, 'y'); i > 0) {
        if (env.y.size() < static_cast<std::size_t>(i)) {
          throw ConfigError("variable " + n.var + " exceeds solution dimension");
        }
        return env.y[i - 1];
      }
      if (int i = component_suffix(n.var, 'b'); i > 0) {
        if (i > env.d) throw ConfigError("variable " + n.var + " exceeds Brownian dimension");
        return env.b[i - 1];
      }
      throw ConfigError("unknown variable " + n.var);
    }
    case Op::Add: return eval_expression(*n.args[0], env) + eval_expression(*n.args[1], env);
    case Op::Sub: return eval_expression(*n.args[0], env) - eval_expression(*n.args[1], env);
    case Op::Mul: return eval_expression(*n.args[0], env) * eval_expression(*n.args[1], env);
    case Op::Div: return eval_expression(*n.args[0], env) / eval_expression(*n.args[1], env);
    case Op::Neg: return -eval_expression(*n.args[0], env);
    case Op::Pow:
      return std::pow(eval_expression(*n.args[0], env), eval_expression(*n.args[1], env));
    case Op::Sin: return std::sin(eval_expression(*n.args[0], env));
    case Op::Exp: return std::exp(std::min(eval_expression(*n.args[0], env), 700.0));
    case Op::Abs: return std::fabs(eval_expression(*n.args[0], env));
    case Op::Min:
      return std::min(eval_expression(*n.args[0], env), eval_expression(*n.args[1], env));
    case Op::Max:
      return std::max(eval_expression(*n.args[0], env), eval_expression(*n.args[1], env));
    case Op::Ind: return eval_expression(*n.args[0], env) >= 0.0 ? 1.0 : 0.0;
    case Op::IntB: return env.aux->node(intb_key(n.value), env.path, env.node);
  }
  throw ConfigError("corrupt expression tree");
}

namespace {

class ExprGenerator : public Generator {
 public:
  explicit ExprGenerator(const ExprGeneratorSpec& spec) : spec_(spec) {
    if (spec.k < 1 || spec.k > 9) throw ConfigError("expression generator: k must be in 1..9");
    if (spec.driver.size() != static_cast<std::size_t>(spec.k)) {
      throw ConfigError("expression generator: need one driver expression per component");
    }
    for (const auto& s : spec.driver) driver_.push_back(parse_expression(s));
    if (spec.terminal.empty()) {
      terminal_.push_back(parse_expression("b1"));
    } else {
      if (spec.terminal.size() != static_cast<std::size_t>(spec.k)) {
        throw ConfigError("expression generator: need one terminal expression per component");
      }
      for (const auto& s : spec.terminal) terminal_.push_back(parse_expression(s));
    }
    for (const auto& [name, s] : spec.coefficients) {
      Coefficient c = coefficient_from_name(name);
      ExprPtr ast = parse_expression(s);
      for (const auto& v : expression_variables(ast)) {
        if (v == "y" || v == "z" || component_suffix(v, 'y') > 0) {
          throw ConfigError("coefficient " + name + " may not reference y or z");
        }
      }
      coeffs_[c] = ast;
    }
    for (const auto& ast : terminal_) {
      for (const auto& v : expression_variables(ast)) {
        if (v == "y" || v == "z" || component_suffix(v, 'y') > 0) {
          throw ConfigError("terminal expression may not reference y or z");
        }
      }
    }
    for (const auto& ast : driver_) {
      auto vars = expression_variables(ast);
      if (vars.count("z")) depends_on_z_ = true;
    }
    std::vector<ExprPtr> all;
    all.insert(all.end(), driver_.begin(), driver_.end());
    all.insert(all.end(), terminal_.begin(), terminal_.end());
    for (auto& [c, ast] : coeffs_) all.push_back(ast);
    for (const auto& ast : all) {
      for (double q : expression_intb_exponents(ast)) intb_qs_.insert(q);
    }
    if (spec_.assumptions.count("H6") || spec_.assumptions.count("H6'")) {
      if (!(spec_.l > 0.0 && spec_.l < 1.0)) {
        throw ConfigError("expression generator: H6 declared but l not in (0,1)");
      }
    }
    if (spec_.assumptions.count("H3") && !coeffs_.count(Coefficient::Alpha)) {
      throw ConfigError("expression generator: H3 declared but no alpha expression");
    }
  }

  static Coefficient coefficient_from_name(const std::string& name) {
    if (name == "mu") return Coefficient::Mu;
    if (name == "nu") return Coefficient::Nu;
    if (name == "gamma") return Coefficient::Gamma;
    if (name == "g1") return Coefficient::G1;
    if (name == "g2") return Coefficient::G2;
    if (name == "alpha") return Coefficient::Alpha;
    throw ConfigError("unknown coefficient name: " + name);
  }

  std::string name() const override { return spec_.name; }
  int k() const override { return spec_.k; }
  int required_d() const override { return spec_.d; }
  bool depends_on_z() const override { return depends_on_z_; }
  std::set<std::string> assumptions() const override { return spec_.assumptions; }
  double sublinear_l() const override { return spec_.l; }
  bool has_coefficient(Coefficient c) const override { return coeffs_.count(c) > 0; }

  double coefficient(Coefficient c, const NodeCtx& ctx) const override {
    auto it = coeffs_.find(c);
    if (it == coeffs_.end()) {
      throw ConfigError(spec_.name + ": coefficient " +
                        coefficient_name(c) + " not declared");
    }
    return eval_expression(*it->second, env_of(ctx));
  }

  void driver(const NodeCtx& ctx, std::span<const double> y,
              std::span<const double> z, std::span<double> out) const override {
    ExprEnv env = env_of(ctx);
    env.y = y;
    env.z_norm = frobenius(z);
    env.z_in_scope = true;
    for (int c = 0; c < spec_.k; ++c) out[c] = eval_expression(*driver_[c], env);
  }

  void terminal(const NodeCtx& at_tau, std::span<double> out) const override {
    ExprEnv env = env_of(at_tau);
    for (int c = 0; c < spec_.k; ++c) out[c] = eval_expression(*terminal_[c], env);
  }

  GeneratorAux prepare(const PathBundle& bundle) const override {
    GeneratorAux aux;
    aux.n_nodes = bundle.n_nodes();
    for (double q : intb_qs_) {
      std::vector<double> track(bundle.n_paths * bundle.n_nodes());
      for (std::size_t p = 0; p < bundle.n_paths; ++p) {
        double cum = 0.0;
        for (std::size_t i = 0; i < bundle.n_nodes(); ++i) {
          track[p * bundle.n_nodes() + i] = cum;
          if (i < bundle.grid.n_steps) {
            cum += std::pow(bundle.absb(p, i), q) * bundle.grid.step(i);
          }
        }
      }
      aux.node_tracks[intb_key(q)] = std::move(track);
    }
    return aux;
  }

 private:
  ExprEnv env_of(const NodeCtx& ctx) const {
    ExprEnv env;
    env.t = ctx.t();
    env.b = ctx.b();
    env.d = ctx.d();
    env.abs_b = ctx.abs_b();
    env.sup_abs_b = ctx.sup_abs_b();
    env.aux = ctx.aux;
    env.path = ctx.path;
    env.node = ctx.node;
    return env;
  }

  ExprGeneratorSpec spec_;
  std::vector<ExprPtr> driver_;
  std::vector<ExprPtr> terminal_;
  std::map<Coefficient, ExprPtr> coeffs_;
  std::set<double> intb_qs_;
  bool depends_on_z_ = false;
};

}  // namespace

std::shared_ptr<Generator> make_expr_generator(const ExprGeneratorSpec& spec) {
  return std::make_shared<ExprGenerator>(spec);
}

}  // namespace bsdelab
