#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "bsdelab/generator.hpp"

namespace bsdelab {

// Small arithmetic expression language for user-defined drivers and
// coefficient processes. Variables:
//   t            current time
//   y, y1..y9    solution components (driver only)
//   z            Frobenius norm of the z matrix (driver only)
//   b            |B_t|
//   b1..b9       Brownian components
//   supb         running sup of |B|
// Functions: sin, exp, abs, min, max, pow, ind (x >= 0 ? 1 : 0) and
// intb(q), the running left-rule integral of |B|^q (q a literal constant).
// Operators: + - * / ^ and parentheses.

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Op {
    Const, Var, Add, Sub, Mul, Div, Neg, Pow,
    Sin, Exp, Abs, Min, Max, Ind, IntB
  };
  Op op = Op::Const;
  double value = 0.0;     // Const, and the exponent q for IntB
  std::string var;        // Var
  std::vector<ExprPtr> args;
};

ExprPtr parse_expression(const std::string& text);

// Variables actually referenced by the expression.
std::set<std::string> expression_variables(const ExprPtr& ast);
// intb exponents referenced by the expression.
std::set<double> expression_intb_exponents(const ExprPtr& ast);

struct ExprEnv {
  double t = 0.0;
  const double* b = nullptr;
  int d = 0;
  double abs_b = 0.0;
  double sup_abs_b = 0.0;
  std::span<const double> y;  // empty when y is not in scope
  double z_norm = 0.0;
  bool z_in_scope = false;
  const GeneratorAux* aux = nullptr;
  std::size_t path = 0;
  std::size_t node = 0;
};

double eval_expression(const ExprNode& ast, const ExprEnv& env);

struct ExprGeneratorSpec {
  std::string name = "user";
  int k = 1;
  int d = 0;  // 0 = any
  std::vector<std::string> driver;    // k component expressions
  std::vector<std::string> terminal;  // k component expressions (no y, z)
  std::map<std::string, std::string> coefficients;  // mu, nu, gamma, g1, g2, alpha
  std::set<std::string> assumptions;
  double l = 0.0;
};

std::shared_ptr<Generator> make_expr_generator(const ExprGeneratorSpec& spec);

}  // namespace bsdelab
