#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "asyncsl/config.hpp"

namespace asyncsl {

// Arithmetic over the wrapped value domain. Trees are immutable and shared;
// equality is structural.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind : std::uint8_t { Const, Var, Add, Sub, Mul };
  Kind kind;
  int num = 0;  // Const: literal; Var: variable index
  ExprPtr lhs, rhs;
};

ExprPtr e_const(int v);
ExprPtr e_var(int var_index);
ExprPtr e_add(ExprPtr a, ExprPtr b);
ExprPtr e_sub(ExprPtr a, ExprPtr b);
ExprPtr e_mul(ExprPtr a, ExprPtr b);

bool expr_equal(const ExprPtr& a, const ExprPtr& b);
std::size_t expr_hash(const ExprPtr& e);
std::string expr_to_string(const Config& cfg, const ExprPtr& e);
std::uint64_t expr_vars(const ExprPtr& e);  // mask of variable indices

// Boolean conditions. Comparison and connectives are strict: any undefined
// subexpression makes the whole condition undefined.
struct BoolExpr;
using BoolPtr = std::shared_ptr<const BoolExpr>;

struct BoolExpr {
  enum class Kind : std::uint8_t { True, False, Eq, Lt, Not, And, Or };
  Kind kind;
  ExprPtr e1, e2;   // Eq, Lt
  BoolPtr b1, b2;   // Not (b1), And, Or
};

BoolPtr b_true();
BoolPtr b_false();
BoolPtr b_eq(ExprPtr a, ExprPtr b);
BoolPtr b_lt(ExprPtr a, ExprPtr b);
BoolPtr b_not(BoolPtr b);
BoolPtr b_and(BoolPtr a, BoolPtr b);
BoolPtr b_or(BoolPtr a, BoolPtr b);

bool bool_equal(const BoolPtr& a, const BoolPtr& b);
std::size_t bool_hash(const BoolPtr& b);
std::string bool_to_string(const Config& cfg, const BoolPtr& b);
std::uint64_t bool_vars(const BoolPtr& b);

// Evaluation against a stack valuation: stack[i] is the value index of
// variable i, or -1 when undefined. Values are wrapped at every node.
class StackView {
 public:
  StackView(const Config& cfg, const signed char* cells)
      : cfg_(&cfg), cells_(cells) {}
  std::optional<int> value_of(int var) const {
    signed char c = cells_[var];
    if (c < 0) return std::nullopt;
    return cfg_->values[static_cast<std::size_t>(c)];
  }
  const Config& cfg() const { return *cfg_; }

 private:
  const Config* cfg_;
  const signed char* cells_;
};

std::optional<int> eval_expr(const StackView& s, const ExprPtr& e);
std::optional<bool> eval_bool(const StackView& s, const BoolPtr& b);

}  // namespace asyncsl
