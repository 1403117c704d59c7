#include "asyncsl/expr.hpp"

namespace asyncsl {

namespace {
ExprPtr make_expr(Expr::Kind k, int num, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->num = num;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}
BoolPtr make_bool(BoolExpr::Kind k, ExprPtr e1, ExprPtr e2, BoolPtr b1,
                  BoolPtr b2) {
  auto b = std::make_shared<BoolExpr>();
  b->kind = k;
  b->e1 = std::move(e1);
  b->e2 = std::move(e2);
  b->b1 = std::move(b1);
  b->b2 = std::move(b2);
  return b;
}
}  // namespace

ExprPtr e_const(int v) { return make_expr(Expr::Kind::Const, v, nullptr, nullptr); }
ExprPtr e_var(int i) { return make_expr(Expr::Kind::Var, i, nullptr, nullptr); }
ExprPtr e_add(ExprPtr a, ExprPtr b) {
  return make_expr(Expr::Kind::Add, 0, std::move(a), std::move(b));
}
ExprPtr e_sub(ExprPtr a, ExprPtr b) {
  return make_expr(Expr::Kind::Sub, 0, std::move(a), std::move(b));
}
ExprPtr e_mul(ExprPtr a, ExprPtr b) {
  return make_expr(Expr::Kind::Mul, 0, std::move(a), std::move(b));
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->num != b->num) return false;
  return expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
}

std::size_t expr_hash(const ExprPtr& e) {
  if (!e) return 0x9e3779b9;
  std::size_t h = static_cast<std::size_t>(e->kind) * 31 +
                  static_cast<std::size_t>(e->num) * 131;
  h = h * 1000003 + expr_hash(e->lhs);
  h = h * 1000003 + expr_hash(e->rhs);
  return h;
}

std::string expr_to_string(const Config& cfg, const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::Const:
      return std::to_string(e->num);
    case Expr::Kind::Var:
      return cfg.vars[static_cast<std::size_t>(e->num)];
    case Expr::Kind::Add:
      return "(" + expr_to_string(cfg, e->lhs) + " + " +
             expr_to_string(cfg, e->rhs) + ")";
    case Expr::Kind::Sub:
      return "(" + expr_to_string(cfg, e->lhs) + " - " +
             expr_to_string(cfg, e->rhs) + ")";
    case Expr::Kind::Mul:
      return "(" + expr_to_string(cfg, e->lhs) + " * " +
             expr_to_string(cfg, e->rhs) + ")";
  }
  return "?";
}

std::uint64_t expr_vars(const ExprPtr& e) {
  if (!e) return 0;
  std::uint64_t m = 0;
  if (e->kind == Expr::Kind::Var) m |= 1ull << e->num;
  return m | expr_vars(e->lhs) | expr_vars(e->rhs);
}

BoolPtr b_true() { return make_bool(BoolExpr::Kind::True, nullptr, nullptr, nullptr, nullptr); }
BoolPtr b_false() { return make_bool(BoolExpr::Kind::False, nullptr, nullptr, nullptr, nullptr); }
BoolPtr b_eq(ExprPtr a, ExprPtr b) {
  return make_bool(BoolExpr::Kind::Eq, std::move(a), std::move(b), nullptr, nullptr);
}
BoolPtr b_lt(ExprPtr a, ExprPtr b) {
  return make_bool(BoolExpr::Kind::Lt, std::move(a), std::move(b), nullptr, nullptr);
}
BoolPtr b_not(BoolPtr b) {
  return make_bool(BoolExpr::Kind::Not, nullptr, nullptr, std::move(b), nullptr);
}
BoolPtr b_and(BoolPtr a, BoolPtr b) {
  return make_bool(BoolExpr::Kind::And, nullptr, nullptr, std::move(a), std::move(b));
}
BoolPtr b_or(BoolPtr a, BoolPtr b) {
  return make_bool(BoolExpr::Kind::Or, nullptr, nullptr, std::move(a), std::move(b));
}

bool bool_equal(const BoolPtr& a, const BoolPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  return expr_equal(a->e1, b->e1) && expr_equal(a->e2, b->e2) &&
         bool_equal(a->b1, b->b1) && bool_equal(a->b2, b->b2);
}

std::size_t bool_hash(const BoolPtr& b) {
  if (!b) return 0x517cc1b7;
  std::size_t h = static_cast<std::size_t>(b->kind) * 31;
  h = h * 1000003 + expr_hash(b->e1);
  h = h * 1000003 + expr_hash(b->e2);
  h = h * 1000003 + bool_hash(b->b1);
  h = h * 1000003 + bool_hash(b->b2);
  return h;
}

std::string bool_to_string(const Config& cfg, const BoolPtr& b) {
  switch (b->kind) {
    case BoolExpr::Kind::True:
      return "true";
    case BoolExpr::Kind::False:
      return "false";
    case BoolExpr::Kind::Eq:
      return expr_to_string(cfg, b->e1) + " == " + expr_to_string(cfg, b->e2);
    case BoolExpr::Kind::Lt:
      return expr_to_string(cfg, b->e1) + " < " + expr_to_string(cfg, b->e2);
    case BoolExpr::Kind::Not:
      return "!(" + bool_to_string(cfg, b->b1) + ")";
    case BoolExpr::Kind::And:
      return "(" + bool_to_string(cfg, b->b1) + " && " +
             bool_to_string(cfg, b->b2) + ")";
    case BoolExpr::Kind::Or:
      return "(" + bool_to_string(cfg, b->b1) + " || " +
             bool_to_string(cfg, b->b2) + ")";
  }
  return "?";
}

std::uint64_t bool_vars(const BoolPtr& b) {
  if (!b) return 0;
  return expr_vars(b->e1) | expr_vars(b->e2) | bool_vars(b->b1) |
         bool_vars(b->b2);
}

std::optional<int> eval_expr(const StackView& s, const ExprPtr& e) {
  const Config& cfg = s.cfg();
  switch (e->kind) {
    case Expr::Kind::Const:
      return cfg.wrap(e->num);
    case Expr::Kind::Var:
      return s.value_of(e->num);
    default:
      break;
  }
  auto a = eval_expr(s, e->lhs);
  auto b = eval_expr(s, e->rhs);
  if (!a || !b) return std::nullopt;
  long long l = *a, r = *b;
  switch (e->kind) {
    case Expr::Kind::Add:
      return cfg.wrap(l + r);
    case Expr::Kind::Sub:
      return cfg.wrap(l - r);
    case Expr::Kind::Mul:
      return cfg.wrap(l * r);
    default:
      return std::nullopt;
  }
}

std::optional<bool> eval_bool(const StackView& s, const BoolPtr& b) {
  switch (b->kind) {
    case BoolExpr::Kind::True:
      return true;
    case BoolExpr::Kind::False:
      return false;
    case BoolExpr::Kind::Eq:
    case BoolExpr::Kind::Lt: {
      auto l = eval_expr(s, b->e1);
      auto r = eval_expr(s, b->e2);
      if (!l || !r) return std::nullopt;
      return b->kind == BoolExpr::Kind::Eq ? *l == *r : *l < *r;
    }
    case BoolExpr::Kind::Not: {
      auto v = eval_bool(s, b->b1);
      if (!v) return std::nullopt;
      return !*v;
    }
    case BoolExpr::Kind::And:
    case BoolExpr::Kind::Or: {
      auto l = eval_bool(s, b->b1);
      auto r = eval_bool(s, b->b2);
      if (!l || !r) return std::nullopt;
      return b->kind == BoolExpr::Kind::And ? (*l && *r) : (*l || *r);
    }
  }
  return std::nullopt;
}

}  // namespace asyncsl
