#include "asyncsl/logic.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace asyncsl {

// ---------------------------------------------------------------------------
// Monoid instances.

FractionMonoid::FractionMonoid(int denom) : denom_(denom) {
  for (int k = 1; k <= denom_; ++k) carrier_.push_back(k);
}

std::optional<int> FractionMonoid::mul(int a, int b) const {
  if (a + b > denom_) return std::nullopt;
  return a + b;
}

std::string FractionMonoid::name(int p) const {
  if (p == denom_) return "1";
  int g = std::gcd(p, denom_);
  return std::to_string(p / g) + "/" + std::to_string(denom_ / g);
}

TokenMonoid::TokenMonoid(int tokens) : tokens_(tokens) {
  for (int s = 1; s < (1 << tokens_); ++s) carrier_.push_back(s);
}

std::optional<int> TokenMonoid::mul(int a, int b) const {
  if (a & b) return std::nullopt;
  return a | b;
}

std::string TokenMonoid::name(int p) const {
  std::string out = "{";
  bool first = true;
  for (int t = 0; t < tokens_; ++t) {
    if (!(p & (1 << t))) continue;
    if (!first) out += ",";
    first = false;
    out += std::to_string(t);
  }
  return out + "}";
}

std::vector<std::string> check_monoid_laws(const PermMonoid& m) {
  std::vector<std::string> problems;
  const auto& car = m.carrier();
  auto named = [&](int p) { return m.name(p); };

  for (int a : car)
    for (int b : car) {
      auto ab = m.mul(a, b);
      auto ba = m.mul(b, a);
      if (ab != ba)
        problems.push_back("product not commutative on " + named(a) + ", " +
                           named(b));
      if (ab && std::find(car.begin(), car.end(), *ab) == car.end())
        problems.push_back("product leaves the carrier on " + named(a) +
                           ", " + named(b));
    }
  for (int a : car)
    for (int b : car)
      for (int c : car) {
        auto ab = m.mul(a, b);
        auto bc = m.mul(b, c);
        auto left = ab ? m.mul(*ab, c) : std::nullopt;
        auto right = bc ? m.mul(a, *bc) : std::nullopt;
        if (left != right)
          problems.push_back("product not associative on " + named(a) + ", " +
                             named(b) + ", " + named(c));
      }
  for (int a : car)
    for (int b : car)
      for (int c : car) {
        auto ab = m.mul(a, b);
        auto ac = m.mul(a, c);
        if (ab && ac && *ab == *ac && b != c)
          problems.push_back("product not cancellative at " + named(a));
      }
  for (int a : car)
    if (m.mul(m.top(), a))
      problems.push_back("top admits a multiple by " + named(a));
  return problems;
}

// ---------------------------------------------------------------------------
// Logical states.

std::optional<LogState> sep(const Config& cfg, const PermMonoid& m,
                            const LogState& a, const LogState& b) {
  LogState out = LogState::blank(cfg);
  for (std::size_t c = 0; c < cfg.cell_count(); ++c) {
    if (a.present(c) && b.present(c)) {
      if (a.val[c] != b.val[c]) return std::nullopt;
      auto p = m.mul(a.perm[c], b.perm[c]);
      if (!p) return std::nullopt;
      out.val[c] = a.val[c];
      out.perm[c] = static_cast<signed char>(*p);
    } else if (a.present(c)) {
      out.val[c] = a.val[c];
      out.perm[c] = a.perm[c];
    } else if (b.present(c)) {
      out.val[c] = b.val[c];
      out.perm[c] = b.perm[c];
    }
  }
  return out;
}

Memory erase_permissions(const Config& cfg, const LogState& s) {
  (void)cfg;
  return Memory{s.val};
}

void for_each_log_state(const Config& cfg, const PermMonoid& m,
                        const std::function<void(const LogState&)>& fn) {
  const auto& car = m.carrier();
  std::size_t n = cfg.cell_count();
  std::size_t opts = 1 + cfg.values.size() * car.size();
  std::vector<std::size_t> choice(n, 0);
  LogState s = LogState::blank(cfg);
  while (true) {
    fn(s);
    std::size_t i = 0;
    for (; i < n; ++i) {
      if (++choice[i] < opts) break;
      choice[i] = 0;
    }
    if (i == n) return;
    for (std::size_t c = 0; c <= i; ++c) {
      if (choice[c] == 0) {
        s.val[c] = -1;
        s.perm[c] = -1;
      } else {
        std::size_t k = choice[c] - 1;
        s.val[c] = static_cast<signed char>(k / car.size());
        s.perm[c] = static_cast<signed char>(car[k % car.size()]);
      }
    }
  }
}

std::vector<std::string> check_sep_laws(const Config& cfg,
                                        const PermMonoid& m) {
  std::vector<LogState> all;
  for_each_log_state(cfg, m, [&](const LogState& s) { all.push_back(s); });
  std::vector<std::string> problems;
  if (all.size() > 1500) {
    problems.push_back("state space too large for the exhaustive law check");
    return problems;
  }

  LogState unit = LogState::blank(cfg);
  for (const LogState& a : all) {
    auto u = sep(cfg, m, a, unit);
    if (!u || !(*u == a)) problems.push_back("unit law fails");
  }
  for (const LogState& a : all)
    for (const LogState& b : all) {
      auto ab = sep(cfg, m, a, b);
      auto ba = sep(cfg, m, b, a);
      if (ab.has_value() != ba.has_value() || (ab && !(*ab == *ba)))
        problems.push_back("product not commutative");
    }
  for (std::size_t ia = 0; ia < all.size() && problems.size() < 5; ++ia)
    for (std::size_t ib = 0; ib < all.size(); ++ib) {
      auto ab = sep(cfg, m, all[ia], all[ib]);
      for (std::size_t ic = 0; ic < all.size(); ++ic) {
        auto bc = sep(cfg, m, all[ib], all[ic]);
        auto left = ab ? sep(cfg, m, *ab, all[ic]) : std::nullopt;
        auto right = bc ? sep(cfg, m, all[ia], *bc) : std::nullopt;
        if (left.has_value() != right.has_value() ||
            (left && !(*left == *right))) {
          problems.push_back("product not associative");
          break;
        }
        auto ac = sep(cfg, m, all[ia], all[ic]);
        if (ab && ac && *ab == *ac && !(all[ib] == all[ic]))
          problems.push_back("product not cancellative");
      }
    }
  return problems;
}

std::string log_to_string(const Config& cfg, const PermMonoid& m,
                          const LogState& s) {
  std::string out = "<";
  bool first = true;
  auto cell = [&](std::size_t c, const std::string& label) {
    if (!s.present(c)) return;
    if (!first) out += " ";
    first = false;
    out += label + "=" + std::to_string(cfg.values[s.val[c]]) + "@" +
           m.name(s.perm[c]);
  };
  for (std::size_t v = 0; v < cfg.vars.size(); ++v)
    cell(cfg.var_cell(v), cfg.vars[v]);
  for (std::size_t l = 0; l < cfg.locations.size(); ++l)
    cell(cfg.loc_cell(l), "[" + std::to_string(cfg.locations[l]) + "]");
  return out + ">";
}

// ---------------------------------------------------------------------------
// Formula constructors.

namespace {

FormulaPtr mk(Formula f) { return std::make_shared<Formula>(std::move(f)); }

}  // namespace

FormulaPtr f_emp() { return mk({Formula::Kind::Emp, {}, {}, {}, {}, -1, -1, -1}); }
FormulaPtr f_true() { return mk({Formula::Kind::True, {}, {}, {}, {}, -1, -1, -1}); }
FormulaPtr f_false() { return mk({Formula::Kind::False, {}, {}, {}, {}, -1, -1, -1}); }
FormulaPtr f_or(FormulaPtr a, FormulaPtr b) {
  return mk({Formula::Kind::Or, std::move(a), std::move(b), {}, {}, -1, -1, -1});
}
FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
  return mk({Formula::Kind::And, std::move(a), std::move(b), {}, {}, -1, -1, -1});
}
FormulaPtr f_not(FormulaPtr a) {
  return mk({Formula::Kind::Not, std::move(a), {}, {}, {}, -1, -1, -1});
}
FormulaPtr f_forall(int bound, FormulaPtr body) {
  return mk({Formula::Kind::Forall, std::move(body), {}, {}, {}, -1, -1, bound});
}
FormulaPtr f_exists(int bound, FormulaPtr body) {
  return mk({Formula::Kind::Exists, std::move(body), {}, {}, {}, -1, -1, bound});
}
FormulaPtr f_star(FormulaPtr a, FormulaPtr b) {
  return mk({Formula::Kind::Star, std::move(a), std::move(b), {}, {}, -1, -1, -1});
}
FormulaPtr f_points(ExprPtr addr, int perm, ExprPtr val) {
  return mk({Formula::Kind::PointsTo, {}, {}, std::move(addr), std::move(val),
             -1, perm, -1});
}
FormulaPtr f_own(int var, int perm) {
  return mk({Formula::Kind::Own, {}, {}, {}, {}, var, perm, -1});
}
FormulaPtr f_eq(ExprPtr a, ExprPtr b) {
  return mk({Formula::Kind::Eq, {}, {}, std::move(a), std::move(b), -1, -1, -1});
}

FormulaPtr bool_to_formula(const Config& cfg, const BoolPtr& b) {
  switch (b->kind) {
    case BoolExpr::Kind::True:
      return f_true();
    case BoolExpr::Kind::False:
      return f_false();
    case BoolExpr::Kind::Eq:
      return f_eq(b->e1, b->e2);
    case BoolExpr::Kind::Not:
      return f_not(bool_to_formula(cfg, b->b1));
    case BoolExpr::Kind::And:
      return f_and(bool_to_formula(cfg, b->b1), bool_to_formula(cfg, b->b2));
    case BoolExpr::Kind::Or:
      return f_or(bool_to_formula(cfg, b->b1), bool_to_formula(cfg, b->b2));
    case BoolExpr::Kind::Lt: {
      // Finite expansion. Constants denote by index, so the literal for the
      // value at index i is the constant i.
      FormulaPtr out = f_false();
      for (std::size_t i = 0; i < cfg.values.size(); ++i)
        for (std::size_t j = 0; j < cfg.values.size(); ++j)
          if (cfg.values[i] < cfg.values[j])
            out = f_or(std::move(out),
                       f_and(f_eq(b->e1, e_const(static_cast<int>(i))),
                             f_eq(b->e2, e_const(static_cast<int>(j)))));
      return out;
    }
  }
  return f_false();
}

namespace {

std::string lexpr(const Config& cfg, const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::Const:
      return std::to_string(e->num);
    case Expr::Kind::Var:
      if (e->num < static_cast<int>(cfg.vars.size()))
        return cfg.vars[static_cast<std::size_t>(e->num)];
      return "?" + std::to_string(e->num - static_cast<int>(cfg.vars.size()));
    case Expr::Kind::Add:
      return "(" + lexpr(cfg, e->lhs) + " + " + lexpr(cfg, e->rhs) + ")";
    case Expr::Kind::Sub:
      return "(" + lexpr(cfg, e->lhs) + " - " + lexpr(cfg, e->rhs) + ")";
    case Expr::Kind::Mul:
      return "(" + lexpr(cfg, e->lhs) + " * " + lexpr(cfg, e->rhs) + ")";
  }
  return "?";
}

}  // namespace

std::string formula_to_string(const Config& cfg, const PermMonoid& m,
                              const FormulaPtr& f) {
  auto rec = [&](const FormulaPtr& g) {
    return formula_to_string(cfg, m, g);
  };
  switch (f->kind) {
    case Formula::Kind::Emp:
      return "emp";
    case Formula::Kind::True:
      return "true";
    case Formula::Kind::False:
      return "false";
    case Formula::Kind::Or:
      return "(" + rec(f->f1) + " \\/ " + rec(f->f2) + ")";
    case Formula::Kind::And:
      return "(" + rec(f->f1) + " /\\ " + rec(f->f2) + ")";
    case Formula::Kind::Not:
      return "!(" + rec(f->f1) + ")";
    case Formula::Kind::Forall:
      return "(forall ?" +
             std::to_string(f->bound - static_cast<int>(cfg.vars.size())) +
             ". " + rec(f->f1) + ")";
    case Formula::Kind::Exists:
      return "(exists ?" +
             std::to_string(f->bound - static_cast<int>(cfg.vars.size())) +
             ". " + rec(f->f1) + ")";
    case Formula::Kind::Star:
      return "(" + rec(f->f1) + " * " + rec(f->f2) + ")";
    case Formula::Kind::PointsTo:
      return lexpr(cfg, f->e1) + " |->{" + m.name(f->perm) + "} " +
             lexpr(cfg, f->e2);
    case Formula::Kind::Own:
      return "own{" + m.name(f->perm) + "}(" +
             cfg.vars[static_cast<std::size_t>(f->var)] + ")";
    case Formula::Kind::Eq:
      return lexpr(cfg, f->e1) + " == " + lexpr(cfg, f->e2);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Satisfaction.

namespace {

class Satisfier {
 public:
  Satisfier(const Config& cfg, const PermMonoid& m) : cfg_(cfg), m_(m) {
    for (int a : m.carrier())
      for (int b : m.carrier()) {
        auto r = m.mul(a, b);
        if (r) splits_[*r].push_back({a, b});
      }
  }

  bool sat(const LogState& s, const FormulaPtr& f,
           std::vector<signed char>& env) {
    switch (f->kind) {
      case Formula::Kind::Emp: {
        for (std::size_t c = 0; c < cfg_.cell_count(); ++c)
          if (s.present(c)) return false;
        return true;
      }
      case Formula::Kind::True:
        return true;
      case Formula::Kind::False:
        return false;
      case Formula::Kind::Or:
        return sat(s, f->f1, env) || sat(s, f->f2, env);
      case Formula::Kind::And:
        return sat(s, f->f1, env) && sat(s, f->f2, env);
      case Formula::Kind::Not:
        return !sat(s, f->f1, env);
      case Formula::Kind::Forall:
      case Formula::Kind::Exists: {
        std::size_t slot =
            static_cast<std::size_t>(f->bound) - cfg_.vars.size();
        if (env.size() <= slot) env.resize(slot + 1, -1);
        signed char saved = env[slot];
        bool all = true, any = false;
        for (std::size_t i = 0; i < cfg_.values.size(); ++i) {
          env[slot] = static_cast<signed char>(i);
          bool r = sat(s, f->f1, env);
          all = all && r;
          any = any || r;
        }
        env[slot] = saved;
        return f->kind == Formula::Kind::Forall ? all : any;
      }
      case Formula::Kind::Star:
        return split_star(s, f->f1, f->f2, env);
      case Formula::Kind::PointsTo: {
        for (std::size_t v = 0; v < cfg_.vars.size(); ++v)
          if (s.present(cfg_.var_cell(v))) return false;
        auto a = eval(nullptr, env, f->e1);
        auto w = eval(nullptr, env, f->e2);
        if (!a || !w) return false;
        int li = cfg_.location_index(*a);
        if (li < 0) return false;
        std::size_t target = cfg_.loc_cell(static_cast<std::size_t>(li));
        for (std::size_t l = 0; l < cfg_.locations.size(); ++l) {
          std::size_t c = cfg_.loc_cell(l);
          if (c == target) {
            if (!s.present(c)) return false;
            if (s.val[c] != cfg_.value_index(*w)) return false;
            if (s.perm[c] != f->perm) return false;
          } else if (s.present(c)) {
            return false;
          }
        }
        return true;
      }
      case Formula::Kind::Own: {
        std::size_t target = cfg_.var_cell(static_cast<std::size_t>(f->var));
        for (std::size_t c = 0; c < cfg_.cell_count(); ++c) {
          if (c == target) {
            if (!s.present(c) || s.perm[c] != f->perm) return false;
          } else if (s.present(c)) {
            return false;
          }
        }
        return true;
      }
      case Formula::Kind::Eq: {
        auto a = eval(&s, env, f->e1);
        auto b = eval(&s, env, f->e2);
        return a && b && *a == *b;
      }
    }
    return false;
  }

  // Values of an expression over the logical stack (when visible) and the
  // quantifier environment.
  std::optional<int> eval(const LogState* stack,
                          const std::vector<signed char>& env,
                          const ExprPtr& e) {
    switch (e->kind) {
      case Expr::Kind::Const:
        return cfg_.wrap(e->num);
      case Expr::Kind::Var: {
        if (e->num < static_cast<int>(cfg_.vars.size())) {
          if (!stack) return std::nullopt;
          signed char v = stack->val[cfg_.var_cell(
              static_cast<std::size_t>(e->num))];
          if (v < 0) return std::nullopt;
          return cfg_.values[static_cast<std::size_t>(v)];
        }
        std::size_t slot =
            static_cast<std::size_t>(e->num) - cfg_.vars.size();
        if (slot >= env.size() || env[slot] < 0) return std::nullopt;
        return cfg_.values[static_cast<std::size_t>(env[slot])];
      }
      default:
        break;
    }
    auto a = eval(stack, env, e->lhs);
    auto b = eval(stack, env, e->rhs);
    if (!a || !b) return std::nullopt;
    long long l = *a, r = *b;
    switch (e->kind) {
      case Expr::Kind::Add:
        return cfg_.wrap(l + r);
      case Expr::Kind::Sub:
        return cfg_.wrap(l - r);
      case Expr::Kind::Mul:
        return cfg_.wrap(l * r);
      default:
        return std::nullopt;
    }
  }

 private:
  bool split_star(const LogState& s, const FormulaPtr& f1,
                  const FormulaPtr& f2, std::vector<signed char>& env) {
    std::vector<std::size_t> cells;
    for (std::size_t c = 0; c < cfg_.cell_count(); ++c)
      if (s.present(c)) cells.push_back(c);
    LogState s1 = LogState::blank(cfg_), s2 = LogState::blank(cfg_);

    std::function<bool(std::size_t)> rec = [&](std::size_t k) {
      if (k == cells.size())
        return sat(s1, f1, env) && sat(s2, f2, env);
      std::size_t c = cells[k];
      signed char v = s.val[c], p = s.perm[c];

      s1.val[c] = v;
      s1.perm[c] = p;
      if (rec(k + 1)) return true;
      s1.val[c] = -1;

      s2.val[c] = v;
      s2.perm[c] = p;
      if (rec(k + 1)) return true;

      s1.val[c] = v;
      auto it = splits_.find(p);
      if (it != splits_.end())
        for (auto& [p1, p2] : it->second) {
          s1.perm[c] = static_cast<signed char>(p1);
          s2.perm[c] = static_cast<signed char>(p2);
          if (rec(k + 1)) return true;
        }
      s1.val[c] = -1;
      s2.val[c] = -1;
      return false;
    };
    return rec(0);
  }

  const Config& cfg_;
  const PermMonoid& m_;
  std::unordered_map<int, std::vector<std::pair<int, int>>> splits_;
};

}  // namespace

bool satisfies(const Config& cfg, const PermMonoid& m, const LogState& s,
               const FormulaPtr& f) {
  Satisfier sf(cfg, m);
  std::vector<signed char> env;
  return sf.sat(s, f, env);
}

std::vector<LogState> sat_states(const Config& cfg, const PermMonoid& m,
                                 const FormulaPtr& f) {
  Satisfier sf(cfg, m);
  std::vector<LogState> out;
  for_each_log_state(cfg, m, [&](const LogState& s) {
    std::vector<signed char> env;
    LogState copy = s;
    if (sf.sat(copy, f, env)) out.push_back(copy);
  });
  return out;
}

bool check_implication(const Config& cfg, const PermMonoid& m,
                       const FormulaPtr& p, const FormulaPtr& q) {
  Satisfier sf(cfg, m);
  bool ok = true;
  for_each_log_state(cfg, m, [&](const LogState& s) {
    if (!ok) return;
    std::vector<signed char> env;
    LogState copy = s;
    if (sf.sat(copy, p, env) && !sf.sat(copy, q, env)) ok = false;
  });
  return ok;
}

bool implies_defined(const Config& cfg, const PermMonoid& m,
                     const FormulaPtr& p, std::uint64_t var_mask) {
  Satisfier sf(cfg, m);
  bool ok = true;
  for_each_log_state(cfg, m, [&](const LogState& s) {
    if (!ok) return;
    std::vector<signed char> env;
    LogState copy = s;
    if (!sf.sat(copy, p, env)) return;
    for (std::size_t v = 0; v < cfg.vars.size(); ++v)
      if ((var_mask & (1ull << v)) && !copy.present(cfg.var_cell(v)))
        ok = false;
  });
  return ok;
}

bool is_precise(const Config& cfg, const PermMonoid& m, const FormulaPtr& f) {
  std::vector<LogState> models = sat_states(cfg, m, f);

  // divides[q][p]: q is p or a proper factor of it.
  int top = 0;
  for (int p : m.carrier()) top = std::max(top, p);
  std::vector<std::vector<std::uint8_t>> divides(
      top + 1, std::vector<std::uint8_t>(top + 1, 0));
  for (int q : m.carrier()) {
    divides[q][q] = 1;
    for (int r : m.carrier()) {
      auto prod = m.mul(q, r);
      if (prod) divides[q][*prod] = 1;
    }
  }
  std::vector<std::vector<std::uint8_t>> joinable(
      top + 1, std::vector<std::uint8_t>(top + 1, 0));
  for (int a : m.carrier())
    for (int b : m.carrier())
      for (int p : m.carrier())
        if (divides[a][p] && divides[b][p]) {
          joinable[a][b] = 1;
          break;
        }

  // Two distinct models sitting below a common state break precision.
  auto compatible = [&](const LogState& a, const LogState& b) {
    for (std::size_t c = 0; c < cfg.cell_count(); ++c) {
      if (!a.present(c) || !b.present(c)) continue;
      if (a.val[c] != b.val[c]) return false;
      if (!joinable[a.perm[c]][b.perm[c]]) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = i + 1; j < models.size(); ++j)
      if (compatible(models[i], models[j])) return false;
  return true;
}

}  // namespace asyncsl
