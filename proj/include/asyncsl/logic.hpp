#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "asyncsl/config.hpp"
#include "asyncsl/expr.hpp"
#include "asyncsl/machine.hpp"

namespace asyncsl {

// ---------------------------------------------------------------------------
// Permissions: a partial commutative cancellative monoid whose top element
// admits no multiples. Elements are small positive ints owned by an
// instance; 0 and negatives never appear in a carrier.

class PermMonoid {
 public:
  virtual ~PermMonoid() = default;
  virtual const std::vector<int>& carrier() const = 0;
  virtual int top() const = 0;
  virtual std::optional<int> mul(int a, int b) const = 0;
  virtual std::string name(int p) const = 0;
};

// Fractions k/d for k = 1..d; the product is addition while it stays within
// one whole. Top is the whole.
class FractionMonoid final : public PermMonoid {
 public:
  explicit FractionMonoid(int denom);
  const std::vector<int>& carrier() const override { return carrier_; }
  int top() const override { return denom_; }
  std::optional<int> mul(int a, int b) const override;
  std::string name(int p) const override;

 private:
  int denom_;
  std::vector<int> carrier_;
};

// Nonempty subsets of a small token pool, merged by disjoint union; top is
// the full pool. A structurally different instance that keeps the
// permission plumbing honest about its interface.
class TokenMonoid final : public PermMonoid {
 public:
  explicit TokenMonoid(int tokens);
  const std::vector<int>& carrier() const override { return carrier_; }
  int top() const override { return (1 << tokens_) - 1; }
  std::optional<int> mul(int a, int b) const override;
  std::string name(int p) const override;

 private:
  int tokens_;
  std::vector<int> carrier_;
};

// Commutativity, associativity (including agreement of definedness),
// cancellativity, and top having no multiples. Empty result means lawful.
std::vector<std::string> check_monoid_laws(const PermMonoid& m);

// ---------------------------------------------------------------------------
// Logical states: the machine memory layout with ownership added. val[c] is
// the value index or -1 for an absent cell; perm[c] is the monoid element
// and is meaningful only where the cell is present.

struct LogState {
  std::vector<signed char> val, perm;

  static LogState blank(const Config& cfg) {
    return LogState{
        std::vector<signed char>(cfg.cell_count(), -1),
        std::vector<signed char>(cfg.cell_count(), -1)};
  }
  bool present(std::size_t c) const { return val[c] >= 0; }
  bool operator==(const LogState& o) const {
    if (val != o.val) return false;
    for (std::size_t c = 0; c < val.size(); ++c)
      if (val[c] >= 0 && perm[c] != o.perm[c]) return false;
    return true;
  }
};

struct LogStateHash {
  std::size_t operator()(const LogState& s) const {
    std::size_t h = 0x9e3779b9;
    for (std::size_t c = 0; c < s.val.size(); ++c) {
      h = h * 1000003 + static_cast<std::size_t>(s.val[c] + 2);
      h = h * 1000003 +
          static_cast<std::size_t>(s.val[c] >= 0 ? s.perm[c] + 2 : 0);
    }
    return h;
  }
};

// Pointwise merge: disjoint cells pass through, shared cells must agree on
// the value and compose their permissions.
std::optional<LogState> sep(const Config& cfg, const PermMonoid& m,
                            const LogState& a, const LogState& b);

// Drop the ownership annotations.
Memory erase_permissions(const Config& cfg, const LogState& s);

// Every assignment of absent / (value, permission) to every cell.
void for_each_log_state(const Config& cfg, const PermMonoid& m,
                        const std::function<void(const LogState&)>& fn);

// Exhaustive law check for the separation product over a (small) config:
// commutativity, associativity with definedness, cancellativity, unit.
std::vector<std::string> check_sep_laws(const Config& cfg,
                                        const PermMonoid& m);

std::string log_to_string(const Config& cfg, const PermMonoid& m,
                          const LogState& s);

// ---------------------------------------------------------------------------
// Formulas. Expressions reuse the arithmetic AST; variable indexes at or
// past cfg.vars.size() denote quantifier-bound value variables.

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind : std::uint8_t {
    Emp,
    True,
    False,
    Or,
    And,
    Not,
    Forall,
    Exists,
    Star,
    PointsTo,  // e1 |->{perm} e2
    Own,       // own{perm}(var)
    Eq,        // e1 == e2
  };
  Kind kind;
  FormulaPtr f1, f2;  // Or/And/Star both, Not/Forall/Exists f1
  ExprPtr e1, e2;     // PointsTo, Eq
  int var = -1;       // Own: program variable index
  int perm = -1;      // PointsTo, Own: monoid element
  int bound = -1;     // Forall/Exists: bound variable index (>= vars.size())
};

FormulaPtr f_emp();
FormulaPtr f_true();
FormulaPtr f_false();
FormulaPtr f_or(FormulaPtr a, FormulaPtr b);
FormulaPtr f_and(FormulaPtr a, FormulaPtr b);
FormulaPtr f_not(FormulaPtr a);
FormulaPtr f_forall(int bound, FormulaPtr body);
FormulaPtr f_exists(int bound, FormulaPtr body);
FormulaPtr f_star(FormulaPtr a, FormulaPtr b);
FormulaPtr f_points(ExprPtr addr, int perm, ExprPtr val);
FormulaPtr f_own(int var, int perm);
FormulaPtr f_eq(ExprPtr a, ExprPtr b);

// First bound-variable index after the program variables.
inline int logic_var(const Config& cfg, int k) {
  return static_cast<int>(cfg.vars.size()) + k;
}

// Guards of conditionals as formulas. Comparisons become the equality
// clause; an order test unfolds into the finite disjunction of its
// satisfying value pairs.
FormulaPtr bool_to_formula(const Config& cfg, const BoolPtr& b);

std::string formula_to_string(const Config& cfg, const PermMonoid& m,
                              const FormulaPtr& f);

// ---------------------------------------------------------------------------
// Satisfaction and derived checks. All of them enumerate over the finite
// domains, which is the point of the workbench; they are sized for desk
// scale configs.

bool satisfies(const Config& cfg, const PermMonoid& m, const LogState& s,
               const FormulaPtr& f);

std::vector<LogState> sat_states(const Config& cfg, const PermMonoid& m,
                                 const FormulaPtr& f);

// Every model of p is a model of q.
bool check_implication(const Config& cfg, const PermMonoid& m,
                       const FormulaPtr& p, const FormulaPtr& q);

// Every model of p has the masked variables present in its stack; the side
// condition written "P implies def(B)" on conditional rules.
bool implies_defined(const Config& cfg, const PermMonoid& m,
                     const FormulaPtr& p, std::uint64_t var_mask);

// At most one substate of any logical state satisfies the formula.
bool is_precise(const Config& cfg, const PermMonoid& m, const FormulaPtr& f);

// Lock invariants, indexed by lock; null where the context is silent.
struct Context {
  std::vector<FormulaPtr> inv;

  static Context empty(const Config& cfg) {
    return Context{std::vector<FormulaPtr>(cfg.locks.size())};
  }
  bool has(int r) const { return inv[r] != nullptr; }
};

}  // namespace asyncsl
