#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "asyncsl/logic.hpp"

using namespace asyncsl;

namespace {

// Two cells only (variable x and address 0), so exhaustive enumerations
// stay countable by hand: 81 logical states with quarter fractions.
Config law_config() {
  Config cfg;
  cfg.vars = {"x"};
  cfg.values = {0, 1};
  cfg.locations = {0};
  cfg.locks = {"r"};
  validate(cfg);
  return cfg;
}

LogState state_of(const Config& cfg,
                  std::vector<std::pair<int, int>> cells) {
  LogState s = LogState::blank(cfg);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    s.val[c] = static_cast<signed char>(cells[c].first);
    s.perm[c] = static_cast<signed char>(cells[c].second);
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Permission monoids.

TEST_CASE("fraction arithmetic") {
  FractionMonoid m(4);
  CHECK(m.top() == 4);
  CHECK(m.carrier().size() == 4);
  CHECK(m.mul(2, 2) == 4);  // two halves make a whole
  CHECK(m.mul(1, 2) == 3);
  CHECK_FALSE(m.mul(3, 2).has_value());
  for (int p : m.carrier()) CHECK_FALSE(m.mul(m.top(), p).has_value());
  CHECK(m.name(4) == "1");
  CHECK(m.name(1) == "1/4");
  CHECK(check_monoid_laws(m).empty());
  CHECK(check_monoid_laws(FractionMonoid(1)).empty());
}

TEST_CASE("token pools compose by disjoint union") {
  TokenMonoid m(3);
  CHECK(m.top() == 0b111);
  CHECK(m.carrier().size() == 7);
  CHECK(m.mul(0b001, 0b010) == 0b011);
  CHECK_FALSE(m.mul(0b011, 0b001).has_value());
  for (int p : m.carrier()) CHECK_FALSE(m.mul(m.top(), p).has_value());
  CHECK(m.name(0b101) == "{0,2}");
  CHECK(check_monoid_laws(m).empty());
}

// ---------------------------------------------------------------------------
// Separation product.

TEST_CASE("separation product merges agreeing cells") {
  Config cfg = law_config();
  FractionMonoid m(4);

  LogState a = state_of(cfg, {{1, 2}});  // x = 1 at one half
  LogState b = state_of(cfg, {{1, 2}});
  auto ab = sep(cfg, m, a, b);
  REQUIRE(ab.has_value());
  CHECK(*ab == state_of(cfg, {{1, 4}}));

  SUBCASE("value disagreement") {
    LogState c = state_of(cfg, {{0, 2}});
    CHECK_FALSE(sep(cfg, m, a, c).has_value());
  }
  SUBCASE("permission overflow") {
    LogState c = state_of(cfg, {{1, 3}});
    CHECK_FALSE(sep(cfg, m, a, c).has_value());
  }
  SUBCASE("disjoint cells pass through") {
    LogState h = state_of(cfg, {{-1, -1}, {0, 4}});
    auto r = sep(cfg, m, a, h);
    REQUIRE(r.has_value());
    CHECK(r->val[0] == 1);
    CHECK(r->val[1] == 0);
    CHECK(r->perm[1] == 4);
  }
  SUBCASE("blank is the unit") {
    auto r = sep(cfg, m, a, LogState::blank(cfg));
    REQUIRE(r.has_value());
    CHECK(*r == a);
  }
}

TEST_CASE("separation product laws by enumeration") {
  Config cfg = law_config();
  CHECK(check_sep_laws(cfg, FractionMonoid(4)).empty());
  CHECK(check_sep_laws(cfg, TokenMonoid(2)).empty());
}

TEST_CASE("ownership erasure keeps the values") {
  Config cfg = law_config();
  LogState s = state_of(cfg, {{1, 2}, {0, 4}});
  Memory mem = erase_permissions(cfg, s);
  CHECK(mem.cells == std::vector<signed char>{1, 0});
  CHECK(erase_permissions(cfg, LogState::blank(cfg)).cells ==
        std::vector<signed char>{-1, -1});
}

TEST_CASE("logical state enumeration count") {
  Config cfg = law_config();
  FractionMonoid m(4);
  std::size_t count = 0;
  for_each_log_state(cfg, m, [&](const LogState&) { ++count; });
  CHECK(count == 81);  // (1 + 2 values x 4 permissions)^2
}

// ---------------------------------------------------------------------------
// Satisfaction.

TEST_CASE("core satisfaction clauses") {
  Config cfg = law_config();
  FractionMonoid m(4);
  auto sat = [&](const LogState& s, const FormulaPtr& f) {
    return satisfies(cfg, m, s, f);
  };
  LogState blank = LogState::blank(cfg);
  LogState own_x = state_of(cfg, {{1, 4}});
  LogState heap1 = state_of(cfg, {{-1, -1}, {1, 2}});

  SUBCASE("emp is the empty state only") {
    CHECK(sat(blank, f_emp()));
    CHECK_FALSE(sat(own_x, f_emp()));
  }
  SUBCASE("ownership is exact") {
    CHECK(sat(own_x, f_own(0, 4)));
    CHECK_FALSE(sat(own_x, f_own(0, 2)));          // permission differs
    CHECK_FALSE(sat(blank, f_own(0, 4)));
    LogState with_heap = state_of(cfg, {{1, 4}, {0, 4}});
    CHECK_FALSE(sat(with_heap, f_own(0, 4)));      // heap must be empty
  }
  SUBCASE("points-to is exact and stackless") {
    CHECK(sat(heap1, f_points(e_const(0), 2, e_const(1))));
    CHECK_FALSE(sat(heap1, f_points(e_const(0), 4, e_const(1))));
    CHECK_FALSE(sat(heap1, f_points(e_const(0), 2, e_const(0))));
    LogState with_stack = state_of(cfg, {{0, 1}, {1, 2}});
    CHECK_FALSE(sat(with_stack, f_points(e_const(0), 2, e_const(1))));
    // Address outside the location domain.
    CHECK_FALSE(sat(heap1, f_points(e_const(1), 2, e_const(1))));
  }
  SUBCASE("equality needs the variables but tolerates the rest") {
    CHECK(sat(own_x, f_eq(e_var(0), e_const(1))));
    LogState both = state_of(cfg, {{1, 1}, {0, 4}});
    CHECK(sat(both, f_eq(e_var(0), e_const(1))));  // heap unconstrained
    CHECK_FALSE(sat(blank, f_eq(e_var(0), e_var(0))));  // x undefined
    CHECK(sat(blank, f_eq(e_const(1), e_const(1))));
  }
  SUBCASE("connectives") {
    CHECK(sat(blank, f_or(f_emp(), f_false())));
    CHECK_FALSE(sat(blank, f_and(f_emp(), f_false())));
    CHECK(sat(own_x, f_not(f_emp())));
    CHECK(sat(blank, f_true()));
  }
}

TEST_CASE("star splits ownership") {
  Config cfg = law_config();
  FractionMonoid m(4);
  auto sat = [&](const LogState& s, const FormulaPtr& f) {
    return satisfies(cfg, m, s, f);
  };
  LogState own_x = state_of(cfg, {{1, 4}});
  LogState half_x = state_of(cfg, {{1, 2}});

  CHECK(sat(own_x, f_star(f_own(0, 4), f_emp())));
  CHECK(sat(own_x, f_star(f_own(0, 2), f_own(0, 2))));
  CHECK(sat(half_x, f_star(f_own(0, 1), f_own(0, 1))));
  CHECK_FALSE(sat(half_x, f_star(f_own(0, 2), f_own(0, 2))));
  CHECK_FALSE(sat(own_x, f_star(f_own(0, 4), f_own(0, 4))));

  LogState both = state_of(cfg, {{1, 4}, {0, 4}});
  CHECK(sat(both, f_star(f_own(0, 4), f_points(e_const(0), 4, e_const(0)))));
  CHECK(sat(both, f_and(f_star(f_own(0, 4), f_true()),
                        f_eq(e_var(0), e_const(1)))));
}

TEST_CASE("quantifiers range over the value domain") {
  Config cfg = law_config();
  FractionMonoid m(4);
  int w = logic_var(cfg, 0);
  auto heap = [&](int v) {
    return state_of(cfg, {{-1, -1}, {v, 4}});
  };

  FormulaPtr any_cell = f_exists(w, f_points(e_const(0), 4, e_var(w)));
  CHECK(satisfies(cfg, m, heap(0), any_cell));
  CHECK(satisfies(cfg, m, heap(1), any_cell));
  CHECK_FALSE(satisfies(cfg, m, LogState::blank(cfg), any_cell));

  CHECK(satisfies(cfg, m, LogState::blank(cfg),
                  f_forall(w, f_eq(e_var(w), e_var(w)))));
  CHECK_FALSE(satisfies(cfg, m, LogState::blank(cfg),
                        f_forall(w, f_eq(e_var(w), e_const(0)))));
}

TEST_CASE("guard conversion stays in the formula grammar") {
  Config cfg = law_config();
  FractionMonoid m(4);
  LogState x0 = state_of(cfg, {{0, 4}});
  LogState x1 = state_of(cfg, {{1, 4}});

  FormulaPtr lt = bool_to_formula(cfg, b_lt(e_var(0), e_const(1)));
  CHECK(satisfies(cfg, m, x0, lt));
  CHECK_FALSE(satisfies(cfg, m, x1, lt));
  CHECK_FALSE(satisfies(cfg, m, LogState::blank(cfg), lt));

  FormulaPtr eq = bool_to_formula(cfg, b_not(b_eq(e_var(0), e_const(0))));
  CHECK(satisfies(cfg, m, x1, eq));
  CHECK_FALSE(satisfies(cfg, m, x0, eq));
}

TEST_CASE("model enumeration counts") {
  Config cfg = law_config();
  FractionMonoid m(4);
  int w = logic_var(cfg, 0);

  CHECK(sat_states(cfg, m, f_emp()).size() == 1);
  CHECK(sat_states(cfg, m, f_own(0, 4)).size() == 2);
  CHECK(sat_states(cfg, m, f_exists(w, f_points(e_const(0), 4, e_var(w))))
            .size() == 2);
  // x = 0 pins the variable cell value, leaves its permission and the whole
  // heap cell free: 4 x 9.
  CHECK(sat_states(cfg, m, f_eq(e_var(0), e_const(0))).size() == 36);
  CHECK(sat_states(cfg, m, f_true()).size() == 81);
  // A points-to whose address mentions a program variable can never be
  // satisfied: its own stack is required to be empty.
  CHECK(sat_states(cfg, m, f_points(e_var(0), 4, e_const(0))).empty());
}

// ---------------------------------------------------------------------------
// Implication and precision.

TEST_CASE("implication by enumeration") {
  Config cfg = law_config();
  FractionMonoid m(4);
  CHECK(check_implication(cfg, m, f_and(f_own(0, 4), f_eq(e_var(0), e_const(0))),
                          f_own(0, 4)));
  CHECK_FALSE(check_implication(cfg, m, f_own(0, 4),
                                f_eq(e_var(0), e_const(0))));
  CHECK(check_implication(cfg, m, f_false(), f_emp()));
  CHECK(check_implication(cfg, m, f_star(f_own(0, 2), f_own(0, 2)),
                          f_own(0, 4)));
}

TEST_CASE("definedness side condition") {
  Config cfg = law_config();
  FractionMonoid m(4);
  CHECK(implies_defined(cfg, m, f_own(0, 4), 0b1));
  CHECK(implies_defined(cfg, m, f_eq(e_var(0), e_const(0)), 0b1));
  CHECK_FALSE(implies_defined(cfg, m, f_emp(), 0b1));
  CHECK(implies_defined(cfg, m, f_emp(), 0));
}

TEST_CASE("precision") {
  Config cfg = law_config();
  FractionMonoid m(4);
  int w = logic_var(cfg, 0);

  CHECK(is_precise(cfg, m, f_emp()));
  CHECK(is_precise(cfg, m, f_points(e_const(0), 4, e_const(1))));
  CHECK(is_precise(cfg, m, f_own(0, 4)));
  CHECK(is_precise(cfg, m, f_own(0, 2)));
  CHECK(is_precise(cfg, m, f_exists(w, f_points(e_const(0), 4, e_var(w)))));
  CHECK_FALSE(is_precise(cfg, m, f_true()));
  // Either branch embeds into a state that also fits the other.
  CHECK_FALSE(is_precise(cfg, m, f_or(f_emp(), f_own(0, 4))));
  CHECK_FALSE(is_precise(cfg, m, f_eq(e_var(0), e_const(0))));
}

TEST_CASE("rendering") {
  Config cfg = law_config();
  FractionMonoid m(4);
  int w = logic_var(cfg, 0);
  CHECK(formula_to_string(cfg, m, f_own(0, 4)) == "own{1}(x)");
  CHECK(formula_to_string(cfg, m,
                          f_exists(w, f_points(e_const(0), 2, e_var(w)))) ==
        "(exists ?0. 0 |->{1/2} ?0)");
  CHECK(formula_to_string(cfg, m, f_star(f_emp(), f_true())) ==
        "(emp * true)");
  LogState s = state_of(cfg, {{1, 2}, {0, 4}});
  CHECK(log_to_string(cfg, m, s) == "<x=1@1/2 [0]=0@1>");
}
