#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "asyncsl/codesem.hpp"

using namespace asyncsl;

namespace {

// One variable, booleans, one heap address, one lock. Cell 0 is x, cell 1
// the address. Small enough to count code steps by hand.
Config one_var_config() {
  Config cfg;
  cfg.vars = {"x"};
  cfg.values = {0, 1};
  cfg.locations = {0};
  cfg.locks = {"r"};
  validate(cfg);
  return cfg;
}

MachineState st(const Config& cfg, std::vector<int> cells,
                std::uint32_t locks = 0) {
  MachineState s;
  s.mem = Memory::blank(cfg);
  for (std::size_t i = 0; i < cells.size(); ++i)
    s.mem.cells[i] = static_cast<signed char>(cells[i]);
  s.locks = locks;
  return s;
}

// Builds the paired semantics of one program over its own alphabet.
struct Prog {
  Config cfg = one_var_config();
  InstrTable instrs;
  CodePtr code;
  ModelSpace ms;
  CodeSem k;

  explicit Prog(CodePtr c, SemOptions opt = {})
      : code(std::move(c)),
        ms(cfg, instrs, program_alphabet(cfg, instrs, code)),
        k(sem_code(ms, code, 0xffffffffu, opt)) {}
};

std::size_t count_code(const Ats& t) {
  std::size_t n = 0;
  for (EdgeId e = 0; e < t.g.edge_count(); ++e)
    if (t.g.edge(e).pol == Polarity::Code) ++n;
  return n;
}

NodeId initial_with_image(const Ats& t, NodeId image) {
  for (NodeId x : t.initial)
    if (t.image(x) == image) return x;
  return kNoNode;
}

std::vector<EdgeId> code_out(const Ats& t, NodeId x) {
  std::vector<EdgeId> out;
  for (EdgeId e : t.g.out(x))
    if (t.g.edge(e).pol == Polarity::Code) out.push_back(e);
  return out;
}

// Images of the returning nodes an execution can reach: follow Code only,
// the environment does not move in a closed run.
std::set<NodeId> final_images(const Ats& t, NodeId start) {
  REQUIRE(start != kNoNode);
  std::vector<std::uint8_t> seen(t.g.node_count(), 0);
  std::vector<NodeId> stack{start};
  seen[start] = 1;
  std::set<NodeId> out;
  while (!stack.empty()) {
    NodeId x = stack.back();
    stack.pop_back();
    if (t.returning[x]) out.insert(t.image(x));
    for (EdgeId e : t.g.out(x)) {
      if (t.g.edge(e).pol != Polarity::Code) continue;
      NodeId y = t.g.edge(e).dst;
      if (!seen[y]) {
        seen[y] = 1;
        stack.push_back(y);
      }
    }
  }
  return out;
}

// Straight-line reference run: one thread, deterministic steps.
std::set<NodeId> oracle_finals(const Config& cfg,
                               const StatefulModel& sm,
                               const std::vector<Instr>& prog,
                               MachineState s) {
  for (const Instr& i : prog) {
    StepResult r = step(cfg, s, i);
    if (r.cls == StepClass::Fault) return {sm.crash};
    if (r.cls == StepClass::Blocked) return {};
    s = r.next;
  }
  return {sm.node_of(s)};
}

void check_valid(ModelSpace& ms, const CodeSem& k) {
  AtsReport rs = validate_ats(k.s);
  CAPTURE(rs.problems);
  CHECK(rs.ok());
  AtsReport rl = validate_ats(k.l);
  CAPTURE(rl.problems);
  CHECK(rl.ok());
  auto proj = check_code_sem(ms, k);
  CAPTURE(proj);
  CHECK(proj.empty());
}

}  // namespace

TEST_CASE("scope checking of programs") {
  Config cfg = one_var_config();
  CodePtr ok = c_resource(0, c_with(0, b_true(), c_assign(0, e_const(1))));
  CHECK(check_code(cfg, ok).empty());

  CodePtr unbound = c_with(0, b_true(), c_skip());
  CHECK_FALSE(check_code(cfg, unbound).empty());
  // The same section is fine once the frontier declares the lock.
  CHECK(check_code(cfg, unbound, 1u).empty());

  CodePtr twice = c_resource(0, c_resource(0, c_skip()));
  CHECK_FALSE(check_code(cfg, twice).empty());

  // Inside a section the lock is already held and cannot be taken again.
  CodePtr nested =
      c_resource(0, c_with(0, b_true(), c_with(0, b_true(), c_skip())));
  CHECK_FALSE(check_code(cfg, nested).empty());

  CHECK(free_locks(ok) == 0);
  CHECK(bound_locks(ok) == 1);
  CHECK(free_locks(unbound) == 1);
}

TEST_CASE("program alphabets collect leaf instructions and guard probes") {
  Config cfg = one_var_config();
  InstrTable instrs;
  CodePtr c = c_seq(c_if(b_eq(e_var(0), e_const(0)), c_malloc(0, e_const(1)),
                         c_skip()),
                    c_assign(0, e_var(0)));
  std::vector<Label> base = standard_alphabet(cfg, instrs);
  std::vector<Label> alpha = program_alphabet(cfg, instrs, c);
  CHECK(alpha.size() > base.size());

  Instr probe;
  probe.kind = Instr::Kind::Test;
  probe.b = b_eq(e_var(0), e_const(0));
  Label probe_label = instrs.intern(probe);
  CHECK(std::count(alpha.begin(), alpha.end(), probe_label) == 1);

  // One pinned allocation per heap location.
  Instr alloc;
  alloc.kind = Instr::Kind::Alloc;
  alloc.var = 0;
  alloc.e1 = e_const(1);
  alloc.loc = 0;
  CHECK(std::count(alpha.begin(), alpha.end(), instrs.intern(alloc)) == 1);

  // Repeats of the same leaf do not duplicate labels. The right hand side
  // has to be compound: constant-form assignments are standard already.
  CodePtr twice = c_seq(c_assign(0, e_add(e_var(0), e_const(1))),
                        c_assign(0, e_add(e_var(0), e_const(1))));
  InstrTable fresh;
  std::vector<Label> a2 = program_alphabet(cfg, fresh, twice);
  CHECK(a2.size() == standard_alphabet(cfg, fresh).size() + 1);
}

TEST_CASE("the skip fragment is two model copies joined by no-op steps") {
  Prog p(c_skip());
  const StatefulModel& sm = p.ms.stateful(p.ms.full_mask());
  const LockModel& lm = p.ms.lock_level(p.ms.full_mask());

  // 9 memories times 2 locksets plus the crash state, twice.
  CHECK(sm.g.node_count() == 19);
  CHECK(p.k.s.g.node_count() == 38);
  CHECK(p.k.s.initial.size() == 19);
  CHECK(count_code(p.k.s) == 18);  // one no-op per running state
  for (EdgeId e = 0; e < p.k.s.g.edge_count(); ++e) {
    const Edge& ed = p.k.s.g.edge(e);
    if (ed.pol != Polarity::Code) continue;
    CHECK(p.k.s.image(ed.src) == p.k.s.image(ed.dst));
    CHECK_FALSE(p.k.s.returning[ed.src]);
    CHECK(p.k.s.returning[ed.dst]);
  }

  // Two locksets plus crash downstairs; the shadow keeps a crashing
  // variant of the silent step at each lockset.
  CHECK(lm.g.node_count() == 3);
  CHECK(p.k.l.g.node_count() == 6);
  CHECK(count_code(p.k.l) == 4);

  check_valid(p.ms, p.k);
  CHECK_FALSE(p.k.truncated);
}

TEST_CASE("an undefined right-hand side crashes the assignment") {
  Prog p(c_assign(0, e_var(0)));  // x := x faults only when x is undefined
  const StatefulModel& sm = p.ms.stateful(p.ms.full_mask());

  std::size_t to_crash = 0;
  for (EdgeId e = 0; e < p.k.s.g.edge_count(); ++e) {
    const Edge& ed = p.k.s.g.edge(e);
    if (ed.pol != Polarity::Code) continue;
    if (p.k.s.image(ed.dst) == sm.crash) ++to_crash;
  }
  CHECK(count_code(p.k.s) == 18);
  CHECK(to_crash == 6);  // 3 heap contents times 2 locksets

  NodeId bad = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {-1, 0})));
  auto out = code_out(p.k.s, bad);
  REQUIRE(out.size() == 1);
  CHECK(p.k.s.image(p.k.s.g.edge(out[0]).dst) == sm.crash);

  check_valid(p.ms, p.k);
}

TEST_CASE("an acquire step and its lock-level shadow") {
  Config cfg = one_var_config();
  InstrTable instrs;
  ModelSpace ms(cfg, instrs, standard_alphabet(cfg, instrs));
  Instr p;
  p.kind = Instr::Kind::Lock;
  p.lock = 0;
  CodeSem k = sem_instr(ms, p, ms.full_mask());
  const LockModel& lm = ms.lock_level(ms.full_mask());

  CHECK(count_code(k.s) == 9);  // once per memory, from the free lockset
  CHECK(count_code(k.l) == 3);  // the acquire plus its two crashing variants

  // Holding the lock already, the only way to step is to crash.
  NodeId held = initial_with_image(k.l, lm.node_of_lockset(1u));
  auto out = code_out(k.l, held);
  REQUIRE(out.size() == 1);
  CHECK(k.l.image(k.l.g.edge(out[0]).dst) == lm.crash);

  check_valid(ms, k);
}

TEST_CASE("sequential runs agree with a direct interpreter") {
  Prog p(c_seq(c_assign(0, e_const(1)), c_store(e_const(0), e_var(0))));
  const StatefulModel& sm = p.ms.stateful(p.ms.full_mask());

  Instr a1;
  a1.kind = Instr::Kind::Assign;
  a1.var = 0;
  a1.e1 = e_const(1);
  Instr a2;
  a2.kind = Instr::Kind::Store;
  a2.e1 = e_const(0);
  a2.e2 = e_var(0);
  std::vector<Instr> listing{a1, a2};

  for (auto cells : {std::vector<int>{0, 0}, std::vector<int>{0, -1},
                     std::vector<int>{-1, 1}}) {
    MachineState s0 = st(p.cfg, cells);
    NodeId start = initial_with_image(p.k.s, sm.node_of(s0));
    CHECK(final_images(p.k.s, start) ==
          oracle_finals(p.cfg, sm, listing, s0));
  }
  check_valid(p.ms, p.k);
}

TEST_CASE("conditionals take decided branches and abort undecided ones") {
  Prog p(c_if(b_eq(e_var(0), e_const(0)), c_assign(0, e_const(1)), c_skip()));
  const StatefulModel& sm = p.ms.stateful(p.ms.full_mask());

  NodeId zero = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {0, 0})));
  CHECK(final_images(p.k.s, zero) ==
        std::set<NodeId>{sm.node_of(st(p.cfg, {1, 0}))});

  NodeId one = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {1, 0})));
  CHECK(final_images(p.k.s, one) ==
        std::set<NodeId>{sm.node_of(st(p.cfg, {1, 0}))});

  // An undefined guard is a memory fault, not a silent skip.
  NodeId undef = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {-1, 0})));
  CHECK(final_images(p.k.s, undef) == std::set<NodeId>{sm.crash});

  check_valid(p.ms, p.k);
}

TEST_CASE("a loop whose guard is already false exits without running") {
  Prog p(c_while(b_false(), c_assign(0, e_const(1))));
  const StatefulModel& sm = p.ms.stateful(p.ms.full_mask());

  // The full semantics never fires the body: its only code steps are the
  // guard reads. The lock level cannot see the guard, so there the body
  // stays reachable and the unrolling never closes; the fragment is
  // reported truncated on that account alone.
  Instr write;
  write.kind = Instr::Kind::Assign;
  write.var = 0;
  write.e1 = e_const(1);
  Label write_label = p.instrs.intern(write);
  for (EdgeId e = 0; e < p.k.s.g.edge_count(); ++e)
    if (p.k.s.g.edge(e).pol == Polarity::Code)
      CHECK(p.k.s.g.edge(e).label != write_label);
  CHECK(p.k.truncated);

  NodeId zero = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {0, 0})));
  CHECK(final_images(p.k.s, zero) ==
        std::set<NodeId>{sm.node_of(st(p.cfg, {0, 0}))});
  check_valid(p.ms, p.k);
}

TEST_CASE("a counting loop finishes its runs but never stops unrolling") {
  // Closed runs exit after at most one round. The unrolling still grows:
  // the environment can rewind the counter between rounds, so round k+1
  // stays reachable whenever round k is and no iterate matches the next.
  Prog p(c_while(b_lt(e_var(0), e_const(1)),
                 c_assign(0, e_add(e_var(0), e_const(1)))));
  const StatefulModel& sm = p.ms.stateful(p.ms.full_mask());
  CHECK(p.k.truncated);

  NodeId zero = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {0, 0})));
  CHECK(final_images(p.k.s, zero) ==
        std::set<NodeId>{sm.node_of(st(p.cfg, {1, 0}))});
  NodeId done = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {1, 0})));
  CHECK(final_images(p.k.s, done) ==
        std::set<NodeId>{sm.node_of(st(p.cfg, {1, 0}))});
  NodeId undef = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {-1, 0})));
  CHECK(final_images(p.k.s, undef) == std::set<NodeId>{sm.crash});

  check_valid(p.ms, p.k);
}

TEST_CASE("a loop that never exits reports its truncation") {
  SemOptions opt;
  opt.loop_bound = 3;
  Prog p(c_while(b_true(), c_skip()), opt);
  CHECK(p.k.truncated);
  // The unrolling is still a well-formed fragment, just not a fixed point.
  CHECK(validate_ats(p.k.s).ok());
  CHECK(validate_ats(p.k.l).ok());
}

TEST_CASE("a section whose guard fails never completes") {
  Prog p(c_with(0, b_false(), c_skip()));
  CHECK_FALSE(p.k.s.has_returning());
  CHECK_FALSE(p.k.l.has_returning());
  check_valid(p.ms, p.k);
}

TEST_CASE("a critical section leaves only its memory trace once hidden") {
  Prog p(c_resource(0, c_with(0, b_true(), c_assign(0, e_const(1)))));
  CHECK(p.k.lockmask == 0);
  const StatefulModel& sm = p.ms.stateful(0);
  CHECK(sm.g.node_count() == 10);  // lock gone: 9 memories plus crash

  // Enter, write, leave: the lock steps survive as no-ops.
  NodeId zero = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {0, 0})));
  CHECK(final_images(p.k.s, zero) ==
        std::set<NodeId>{sm.node_of(st(p.cfg, {1, 0}))});
  auto first = code_out(p.k.s, zero);
  REQUIRE(first.size() == 1);
  CHECK(p.ms.instructions().at(p.k.s.g.edge(first[0]).label).kind ==
        Instr::Kind::Nop);

  check_valid(p.ms, p.k);
}

TEST_CASE("serialized critical sections cannot be rescheduled") {
  // Two sections on the same lock touch different cells, so once the lock
  // is hidden the model commutes their steps, but the interleaving that
  // swaps the sections was never built.
  Prog p(c_resource(
      0, c_par(c_with(0, b_true(), c_assign(0, e_const(0))),
               c_with(0, b_true(), c_store(e_const(0), e_const(1))))));
  CHECK(p.k.lockmask == 0);
  check_valid(p.ms, p.k);

  const StatefulModel& sm = p.ms.stateful(0);
  Fib2Options cc;
  cc.first = PolFilter::Code;
  cc.second = PolFilter::Code;
  auto viol_s = check_2_fibration(p.k.s.g, sm.g, p.k.s.getstate, cc);
  CHECK_FALSE(viol_s.empty());

  // The seam between the sections is a pair of invisible no-ops.
  bool seam = false;
  for (const auto& v : viol_s) {
    const Instr& i1 = p.ms.instructions().at(sm.g.edge(v.down_first).label);
    const Instr& i2 = p.ms.instructions().at(sm.g.edge(v.down_second).label);
    if (i1.kind == Instr::Kind::Nop && i2.kind == Instr::Kind::Nop)
      seam = true;
  }
  CHECK(seam);

  const LockModel& lm = p.ms.lock_level(0);
  auto viol_l = check_2_fibration(p.k.l.g, lm.g, p.k.l.getstate, cc);
  CHECK_FALSE(viol_l.empty());
}

TEST_CASE("parallel writes commute at the lock level only") {
  Prog p(c_par(c_assign(0, e_const(0)), c_assign(0, e_const(1))));
  const StatefulModel& sm = p.ms.stateful(p.ms.full_mask());
  const LockModel& lm = p.ms.lock_level(p.ms.full_mask());
  check_valid(p.ms, p.k);

  // Upstairs the two writes run in either order, but the states they pass
  // through differ and the model has no square between them.
  NodeId start = initial_with_image(p.k.s, sm.node_of(st(p.cfg, {0, 0})));
  auto writes = code_out(p.k.s, start);
  REQUIRE(writes.size() == 2);
  for (EdgeId u : writes) {
    for (EdgeId v : code_out(p.k.s, p.k.s.g.edge(u).dst)) {
      CHECK(sm.g.completions(p.k.s.image_edge(u), p.k.s.image_edge(v))
                .empty());
      CHECK(p.k.s.g.completions(u, v).empty());
    }
  }

  // Their shadows are silent steps, and those do commute.
  NodeId lstart = initial_with_image(p.k.l, lm.node_of_lockset(0));
  EdgeId u = kNoEdge, v = kNoEdge;
  for (EdgeId e : code_out(p.k.l, lstart))
    if (p.k.l.image(p.k.l.g.edge(e).dst) != lm.crash) u = e;
  REQUIRE(u != kNoEdge);
  for (EdgeId e : code_out(p.k.l, p.k.l.g.edge(u).dst))
    if (p.k.l.image(p.k.l.g.edge(e).dst) != lm.crash) v = e;
  REQUIRE(v != kNoEdge);
  bool swap = false;
  for (const auto& [b1, b2] : p.k.l.g.completions(u, v)) {
    if (p.k.l.g.edge(b1).pol == Polarity::Code &&
        p.k.l.g.edge(b2).pol == Polarity::Code)
      swap = true;
  }
  CHECK(swap);

  // Neither level leaves a scheduling square unmatched here: the conflict
  // is invisible below and unordered squares are absent above.
  Fib2Options cc;
  cc.first = PolFilter::Code;
  cc.second = PolFilter::Code;
  CHECK(check_2_fibration(p.k.s.g, sm.g, p.k.s.getstate, cc).empty());
  CHECK(check_2_fibration(p.k.l.g, lm.g, p.k.l.getstate, cc).empty());
}

TEST_CASE("allocation fans out over the free locations") {
  Config cfg;
  cfg.vars = {"x"};
  cfg.values = {0, 1};
  cfg.locations = {0, 1};
  cfg.locks = {};
  validate(cfg);
  InstrTable instrs;
  CodePtr c = c_malloc(0, e_const(1));
  ModelSpace ms(cfg, instrs, program_alphabet(cfg, instrs, c));
  CodeSem k = sem_code(ms, c, 0u);
  const StatefulModel& sm = ms.stateful(0u);

  // From an empty heap both locations are available; each run pins one.
  MachineState s0 = st(cfg, {0, -1, -1});
  NodeId start = initial_with_image(k.s, sm.node_of(s0));
  CHECK(final_images(k.s, start) ==
        std::set<NodeId>{sm.node_of(st(cfg, {0, 1, -1})),
                         sm.node_of(st(cfg, {1, -1, 1}))});
  check_valid(ms, k);
}
