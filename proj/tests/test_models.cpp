#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "asyncsl/models.hpp"

using namespace asyncsl;

namespace {

// One variable pair, booleans, a single address, a single lock. Small enough
// to hand-count edges and tiles at chosen states.
Config tiny_config() {
  Config cfg;
  cfg.vars = {"x", "y"};
  cfg.values = {0, 1};
  cfg.locations = {0};
  cfg.locks = {"r"};
  validate(cfg);
  return cfg;
}

// Cell layout: 0 = x, 1 = y, 2 = the single address.
MachineState st(const Config& cfg, std::vector<int> cells,
                std::uint32_t locks = 0) {
  MachineState s;
  s.mem = Memory::blank(cfg);
  for (std::size_t i = 0; i < cells.size(); ++i)
    s.mem.cells[i] = static_cast<signed char>(cells[i]);
  s.locks = locks;
  return s;
}

struct Built {
  Config cfg;
  InstrTable instrs;
  StatefulModel sm;
  Built() : cfg(tiny_config()) {
    sm = build_stateful_model(cfg, instrs, standard_alphabet(cfg, instrs));
  }
};

Label find_label(const InstrTable& t, const Instr& i) {
  for (Label l = 0; l < t.size(); ++l)
    if (instr_equal(t.at(l), i)) return l;
  return 0xffffffffu;
}

// Does some tile have u and w as the first edges of its two sides?
bool has_tile_between(const AsyncGraph& g, EdgeId u, EdgeId w) {
  for (EdgeId x : g.out(g.edge(u).dst))
    for (auto& [c1, c2] : g.completions(u, x)) {
      (void)c2;
      if (c1 == w) return true;
    }
  return false;
}

std::size_t tiles_at(const AsyncGraph& g, NodeId v) {
  std::size_t n = 0;
  for (const Tile& t : g.tiles())
    if (g.edge(t.a1).src == v) ++n;
  return n;
}

Instr mk_assign(int var, ExprPtr e) {
  Instr i;
  i.kind = Instr::Kind::Assign;
  i.var = var;
  i.e1 = std::move(e);
  return i;
}

Instr mk_load(int var, ExprPtr a) {
  Instr i;
  i.kind = Instr::Kind::Load;
  i.var = var;
  i.e1 = std::move(a);
  return i;
}

Instr mk_lock(Instr::Kind k, int r) {
  Instr i;
  i.kind = k;
  i.lock = r;
  return i;
}

Instr mk_alloc(int var, ExprPtr e, int loc) {
  Instr i;
  i.kind = Instr::Kind::Alloc;
  i.var = var;
  i.e1 = std::move(e);
  i.loc = loc;
  return i;
}

Instr mk_dispose(ExprPtr a) {
  Instr i;
  i.kind = Instr::Kind::Dispose;
  i.e1 = std::move(a);
  return i;
}

Instr mk_at(Instr::Kind k, int loc) {
  Instr i;
  i.kind = k;
  i.loc = loc;
  return i;
}

}  // namespace

// ---------------------------------------------------------------------------
// Full machine model.

TEST_CASE("stateful model enumerates states and enabled steps") {
  Built b;
  // 3 cells with 3 contents each, 2 lock sets, plus the crash node.
  CHECK(b.sm.g.node_count() == 27 * 2 + 1);
  CHECK(b.sm.states.size() == b.sm.g.node_count());
  CHECK(b.sm.g.out(b.sm.crash).empty());
  CHECK_FALSE(b.sm.g.in(b.sm.crash).empty());

  NodeId blank = b.sm.node_of(st(b.cfg, {}));
  REQUIRE(blank != kNoNode);
  // nop, 4 assigns, 4 allocations, P(r) step; 2 loads, 2 stores and the
  // disposal fault on the empty heap; V(r) is blocked.
  CHECK(b.sm.g.out(blank).size() == 15);

  NodeId busy = b.sm.node_of(st(b.cfg, {0, 0, 0}, 0b1));
  // Allocation is blocked on an occupied address and P(r) on a held lock;
  // loads, stores and the disposal now run.
  CHECK(b.sm.g.out(busy).size() == 11);

  std::size_t faults = 0;
  for (EdgeId e : b.sm.g.out(blank))
    if (b.sm.edge_fault[e]) {
      ++faults;
      CHECK(b.sm.g.edge(e).dst == b.sm.crash);
    }
  CHECK(faults == 5);
}

TEST_CASE("stateful model passes the tile axioms") {
  Built b;
  CHECK(validate_axioms(b.sm.g).ok());
  CHECK(polarity_violations(b.sm.g).empty());
  CHECK(b.sm.g.tile_count() > 0);
}

TEST_CASE("commutation tiles at the blank state") {
  Built b;
  NodeId blank = b.sm.node_of(st(b.cfg, {}));
  auto edge_with = [&](const Instr& i) {
    Label l = find_label(b.instrs, i);
    REQUIRE(l != 0xffffffffu);
    for (EdgeId e : b.sm.g.out(blank))
      if (b.sm.g.edge(e).label == l) return e;
    REQUIRE(false);
    return kNoEdge;
  };

  EdgeId nop = edge_with(Instr{});
  EdgeId ax0 = edge_with(mk_assign(0, e_const(0)));
  EdgeId ax1 = edge_with(mk_assign(0, e_const(1)));
  EdgeId ay0 = edge_with(mk_assign(1, e_const(0)));
  EdgeId p = edge_with(mk_lock(Instr::Kind::Lock, 0));
  EdgeId heap_x = edge_with(mk_alloc(0, e_const(0), 0));
  EdgeId heap_y = edge_with(mk_alloc(1, e_const(1), 0));

  // A step commutes with itself only when its footprint is silent.
  CHECK(has_tile_between(b.sm.g, nop, nop));
  CHECK_FALSE(has_tile_between(b.sm.g, ax0, ax0));

  CHECK(has_tile_between(b.sm.g, ax0, ay0));
  CHECK(has_tile_between(b.sm.g, ax0, p));
  CHECK(has_tile_between(b.sm.g, p, heap_x));
  CHECK(has_tile_between(b.sm.g, ay0, heap_x));
  CHECK_FALSE(has_tile_between(b.sm.g, ax0, ax1));      // same target cell
  CHECK_FALSE(has_tile_between(b.sm.g, ax0, heap_x));   // both write x
  CHECK_FALSE(has_tile_between(b.sm.g, heap_x, heap_y));  // same address

  // 1 nop self tile, 9 nop pairs, 4 assign pairs, 8 assign/alloc pairs,
  // 4 assign/P and 4 alloc/P pairs.
  CHECK(tiles_at(b.sm.g, blank) == 30);
}

TEST_CASE("a faulting residual leaves the square open") {
  Built b;
  // The address is allocated; disposing it and loading from it are both
  // enabled, and their declared footprints do not collide. The load run
  // after the disposal faults, so the pair still gets no tile: exactly the
  // shape a race detector must keep.
  NodeId s = b.sm.node_of(st(b.cfg, {0, 0, 1}));
  Label dl = find_label(b.instrs, mk_dispose(e_const(0)));
  Label ll = find_label(b.instrs, mk_load(1, e_const(0)));
  EdgeId de = kNoEdge, le = kNoEdge;
  for (EdgeId e : b.sm.g.out(s)) {
    if (b.sm.g.edge(e).label == dl) de = e;
    if (b.sm.g.edge(e).label == ll) le = e;
  }
  REQUIRE(de != kNoEdge);
  REQUIRE(le != kNoEdge);
  CHECK_FALSE(b.sm.edge_fault[de]);
  CHECK_FALSE(b.sm.edge_fault[le]);
  CHECK(independent(b.sm.edge_fp[de], b.sm.edge_fp[le]));
  CHECK_FALSE(has_tile_between(b.sm.g, de, le));
}

// ---------------------------------------------------------------------------
// Lock-level model.

TEST_CASE("lock model shape") {
  Config cfg = tiny_config();
  InstrTable instrs;
  LockModel lm = build_lock_model(cfg, instrs);

  CHECK(lm.g.node_count() == 3);  // no lock, lock held, crash
  CHECK(lm.g.out(lm.crash).empty());
  // tau, acquire, release, allocation, disposal: one move edge when
  // enabled, one crash edge always.
  CHECK(lm.g.out(0).size() == 9);
  CHECK(lm.g.out(1).size() == 9);
  CHECK(validate_axioms(lm.g).ok());
  CHECK(polarity_violations(lm.g).empty());
  CHECK(lm.g.tile_count() == 24);
}

TEST_CASE("lock model tiles include crash completions") {
  Config cfg = tiny_config();
  InstrTable instrs;
  LockModel lm = build_lock_model(cfg, instrs);
  Label tau = find_label(instrs, mk_at(Instr::Kind::Tau, -1));
  Label p = find_label(instrs, mk_lock(Instr::Kind::Lock, 0));

  EdgeId tau_loop = kNoEdge, tau_fault = kNoEdge;
  EdgeId p_move = kNoEdge, p_fault = kNoEdge;
  for (EdgeId e : lm.g.out(0)) {
    const Edge& ed = lm.g.edge(e);
    if (ed.label == tau) (ed.dst == lm.crash ? tau_fault : tau_loop) = e;
    if (ed.label == p) (ed.dst == lm.crash ? p_fault : p_move) = e;
  }
  REQUIRE(tau_loop != kNoEdge);
  REQUIRE(tau_fault != kNoEdge);
  REQUIRE(p_move != kNoEdge);
  REQUIRE(p_fault != kNoEdge);

  EdgeId tau_at_1 = kNoEdge, tau_fault_at_1 = kNoEdge;
  for (EdgeId e : lm.g.out(1))
    if (lm.g.edge(e).label == tau)
      (lm.g.edge(e).dst == lm.crash ? tau_fault_at_1 : tau_at_1) = e;

  // The same first edges close at the far lock set or at the crash; both
  // squares are tiles, and the distinct targets keep them unambiguous.
  CHECK(lm.g.tile_exists(tau_loop, p_move, p_move, tau_at_1));
  CHECK(lm.g.tile_exists(tau_loop, p_fault, p_move, tau_fault_at_1));
  CHECK(lm.g.tile_exists(tau_loop, tau_loop, tau_loop, tau_loop));
  CHECK(lm.g.tile_exists(tau_loop, tau_fault, tau_loop, tau_fault));

  // No square grows out of a crash edge taken first.
  CHECK_FALSE(has_tile_between(lm.g, tau_fault, p_move));
  CHECK_FALSE(has_tile_between(lm.g, p_fault, tau_loop));

  // Heap bookkeeping collides with itself.
  Label al = find_label(instrs, mk_at(Instr::Kind::AllocAt, 0));
  Label dl = find_label(instrs, mk_at(Instr::Kind::DisposeAt, 0));
  EdgeId ae = kNoEdge, de = kNoEdge;
  for (EdgeId e : lm.g.out(0)) {
    if (lm.g.edge(e).label == al && lm.g.edge(e).dst == 0) ae = e;
    if (lm.g.edge(e).label == dl && lm.g.edge(e).dst == 0) de = e;
  }
  CHECK_FALSE(has_tile_between(lm.g, ae, de));
  CHECK(has_tile_between(lm.g, ae, tau_loop));
}

// ---------------------------------------------------------------------------
// Erasure.

TEST_CASE("instruction erasure") {
  Config cfg = tiny_config();
  Memory mem = st(cfg, {0, 1, 0}).mem;  // y holds a non-address value

  auto erased = [&](const Instr& i, bool fault = false) {
    return erase_instr(cfg, i, mem, fault);
  };
  CHECK(erased(Instr{}).kind == Instr::Kind::Tau);
  CHECK(erased(mk_assign(0, e_var(1))).kind == Instr::Kind::Tau);
  CHECK(erased(mk_load(0, e_const(0)), true).kind == Instr::Kind::Tau);
  CHECK(erased(mk_lock(Instr::Kind::Unlock, 0)).kind == Instr::Kind::Unlock);

  Instr a = erased(mk_alloc(0, e_const(1), 0));
  CHECK(a.kind == Instr::Kind::AllocAt);
  CHECK(a.loc == 0);
  CHECK(erased(mk_alloc(0, e_var(1), 0), true).kind == Instr::Kind::Tau);

  // Disposal keeps its address exactly when the expression resolves to one.
  Instr d = erased(mk_dispose(e_var(0)));  // x = 0, an address
  CHECK(d.kind == Instr::Kind::DisposeAt);
  CHECK(d.loc == 0);
  CHECK(erased(mk_dispose(e_var(1))).kind == Instr::Kind::Tau);  // y = 1
  Memory blank = Memory::blank(cfg);
  CHECK(erase_instr(cfg, mk_dispose(e_var(0)), blank, true).kind ==
        Instr::Kind::Tau);
}

TEST_CASE("erasure is a morphism onto the lock model") {
  Built b;
  LockModel lm = build_lock_model(b.cfg, b.instrs);
  GraphMorphism mor = erasure_morphism(b.sm, lm);

  REQUIRE(mor.node_map.size() == b.sm.g.node_count());
  REQUIRE(mor.edge_map.size() == b.sm.g.edge_count());
  for (EdgeId e = 0; e < b.sm.g.edge_count(); ++e)
    REQUIRE(mor.edge_map[e] != kNoEdge);

  CHECK(mor.node_map[b.sm.crash] == lm.crash);
  CHECK(mor.node_map[b.sm.node_of(st(b.cfg, {0, 1}, 0b1))] == 1);
  CHECK(mor.node_map[b.sm.node_of(st(b.cfg, {}))] == 0);

  CHECK(check_graph_morphism(b.sm.g, lm.g, mor).empty());

  // Spot checks: memory steps fade to tau, disposal keeps its address.
  NodeId s = b.sm.node_of(st(b.cfg, {0, 0, 1}));
  Label dl = find_label(b.instrs, mk_dispose(e_const(0)));
  Label tau = find_label(b.instrs, mk_at(Instr::Kind::Tau, -1));
  Label datl = find_label(b.instrs, mk_at(Instr::Kind::DisposeAt, 0));
  for (EdgeId e : b.sm.g.out(s)) {
    const Instr& i = b.instrs.at(b.sm.g.edge(e).label);
    Label image = lm.g.edge(mor.edge_map[e]).label;
    if (i.kind == Instr::Kind::Assign) CHECK(image == tau);
    if (b.sm.g.edge(e).label == dl) CHECK(image == datl);
  }
}

// ---------------------------------------------------------------------------
// The perturbation oracle.

TEST_CASE("perturbation footprints of probing steps") {
  Config cfg = tiny_config();

  // Allocation probes its target for occupancy, so the cell turns up as a
  // semantic read on top of the declared write and claim.
  Footprint a = perturbation_footprint(cfg, st(cfg, {}),
                                       mk_alloc(0, e_const(1), 0));
  CHECK(a == Footprint{0b100, 0b101, 0b100, 0});

  // A store of the value already present is still a write: some variant of
  // the cell exposes it. Definedness probing adds the read.
  Footprint w = perturbation_footprint(cfg, st(cfg, {0, 0, 1}),
                                       mk_at(Instr::Kind::Tau, -1));
  CHECK(w == Footprint{});
  Instr same;
  same.kind = Instr::Kind::Store;
  same.e1 = e_const(0);
  same.e2 = e_const(1);
  Footprint sfp = perturbation_footprint(cfg, st(cfg, {0, 0, 1}), same);
  CHECK(sfp == Footprint{0b100, 0b100, 0, 0});

  // Lock word deltas are footprints too.
  Footprint p = perturbation_footprint(cfg, st(cfg, {}),
                                       mk_lock(Instr::Kind::Lock, 0));
  CHECK(p == Footprint{0, 0, 0, 0b1});
}

TEST_CASE("the model tile relation matches the perturbation semantics") {
  Built b;
  OracleReport rep = residual_oracle(b.sm, 200000);
  CHECK(rep.pairs_checked > 1000);
  CHECK(rep.ok());
  for (std::size_t k = 0; k < rep.mismatches.size() && k < 5; ++k) {
    auto& m = rep.mismatches[k];
    MESSAGE("mismatch at "
            << state_to_string(b.cfg, b.sm.states[m.node]) << ": "
            << b.instrs.name(b.cfg, b.sm.g.edge(m.e1).label) << " / "
            << b.instrs.name(b.cfg, b.sm.g.edge(m.e2).label) << " model="
            << m.model_tile << " oracle=" << m.oracle_tile);
  }
}

TEST_CASE("oracle pair cap truncates the sweep") {
  Built b;
  OracleReport rep = residual_oracle(b.sm, 10);
  CHECK(rep.pairs_checked == 10);
}

// ---------------------------------------------------------------------------
// Desk-scale smoke test.

TEST_CASE("default config model builds and validates") {
  Config cfg = default_config();
  InstrTable instrs;
  StatefulModel sm =
      build_stateful_model(cfg, instrs, standard_alphabet(cfg, instrs));
  CHECK(sm.g.node_count() == 625 * 4 + 1);
  CHECK(validate_axioms(sm.g).ok());

  LockModel lm = build_lock_model(cfg, instrs);
  CHECK(lm.g.node_count() == 5);
  CHECK(validate_axioms(lm.g).ok());
  GraphMorphism mor = erasure_morphism(sm, lm);
  CHECK(check_graph_morphism(sm.g, lm.g, mor).empty());
}
