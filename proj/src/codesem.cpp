#include "asyncsl/codesem.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <unordered_map>

namespace asyncsl {

// =========================================================================
// Program constructors and walks.

namespace {

std::shared_ptr<Code> make_code(Code::Kind k) {
  auto c = std::make_shared<Code>();
  c->kind = k;
  return c;
}

}  // namespace

CodePtr c_skip() { return make_code(Code::Kind::Skip); }

CodePtr c_assign(int var, ExprPtr e) {
  auto c = make_code(Code::Kind::Assign);
  c->var = var;
  c->e1 = std::move(e);
  return c;
}

CodePtr c_load(int var, ExprPtr addr) {
  auto c = make_code(Code::Kind::Load);
  c->var = var;
  c->e1 = std::move(addr);
  return c;
}

CodePtr c_store(ExprPtr addr, ExprPtr value) {
  auto c = make_code(Code::Kind::Store);
  c->e1 = std::move(addr);
  c->e2 = std::move(value);
  return c;
}

CodePtr c_malloc(int var, ExprPtr value) {
  auto c = make_code(Code::Kind::Malloc);
  c->var = var;
  c->e1 = std::move(value);
  return c;
}

CodePtr c_dispose(ExprPtr addr) {
  auto c = make_code(Code::Kind::Dispose);
  c->e1 = std::move(addr);
  return c;
}

CodePtr c_seq(CodePtr a, CodePtr b) {
  auto c = make_code(Code::Kind::Seq);
  c->c1 = std::move(a);
  c->c2 = std::move(b);
  return c;
}

CodePtr c_par(CodePtr a, CodePtr b) {
  auto c = make_code(Code::Kind::Par);
  c->c1 = std::move(a);
  c->c2 = std::move(b);
  return c;
}

CodePtr c_if(BoolPtr g, CodePtr then_branch, CodePtr else_branch) {
  auto c = make_code(Code::Kind::If);
  c->guard = std::move(g);
  c->c1 = std::move(then_branch);
  c->c2 = std::move(else_branch);
  return c;
}

CodePtr c_while(BoolPtr g, CodePtr body) {
  auto c = make_code(Code::Kind::While);
  c->guard = std::move(g);
  c->c1 = std::move(body);
  return c;
}

CodePtr c_resource(int lock, CodePtr body) {
  auto c = make_code(Code::Kind::Resource);
  c->lock = lock;
  c->c1 = std::move(body);
  return c;
}

CodePtr c_with(int lock, BoolPtr g, CodePtr body) {
  auto c = make_code(Code::Kind::With);
  c->lock = lock;
  c->guard = std::move(g);
  c->c1 = std::move(body);
  return c;
}

std::string code_to_string(const Config& cfg, const CodePtr& c) {
  switch (c->kind) {
    case Code::Kind::Skip:
      return "skip";
    case Code::Kind::Assign:
      return cfg.vars[c->var] + " := " + expr_to_string(cfg, c->e1);
    case Code::Kind::Load:
      return cfg.vars[c->var] + " := [" + expr_to_string(cfg, c->e1) + "]";
    case Code::Kind::Store:
      return "[" + expr_to_string(cfg, c->e1) +
             "] := " + expr_to_string(cfg, c->e2);
    case Code::Kind::Malloc:
      return cfg.vars[c->var] + " := alloc(" + expr_to_string(cfg, c->e1) +
             ")";
    case Code::Kind::Dispose:
      return "dispose(" + expr_to_string(cfg, c->e1) + ")";
    case Code::Kind::Seq:
      return "(" + code_to_string(cfg, c->c1) + " ; " +
             code_to_string(cfg, c->c2) + ")";
    case Code::Kind::Par:
      return "(" + code_to_string(cfg, c->c1) + " || " +
             code_to_string(cfg, c->c2) + ")";
    case Code::Kind::If:
      return "if " + bool_to_string(cfg, c->guard) + " then " +
             code_to_string(cfg, c->c1) + " else " +
             code_to_string(cfg, c->c2);
    case Code::Kind::While:
      return "while " + bool_to_string(cfg, c->guard) + " do " +
             code_to_string(cfg, c->c1);
    case Code::Kind::Resource:
      return "resource " + cfg.locks[c->lock] + " in " +
             code_to_string(cfg, c->c1);
    case Code::Kind::With:
      return "with " + cfg.locks[c->lock] + " when " +
             bool_to_string(cfg, c->guard) + " do " +
             code_to_string(cfg, c->c1);
  }
  return "?";
}

std::uint32_t free_locks(const CodePtr& c) {
  if (!c) return 0;
  switch (c->kind) {
    case Code::Kind::Resource:
      return free_locks(c->c1) & ~(1u << c->lock);
    case Code::Kind::With:
      return free_locks(c->c1) | (1u << c->lock);
    default:
      return free_locks(c->c1) | free_locks(c->c2);
  }
}

std::uint32_t bound_locks(const CodePtr& c) {
  if (!c) return 0;
  std::uint32_t m = bound_locks(c->c1) | bound_locks(c->c2);
  if (c->kind == Code::Kind::Resource) m |= 1u << c->lock;
  return m;
}

namespace {

void check_expr_ids(const Config& cfg, const ExprPtr& e, const char* what,
                    std::vector<std::string>& out) {
  if (!e) {
    out.push_back(std::string(what) + ": missing expression");
    return;
  }
  std::uint64_t bad = expr_vars(e) & ~((1ull << cfg.vars.size()) - 1ull);
  if (bad)
    out.push_back(std::string(what) + ": variable index out of range");
}

void check_guard_ids(const Config& cfg, const BoolPtr& b, const char* what,
                     std::vector<std::string>& out) {
  if (!b) {
    out.push_back(std::string(what) + ": missing guard");
    return;
  }
  std::uint64_t bad = bool_vars(b) & ~((1ull << cfg.vars.size()) - 1ull);
  if (bad)
    out.push_back(std::string(what) + ": variable index out of range");
}

void check_code_rec(const Config& cfg, const CodePtr& c, std::uint32_t scope,
                    std::vector<std::string>& out) {
  if (!c) {
    out.push_back("missing code");
    return;
  }
  auto var_ok = [&](const char* what) {
    if (c->var < 0 || c->var >= static_cast<int>(cfg.vars.size()))
      out.push_back(std::string(what) + ": target variable out of range");
  };
  auto lock_ok = [&](const char* what) -> bool {
    if (c->lock < 0 || c->lock >= static_cast<int>(cfg.locks.size())) {
      out.push_back(std::string(what) + ": lock index out of range");
      return false;
    }
    return true;
  };
  switch (c->kind) {
    case Code::Kind::Skip:
      break;
    case Code::Kind::Assign:
      var_ok("assignment");
      check_expr_ids(cfg, c->e1, "assignment", out);
      break;
    case Code::Kind::Load:
      var_ok("load");
      check_expr_ids(cfg, c->e1, "load address", out);
      break;
    case Code::Kind::Store:
      check_expr_ids(cfg, c->e1, "store address", out);
      check_expr_ids(cfg, c->e2, "store value", out);
      break;
    case Code::Kind::Malloc:
      var_ok("allocation");
      check_expr_ids(cfg, c->e1, "allocation value", out);
      break;
    case Code::Kind::Dispose:
      check_expr_ids(cfg, c->e1, "dispose address", out);
      break;
    case Code::Kind::Seq:
    case Code::Kind::Par:
      check_code_rec(cfg, c->c1, scope, out);
      check_code_rec(cfg, c->c2, scope, out);
      break;
    case Code::Kind::If:
      check_guard_ids(cfg, c->guard, "conditional", out);
      check_code_rec(cfg, c->c1, scope, out);
      check_code_rec(cfg, c->c2, scope, out);
      break;
    case Code::Kind::While:
      check_guard_ids(cfg, c->guard, "loop", out);
      check_code_rec(cfg, c->c1, scope, out);
      break;
    case Code::Kind::Resource:
      if (lock_ok("resource")) {
        if (scope & (1u << c->lock))
          out.push_back("resource " + cfg.locks[c->lock] +
                        " rebinds a lock already in scope");
        check_code_rec(cfg, c->c1, scope | (1u << c->lock), out);
      }
      break;
    case Code::Kind::With:
      if (lock_ok("with")) {
        if (!(scope & (1u << c->lock)))
          out.push_back("with " + cfg.locks[c->lock] +
                        " takes a lock out of scope");
        check_guard_ids(cfg, c->guard, "with", out);
        // The body runs while the section holds the lock, so the lock is
        // not usable inside it.
        check_code_rec(cfg, c->c1, scope & ~(1u << c->lock), out);
      }
      break;
  }
}

// A literal true guard reads nothing, so its entry needs no probe.
bool trivially_true(const BoolPtr& b) {
  return b && b->kind == BoolExpr::Kind::True;
}

void alphabet_rec(const Config& cfg, InstrTable& instrs, const CodePtr& c,
                  std::set<Label>& seen, std::vector<Label>& out) {
  if (!c) return;
  auto add = [&](const Instr& i) {
    Label l = instrs.intern(i);
    if (seen.insert(l).second) out.push_back(l);
  };
  switch (c->kind) {
    case Code::Kind::Assign: {
      Instr i;
      i.kind = Instr::Kind::Assign;
      i.var = c->var;
      i.e1 = c->e1;
      add(i);
      break;
    }
    case Code::Kind::Load: {
      Instr i;
      i.kind = Instr::Kind::Load;
      i.var = c->var;
      i.e1 = c->e1;
      add(i);
      break;
    }
    case Code::Kind::Store: {
      Instr i;
      i.kind = Instr::Kind::Store;
      i.e1 = c->e1;
      i.e2 = c->e2;
      add(i);
      break;
    }
    case Code::Kind::Malloc:
      for (std::size_t l = 0; l < cfg.locations.size(); ++l) {
        Instr i;
        i.kind = Instr::Kind::Alloc;
        i.var = c->var;
        i.e1 = c->e1;
        i.loc = static_cast<int>(l);
        add(i);
      }
      break;
    case Code::Kind::Dispose: {
      Instr i;
      i.kind = Instr::Kind::Dispose;
      i.e1 = c->e1;
      add(i);
      break;
    }
    case Code::Kind::If:
    case Code::Kind::While: {
      if (trivially_true(c->guard)) break;
      Instr i;
      i.kind = Instr::Kind::Test;
      i.b = c->guard;
      add(i);
      break;
    }
    case Code::Kind::With: {
      if (trivially_true(c->guard)) break;
      // The conditional acquire, and the bare probe it leaves behind once
      // the lock is hidden.
      Instr i;
      i.kind = Instr::Kind::Test;
      i.b = c->guard;
      i.lock = c->lock;
      add(i);
      i.lock = -1;
      add(i);
      break;
    }
    default:
      break;
  }
  alphabet_rec(cfg, instrs, c->c1, seen, out);
  alphabet_rec(cfg, instrs, c->c2, seen, out);
}

}  // namespace

std::vector<std::string> check_code(const Config& cfg, const CodePtr& c,
                                    std::uint32_t scope) {
  std::vector<std::string> out;
  check_code_rec(cfg, c, scope, out);
  return out;
}

std::vector<Label> program_alphabet(const Config& cfg, InstrTable& instrs,
                                    const CodePtr& c) {
  std::vector<Label> out = standard_alphabet(cfg, instrs);
  std::set<Label> seen(out.begin(), out.end());
  alphabet_rec(cfg, instrs, c, seen, out);
  return out;
}

// =========================================================================
// ModelSpace.

ModelSpace::ModelSpace(const Config& cfg, InstrTable& instrs,
                       std::vector<Label> alphabet)
    : cfg_(&cfg), instrs_(&instrs), alphabet_(std::move(alphabet)) {}

const StatefulModel& ModelSpace::stateful(std::uint32_t lockmask) {
  lockmask &= full_mask();
  auto it = s_.find(lockmask);
  if (it == s_.end())
    it = s_.emplace(lockmask,
                    std::make_unique<StatefulModel>(build_stateful_model(
                        *cfg_, *instrs_, alphabet_, lockmask)))
             .first;
  return *it->second;
}

const LockModel& ModelSpace::lock_level(std::uint32_t lockmask) {
  lockmask &= full_mask();
  auto it = l_.find(lockmask);
  if (it == l_.end())
    it = l_.emplace(lockmask, std::make_unique<LockModel>(build_lock_model(
                                  *cfg_, *instrs_, lockmask)))
             .first;
  return *it->second;
}

const GraphMorphism& ModelSpace::erasure(std::uint32_t lockmask) {
  lockmask &= full_mask();
  auto it = f_.find(lockmask);
  if (it == f_.end()) {
    const StatefulModel& sm = stateful(lockmask);
    const LockModel& lm = lock_level(lockmask);
    it = f_.emplace(lockmask, std::make_unique<GraphMorphism>(
                                  erasure_morphism(sm, lm)))
             .first;
  }
  return *it->second;
}

// =========================================================================
// Step lifting: the two-copy fragment of a single instruction.

Ats step_lift_ats(const AsyncGraph& model, const std::vector<EdgeId>& steps,
                  CombineTrace* trace) {
  Ats pre;
  pre.model = &model;
  NodeId n = static_cast<NodeId>(model.node_count());
  pre.g.add_nodes(2 * static_cast<std::size_t>(n));
  pre.getstate.node_map.resize(2 * static_cast<std::size_t>(n));
  for (NodeId x = 0; x < n; ++x) {
    pre.getstate.node_map[x] = x;
    pre.getstate.node_map[n + x] = x;
  }

  std::vector<EdgeId> lo(model.edge_count()), hi(model.edge_count());
  std::vector<EdgeId> code(model.edge_count(), kNoEdge);
  for (EdgeId e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    lo[e] = pre.g.add_edge(ed.src, ed.dst, ed.label, Polarity::Frame);
    pre.getstate.edge_map.push_back(e);
  }
  for (EdgeId e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    hi[e] = pre.g.add_edge(n + ed.src, n + ed.dst, ed.label, Polarity::Frame);
    pre.getstate.edge_map.push_back(e);
  }
  for (EdgeId e : steps) {
    const Edge& ed = model.edge(e);
    code[e] = pre.g.add_edge(ed.src, n + ed.dst, ed.label, Polarity::Code);
    pre.getstate.edge_map.push_back(e);
  }

  for (const Tile& t : model.tiles()) {
    pre.g.add_tile(lo[t.a1], lo[t.a2], lo[t.b1], lo[t.b2]);
    pre.g.add_tile(hi[t.a1], hi[t.a2], hi[t.b1], hi[t.b2]);
  }
  // A Code step slides across a posterior environment step whenever the
  // model commutes the two; downstairs the environment step comes first.
  for (EdgeId e : steps) {
    for (EdgeId f : model.out(model.edge(e).dst)) {
      for (const auto& [b1, b2] : model.completions(e, f)) {
        if (code[b2] == kNoEdge) continue;
        pre.g.add_tile(code[e], hi[f], lo[b1], code[b2]);
      }
    }
  }

  pre.initial.resize(n);
  std::iota(pre.initial.begin(), pre.initial.end(), 0u);
  pre.returning.assign(2 * static_cast<std::size_t>(n), 0);
  for (NodeId x = n; x < 2 * n; ++x) pre.returning[x] = 1;

  CombineTrace pt;
  Ats out = prune_unreachable(pre, &pt);
  if (trace) {
    std::vector<NodeId> low_n(n), high_n(n);
    for (NodeId x = 0; x < n; ++x) {
      low_n[x] = pt.node_maps[0][x];
      high_n[x] = pt.node_maps[0][n + x];
    }
    auto through = [&](std::vector<EdgeId> m) {
      for (auto& e : m)
        if (e != kNoEdge) e = pt.edge_maps[0][e];
      return m;
    };
    trace->node_maps = {std::move(low_n), std::move(high_n)};
    trace->edge_maps = {through(std::move(lo)), through(std::move(hi)),
                        through(std::move(code))};
    trace->pair_of_node.clear();
    trace->pair_of_edge.clear();
  }
  return out;
}

// =========================================================================
// Guard filtering.

Ats guard_filter_ats(const StatefulModel& sm, const Ats& g,
                     const BoolPtr& guard, bool keep_true,
                     CombineTrace* trace) {
  const Config& cfg = *sm.cfg;
  std::vector<std::uint8_t> init(g.g.node_count(), 0);
  for (NodeId x : g.initial) init[x] = 1;

  std::vector<std::uint8_t> drop(g.g.edge_count(), 0);
  for (EdgeId e = 0; e < g.g.edge_count(); ++e) {
    const Edge& ed = g.g.edge(e);
    if (ed.pol != Polarity::Code || !init[ed.src]) continue;
    const MachineState& st = sm.states[g.image(ed.src)];
    bool keep = false;
    if (!st.crash) {
      StackView view(cfg, st.mem.cells.data());
      auto v = eval_bool(view, guard);
      keep = v.has_value() && *v == keep_true;
    }
    if (!keep) drop[e] = 1;
  }

  Ats mid;
  mid.model = g.model;
  mid.g.add_nodes(g.g.node_count());
  mid.getstate.node_map = g.getstate.node_map;
  mid.returning = g.returning;
  mid.initial = g.initial;
  std::vector<EdgeId> emap(g.g.edge_count(), kNoEdge);
  for (EdgeId e = 0; e < g.g.edge_count(); ++e) {
    if (drop[e]) continue;
    const Edge& ed = g.g.edge(e);
    emap[e] = mid.g.add_edge(ed.src, ed.dst, ed.label, ed.pol);
    mid.getstate.edge_map.push_back(g.image_edge(e));
  }
  for (const Tile& t : g.g.tiles()) {
    if (emap[t.a1] == kNoEdge || emap[t.a2] == kNoEdge ||
        emap[t.b1] == kNoEdge || emap[t.b2] == kNoEdge)
      continue;
    mid.g.add_tile(emap[t.a1], emap[t.a2], emap[t.b1], emap[t.b2]);
  }

  CombineTrace pt;
  Ats out = prune_unreachable(mid, &pt);
  if (trace) {
    std::vector<NodeId> nmap = pt.node_maps[0];
    for (auto& e : emap)
      if (e != kNoEdge) e = pt.edge_maps[0][e];
    trace->node_maps = {std::move(nmap)};
    trace->edge_maps = {std::move(emap)};
    trace->pair_of_node.clear();
    trace->pair_of_edge.clear();
  }
  return out;
}

// =========================================================================
// Hiding a lock.

Ats hide_resource_ats(ModelSpace& ms, Level lv, std::uint32_t g_mask,
                      int lock, const Ats& g, CombineTrace* trace) {
  InstrTable& instrs = ms.instructions();
  std::uint32_t bit = 1u << lock;
  std::uint32_t out_mask = (g_mask & ms.full_mask()) & ~bit;

  std::vector<NodeId> nimg(g.g.node_count());
  std::vector<std::uint8_t> holds(g.g.node_count(), 0);
  Label plain;
  const AsyncGraph* small_graph = nullptr;
  std::function<EdgeId(NodeId, Label, NodeId)> find;

  if (lv == Level::Stateful) {
    const StatefulModel& big = ms.stateful(g_mask);
    const StatefulModel& small = ms.stateful(out_mask);
    Instr nop;
    plain = instrs.intern(nop);
    small_graph = &small.g;
    for (NodeId x = 0; x < g.g.node_count(); ++x) {
      const MachineState& st = big.states[g.image(x)];
      if (st.crash) {
        nimg[x] = small.crash;
      } else {
        holds[x] = (st.locks & bit) ? 1 : 0;
        nimg[x] = small.node_of(MachineState{false, st.mem, st.locks & ~bit});
      }
    }
    find = [&small](NodeId s, Label l, NodeId d) {
      return small.find_edge(s, l, d);
    };
  } else {
    const LockModel& big = ms.lock_level(g_mask);
    const LockModel& small = ms.lock_level(out_mask);
    Instr tau;
    tau.kind = Instr::Kind::Tau;
    plain = instrs.intern(tau);
    small_graph = &small.g;
    for (NodeId x = 0; x < g.g.node_count(); ++x) {
      NodeId im = g.image(x);
      if (im == big.crash) {
        nimg[x] = small.crash;
      } else {
        std::uint32_t L = big.locksets[im];
        holds[x] = (L & bit) ? 1 : 0;
        nimg[x] = small.node_of_lockset(L & ~bit);
      }
    }
    find = [&small](NodeId s, Label l, NodeId d) {
      return small.find_edge(s, l, d);
    };
  }

  Ats mid;
  mid.model = small_graph;
  mid.g.add_nodes(g.g.node_count());
  mid.getstate.node_map = nimg;
  mid.returning.assign(g.g.node_count(), 0);
  for (NodeId x = 0; x < g.g.node_count(); ++x)
    if (g.returning[x] && !holds[x]) mid.returning[x] = 1;
  for (NodeId x : g.initial)
    if (!holds[x]) mid.initial.push_back(x);

  std::vector<EdgeId> emap(g.g.edge_count(), kNoEdge);
  for (EdgeId e = 0; e < g.g.edge_count(); ++e) {
    const Edge& ed = g.g.edge(e);
    const Instr& ins = instrs.at(ed.label);
    bool own = (ins.kind == Instr::Kind::Lock ||
                ins.kind == Instr::Kind::Unlock ||
                ins.kind == Instr::Kind::Test) &&
               ins.lock == lock;
    // The environment can no longer touch a local lock.
    if (own && ed.pol == Polarity::Frame) continue;
    Label nl = ed.label;
    if (own) {
      if (ins.kind == Instr::Kind::Test) {
        // A hidden conditional acquire still reads its guard.
        Instr probe;
        probe.kind = Instr::Kind::Test;
        probe.b = ins.b;
        nl = instrs.intern(probe);
      } else {
        nl = plain;
      }
    }
    EdgeId im = find(nimg[ed.src], nl, nimg[ed.dst]);
    if (im == kNoEdge) continue;  // no counterpart in the smaller model
    emap[e] = mid.g.add_edge(ed.src, ed.dst, nl, ed.pol);
    mid.getstate.edge_map.push_back(im);
  }
  for (const Tile& t : g.g.tiles()) {
    if (emap[t.a1] == kNoEdge || emap[t.a2] == kNoEdge ||
        emap[t.b1] == kNoEdge || emap[t.b2] == kNoEdge)
      continue;
    mid.g.add_tile(emap[t.a1], emap[t.a2], emap[t.b1], emap[t.b2]);
  }

  CombineTrace pt;
  Ats out = prune_unreachable(mid, &pt);
  if (trace) {
    std::vector<NodeId> nmap = pt.node_maps[0];
    for (auto& e : emap)
      if (e != kNoEdge) e = pt.edge_maps[0][e];
    trace->node_maps = {std::move(nmap)};
    trace->edge_maps = {std::move(emap)};
    trace->pair_of_node.clear();
    trace->pair_of_edge.clear();
  }
  return out;
}

// =========================================================================
// Critical-section lifting.

namespace {

// Adds every missing Code-Frame or Frame-Frame square whose image commutes
// in the model and whose completing path already exists with the right
// polarities. Obligations depend on edges only, so one pass saturates.
void saturate_squares(Ats& a) {
  const AsyncGraph& model = *a.model;
  for (EdgeId u = 0; u < a.g.edge_count(); ++u) {
    NodeId mid = a.g.edge(u).dst;
    for (EdgeId vp : a.g.out(mid)) {
      if (a.g.edge(vp).pol != Polarity::Frame) continue;
      const auto& downs =
          model.completions(a.image_edge(u), a.image_edge(vp));
      if (downs.empty()) continue;
      auto ups = a.g.completions(u, vp);  // copy: tiles are added below
      for (const auto& [b1, b2] : downs) {
        bool have = false;
        for (const auto& [v, u2] : ups)
          if (a.image_edge(v) == b1 && a.image_edge(u2) == b2) {
            have = true;
            break;
          }
        if (have) continue;
        NodeId start = a.g.edge(u).src;
        NodeId end = a.g.edge(vp).dst;
        bool added = false;
        for (EdgeId v : a.g.out(start)) {
          if (a.image_edge(v) != b1 ||
              a.g.edge(v).pol != a.g.edge(vp).pol)
            continue;
          for (EdgeId u2 : a.g.out(a.g.edge(v).dst)) {
            if (a.image_edge(u2) != b2 ||
                a.g.edge(u2).pol != a.g.edge(u).pol)
              continue;
            if (a.g.edge(u2).dst != end) continue;
            a.g.add_tile(u, vp, v, u2);
            added = true;
            break;
          }
          if (added) break;
        }
      }
    }
  }
}

}  // namespace

Ats lift_critical_ats(ModelSpace& ms, Level lv, std::uint32_t g_mask,
                      int lock, const Ats& g, LiftPlacement* place) {
  InstrTable& instrs = ms.instructions();
  std::uint32_t bit = 1u << lock;
  std::uint32_t small_mask = (g_mask & ms.full_mask()) & ~bit;
  std::uint32_t big_mask = small_mask | bit;

  Instr pi, vi, ti;
  pi.kind = Instr::Kind::Lock;
  pi.lock = lock;
  vi.kind = Instr::Kind::Unlock;
  vi.lock = lock;
  ti.kind = Instr::Kind::Tau;
  Label p_lab = instrs.intern(pi);
  Label v_lab = instrs.intern(vi);
  Label t_lab = instrs.intern(ti);

  const AsyncGraph* big_graph = nullptr;
  NodeId big_crash = kNoNode;
  std::vector<NodeId> img_locked(g.g.node_count()),
      img_unlocked(g.g.node_count());
  std::vector<std::uint8_t> at_crash(g.g.node_count(), 0);
  std::function<EdgeId(NodeId, Label, NodeId)> find;
  // Image of the fragment's own fault step, used to name each node's crash
  // companion when the lock's fault steps need Frame lifts.
  std::vector<EdgeId> small_tau_fault(g.g.node_count(), kNoEdge);
  // Conditional acquires of this lock, paired with their bare probes.
  std::vector<std::pair<Label, Label>> pw_pairs;
  const StatefulModel* small_s = nullptr;

  if (lv == Level::Stateful) {
    const StatefulModel& small = ms.stateful(small_mask);
    const StatefulModel& big = ms.stateful(big_mask);
    small_s = &small;
    for (Label al : ms.alphabet()) {
      const Instr& ai = instrs.at(al);
      if (ai.kind != Instr::Kind::Test || ai.lock != lock) continue;
      Instr probe;
      probe.kind = Instr::Kind::Test;
      probe.b = ai.b;
      pw_pairs.emplace_back(al, instrs.intern(probe));
    }
    big_graph = &big.g;
    big_crash = big.crash;
    for (NodeId x = 0; x < g.g.node_count(); ++x) {
      const MachineState& st = small.states[g.image(x)];
      if (st.crash) {
        at_crash[x] = 1;
        img_locked[x] = img_unlocked[x] = big.crash;
      } else {
        img_locked[x] = big.node_of(MachineState{false, st.mem,
                                                 st.locks | bit});
        img_unlocked[x] = big.node_of(st);
      }
    }
    find = [&big](NodeId s, Label l, NodeId d) {
      return big.find_edge(s, l, d);
    };
  } else {
    const LockModel& small = ms.lock_level(small_mask);
    const LockModel& big = ms.lock_level(big_mask);
    big_graph = &big.g;
    big_crash = big.crash;
    for (NodeId x = 0; x < g.g.node_count(); ++x) {
      NodeId im = g.image(x);
      if (im == small.crash) {
        at_crash[x] = 1;
        img_locked[x] = img_unlocked[x] = big.crash;
      } else {
        std::uint32_t L = small.locksets[im];
        img_locked[x] = big.node_of_lockset(L | bit);
        img_unlocked[x] = big.node_of_lockset(L);
        small_tau_fault[x] = small.find_edge(im, t_lab, small.crash);
      }
    }
    find = [&big](NodeId s, Label l, NodeId d) {
      return big.find_edge(s, l, d);
    };
  }

  Ats out;
  out.model = big_graph;
  std::vector<NodeId> locked(g.g.node_count()), unlocked(g.g.node_count());
  for (NodeId x = 0; x < g.g.node_count(); ++x) {
    locked[x] = out.g.add_node();
    out.getstate.node_map.push_back(img_locked[x]);
    out.returning.push_back(g.returning[x]);
    if (at_crash[x]) {
      unlocked[x] = locked[x];  // one crash serves both zones
    } else {
      unlocked[x] = out.g.add_node();
      out.getstate.node_map.push_back(img_unlocked[x]);
      out.returning.push_back(g.returning[x]);
    }
  }

  std::vector<EdgeId> locked_e(g.g.edge_count()),
      unlocked_e(g.g.edge_count());
  auto copy_edge = [&](EdgeId e, const std::vector<NodeId>& zone,
                       const std::vector<NodeId>& zimg) {
    const Edge& ed = g.g.edge(e);
    EdgeId im = find(zimg[ed.src], ed.label, zimg[ed.dst]);
    EdgeId ne = out.g.add_edge(zone[ed.src], zone[ed.dst], ed.label, ed.pol);
    out.getstate.edge_map.push_back(im);
    return ne;
  };
  for (EdgeId e = 0; e < g.g.edge_count(); ++e) {
    locked_e[e] = copy_edge(e, locked, img_locked);
    unlocked_e[e] = copy_edge(e, unlocked, img_unlocked);
  }

  std::vector<EdgeId> release(g.g.node_count(), kNoEdge),
      acquire(g.g.node_count(), kNoEdge);
  std::vector<EdgeId> fault_seams;
  std::vector<GuardSeam> guard_seams;
  for (NodeId x = 0; x < g.g.node_count(); ++x) {
    if (at_crash[x]) continue;
    release[x] = out.g.add_edge(locked[x], unlocked[x], v_lab,
                                Polarity::Frame);
    out.getstate.edge_map.push_back(
        find(img_locked[x], v_lab, img_unlocked[x]));
    acquire[x] = out.g.add_edge(unlocked[x], locked[x], p_lab,
                                Polarity::Frame);
    out.getstate.edge_map.push_back(
        find(img_unlocked[x], p_lab, img_locked[x]));

    // Conditional acquires of this lock exist in the bigger model but not
    // the smaller one, so the zone copies do not cover them.
    for (const auto& [pw_lab, probe_lab] : pw_pairs) {
      EdgeId im = find(img_unlocked[x], pw_lab, img_locked[x]);
      if (im != kNoEdge) {
        EdgeId ne = out.g.add_edge(unlocked[x], locked[x], pw_lab,
                                   Polarity::Frame);
        out.getstate.edge_map.push_back(im);
        guard_seams.push_back({ne, x, kNoNode, false, false});
      }
      EdgeId fim_l = find(img_locked[x], pw_lab, big_crash);
      EdgeId fim_u = find(img_unlocked[x], pw_lab, big_crash);
      if (fim_l == kNoEdge && fim_u == kNoEdge) continue;
      // The guard reads undefined memory here; aim the lift where the
      // fragment's own probe fault already points.
      NodeId comp = kNoNode;
      EdgeId sf =
          small_s->find_edge(g.image(x), probe_lab, small_s->crash);
      if (sf != kNoEdge)
        for (EdgeId ge : g.g.out(x)) {
          if (g.g.edge(ge).pol != Polarity::Frame) continue;
          if (g.image_edge(ge) == sf) {
            comp = g.g.edge(ge).dst;
            break;
          }
        }
      if (comp == kNoNode) continue;
      if (fim_l != kNoEdge) {
        EdgeId ne = out.g.add_edge(locked[x], locked[comp], pw_lab,
                                   Polarity::Frame);
        out.getstate.edge_map.push_back(fim_l);
        guard_seams.push_back({ne, x, comp, true, true});
      }
      if (fim_u != kNoEdge) {
        EdgeId ne = out.g.add_edge(unlocked[x], locked[comp], pw_lab,
                                   Polarity::Frame);
        out.getstate.edge_map.push_back(fim_u);
        guard_seams.push_back({ne, x, comp, false, true});
      }
    }

    if (lv == Level::Stateless) {
      // The lock model gives every lock instruction a crashing variant, so
      // both zones owe those steps a Frame lift too. The target is the
      // node's own crash companion: where its fragment-level fault steps
      // already point.
      NodeId comp = kNoNode;
      for (EdgeId e : g.g.out(x)) {
        if (g.g.edge(e).pol != Polarity::Frame) continue;
        if (g.image_edge(e) == small_tau_fault[x]) {
          comp = g.g.edge(e).dst;
          break;
        }
      }
      if (comp == kNoNode) continue;
      NodeId target = locked[comp];
      for (Label lab : {p_lab, v_lab}) {
        for (int zone = 0; zone < 2; ++zone) {
          NodeId zsrc = zone ? unlocked[x] : locked[x];
          NodeId zim = zone ? img_unlocked[x] : img_locked[x];
          EdgeId im = find(zim, lab, big_crash);
          if (im == kNoEdge) continue;
          EdgeId ne = out.g.add_edge(zsrc, target, lab, Polarity::Frame);
          out.getstate.edge_map.push_back(im);
          fault_seams.push_back(ne);
        }
      }
    }
  }

  for (const Tile& t : g.g.tiles()) {
    out.g.add_tile(locked_e[t.a1], locked_e[t.a2], locked_e[t.b1],
                   locked_e[t.b2]);
    out.g.add_tile(unlocked_e[t.a1], unlocked_e[t.a2], unlocked_e[t.b1],
                   unlocked_e[t.b2]);
  }

  for (NodeId x : g.initial) {
    out.initial.push_back(locked[x]);
    if (!at_crash[x]) out.initial.push_back(unlocked[x]);
  }

  saturate_squares(out);

  if (place) {
    place->locked = std::move(locked);
    place->unlocked = std::move(unlocked);
    place->locked_edges = std::move(locked_e);
    place->unlocked_edges = std::move(unlocked_e);
    place->release_seam = std::move(release);
    place->acquire_seam = std::move(acquire);
    place->fault_seams = std::move(fault_seams);
    place->guard_seams = std::move(guard_seams);
  }
  return out;
}

// =========================================================================
// Paired combinators.

namespace {

GraphMorphism stitch_glue(const GraphMorphism& m1, const GraphMorphism& m2,
                          const CombineTrace& ts, const CombineTrace& tl,
                          std::size_t out_nodes, std::size_t out_edges) {
  GraphMorphism m;
  m.node_map.assign(out_nodes, kNoNode);
  m.edge_map.assign(out_edges, kNoEdge);
  for (int k = 0; k < 2; ++k) {
    const GraphMorphism& child = k ? m2 : m1;
    const auto& sn = ts.node_maps[k];
    const auto& ln = tl.node_maps[k];
    for (NodeId x = 0; x < sn.size(); ++x) {
      if (sn[x] == kNoNode) continue;
      NodeId lx = child.node_map[x];
      m.node_map[sn[x]] = lx == kNoNode ? kNoNode : ln[lx];
    }
    const auto& se = ts.edge_maps[k];
    const auto& le = tl.edge_maps[k];
    for (EdgeId e = 0; e < se.size(); ++e) {
      if (se[e] == kNoEdge) continue;
      EdgeId lx = child.edge_map[e];
      m.edge_map[se[e]] = lx == kNoEdge ? kNoEdge : le[lx];
    }
  }
  return m;
}

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

GraphMorphism stitch_product(const GraphMorphism& m1, const GraphMorphism& m2,
                             const CombineTrace& ts, const CombineTrace& tl,
                             std::size_t out_nodes, std::size_t out_edges) {
  std::unordered_map<std::uint64_t, NodeId> lnode;
  for (NodeId i = 0; i < tl.pair_of_node.size(); ++i)
    lnode[pair_key(tl.pair_of_node[i].first, tl.pair_of_node[i].second)] = i;
  std::unordered_map<std::uint64_t, EdgeId> ledge;
  for (EdgeId i = 0; i < tl.pair_of_edge.size(); ++i)
    ledge[pair_key(tl.pair_of_edge[i].first, tl.pair_of_edge[i].second)] = i;

  GraphMorphism m;
  m.node_map.assign(out_nodes, kNoNode);
  m.edge_map.assign(out_edges, kNoEdge);
  for (NodeId i = 0; i < out_nodes; ++i) {
    auto [x1, x2] = ts.pair_of_node[i];
    NodeId y1 = m1.node_map[x1], y2 = m2.node_map[x2];
    if (y1 == kNoNode || y2 == kNoNode) continue;
    auto it = lnode.find(pair_key(y1, y2));
    if (it != lnode.end()) m.node_map[i] = it->second;
  }
  for (EdgeId i = 0; i < out_edges; ++i) {
    auto [e1, e2] = ts.pair_of_edge[i];
    EdgeId f1 = m1.edge_map[e1], f2 = m2.edge_map[e2];
    if (f1 == kNoEdge || f2 == kNoEdge) continue;
    auto it = ledge.find(pair_key(f1, f2));
    if (it != ledge.end()) m.edge_map[i] = it->second;
  }
  return m;
}

CodeSem leaf_from_steps(ModelSpace& ms, std::uint32_t mask,
                        const std::vector<EdgeId>& steps_s) {
  const StatefulModel& sm = ms.stateful(mask);
  const LockModel& lm = ms.lock_level(mask);
  const GraphMorphism& era = ms.erasure(mask);

  std::set<EdgeId> sl;
  std::set<Label> labels;
  for (EdgeId e : steps_s) {
    EdgeId le = era.edge_map[e];
    if (le == kNoEdge) continue;
    sl.insert(le);
    labels.insert(lm.g.edge(le).label);
  }
  // Memory faults are invisible downstairs, so the lock level pairs every
  // step it performs with a crashing variant of the same label.
  for (EdgeId le = 0; le < lm.g.edge_count(); ++le)
    if (lm.g.edge(le).dst == lm.crash && labels.count(lm.g.edge(le).label))
      sl.insert(le);
  std::vector<EdgeId> steps_l(sl.begin(), sl.end());

  CombineTrace ts, tl;
  CodeSem out;
  out.lockmask = mask;
  out.s = step_lift_ats(sm.g, steps_s, &ts);
  out.l = step_lift_ats(lm.g, steps_l, &tl);
  out.project.node_map.assign(out.s.g.node_count(), kNoNode);
  out.project.edge_map.assign(out.s.g.edge_count(), kNoEdge);
  for (NodeId v = 0; v < sm.g.node_count(); ++v) {
    NodeId w = era.node_map[v];
    for (int copy = 0; copy < 2; ++copy) {
      NodeId a = ts.node_maps[copy][v];
      if (a == kNoNode) continue;
      out.project.node_map[a] = tl.node_maps[copy][w];
    }
  }
  for (EdgeId e = 0; e < sm.g.edge_count(); ++e) {
    EdgeId w = era.edge_map[e];
    for (int part = 0; part < 3; ++part) {
      EdgeId a = ts.edge_maps[part][e];
      if (a == kNoEdge) continue;
      if (w != kNoEdge) out.project.edge_map[a] = tl.edge_maps[part][w];
    }
  }
  return out;
}

}  // namespace

CodeSem sem_instr(ModelSpace& ms, const Instr& i, std::uint32_t lockmask) {
  lockmask &= ms.full_mask();
  Label lab = ms.instructions().intern(i);
  const StatefulModel& sm = ms.stateful(lockmask);
  std::vector<EdgeId> steps;
  for (EdgeId e = 0; e < sm.g.edge_count(); ++e)
    if (sm.g.edge(e).label == lab) steps.push_back(e);
  return leaf_from_steps(ms, lockmask, steps);
}

CodeSem sem_dead(ModelSpace& ms, std::uint32_t lockmask) {
  lockmask &= ms.full_mask();
  const StatefulModel& sm = ms.stateful(lockmask);
  const LockModel& lm = ms.lock_level(lockmask);
  const GraphMorphism& era = ms.erasure(lockmask);
  CodeSem out;
  out.lockmask = lockmask;
  out.s = frame_copy(sm.g);
  out.l = frame_copy(lm.g);
  // Frame copies keep the model's node and edge numbering.
  out.project = era;
  return out;
}

CodeSem sem_seq(ModelSpace& ms, const CodeSem& a, const CodeSem& b) {
  (void)ms;
  CodeSem out;
  out.lockmask = a.lockmask;
  out.truncated = a.truncated || b.truncated;
  CombineTrace ts, tl;
  out.s = seq_ats(a.s, b.s, &ts);
  out.l = seq_ats(a.l, b.l, &tl);
  out.project = stitch_glue(a.project, b.project, ts, tl,
                            out.s.g.node_count(), out.s.g.edge_count());
  return out;
}

CodeSem sem_sum(ModelSpace& ms, const CodeSem& a, const CodeSem& b) {
  (void)ms;
  CodeSem out;
  out.lockmask = a.lockmask;
  out.truncated = a.truncated || b.truncated;
  CombineTrace ts, tl;
  out.s = sum_ats(a.s, b.s, &ts);
  out.l = sum_ats(a.l, b.l, &tl);
  out.project = stitch_glue(a.project, b.project, ts, tl,
                            out.s.g.node_count(), out.s.g.edge_count());
  return out;
}

CodeSem sem_par(ModelSpace& ms, const CodeSem& a, const CodeSem& b) {
  (void)ms;
  CodeSem out;
  out.lockmask = a.lockmask;
  out.truncated = a.truncated || b.truncated;
  CombineTrace ts, tl;
  out.s = parallel_ats(a.s, b.s, diagonal_ops(), &ts);
  out.l = parallel_ats(a.l, b.l, diagonal_ops(), &tl);
  out.project = stitch_product(a.project, b.project, ts, tl,
                               out.s.g.node_count(), out.s.g.edge_count());
  return out;
}

CodeSem sem_guard_filter(ModelSpace& ms, const CodeSem& g, const BoolPtr& b,
                         bool keep_true) {
  CodeSem out;
  out.lockmask = g.lockmask;
  out.truncated = g.truncated;
  CombineTrace t;
  out.s = guard_filter_ats(ms.stateful(g.lockmask), g.s, b, keep_true, &t);
  out.l = g.l;  // the lock level cannot observe memory
  out.project.node_map.assign(out.s.g.node_count(), kNoNode);
  out.project.edge_map.assign(out.s.g.edge_count(), kNoEdge);
  for (NodeId x = 0; x < t.node_maps[0].size(); ++x)
    if (t.node_maps[0][x] != kNoNode)
      out.project.node_map[t.node_maps[0][x]] = g.project.node_map[x];
  for (EdgeId e = 0; e < t.edge_maps[0].size(); ++e)
    if (t.edge_maps[0][e] != kNoEdge)
      out.project.edge_map[t.edge_maps[0][e]] = g.project.edge_map[e];
  return out;
}

CodeSem sem_guard_abort(ModelSpace& ms, std::uint32_t lockmask,
                        const BoolPtr& b) {
  lockmask &= ms.full_mask();
  Instr probe;
  probe.kind = Instr::Kind::Test;
  probe.b = b;
  Label lab = ms.instructions().intern(probe);
  const StatefulModel& sm = ms.stateful(lockmask);
  std::vector<EdgeId> steps;
  for (EdgeId e = 0; e < sm.g.edge_count(); ++e)
    if (sm.g.edge(e).label == lab && sm.g.edge(e).dst == sm.crash)
      steps.push_back(e);
  return leaf_from_steps(ms, lockmask, steps);
}

CodeSem sem_hide(ModelSpace& ms, const CodeSem& g, int lock) {
  CodeSem out;
  out.lockmask = g.lockmask & ~(1u << lock);
  out.truncated = g.truncated;
  CombineTrace ts, tl;
  out.s = hide_resource_ats(ms, Level::Stateful, g.lockmask, lock, g.s, &ts);
  out.l = hide_resource_ats(ms, Level::Stateless, g.lockmask, lock, g.l, &tl);
  out.project.node_map.assign(out.s.g.node_count(), kNoNode);
  out.project.edge_map.assign(out.s.g.edge_count(), kNoEdge);
  for (NodeId x = 0; x < ts.node_maps[0].size(); ++x) {
    if (ts.node_maps[0][x] == kNoNode) continue;
    NodeId lx = g.project.node_map[x];
    out.project.node_map[ts.node_maps[0][x]] =
        lx == kNoNode ? kNoNode : tl.node_maps[0][lx];
  }
  for (EdgeId e = 0; e < ts.edge_maps[0].size(); ++e) {
    if (ts.edge_maps[0][e] == kNoEdge) continue;
    EdgeId le = g.project.edge_map[e];
    out.project.edge_map[ts.edge_maps[0][e]] =
        le == kNoEdge ? kNoEdge : tl.edge_maps[0][le];
  }
  return out;
}

CodeSem sem_lift(ModelSpace& ms, const CodeSem& g, int lock) {
  CodeSem out;
  out.lockmask = g.lockmask | (1u << lock);
  out.truncated = g.truncated;
  LiftPlacement ps, pl;
  out.s = lift_critical_ats(ms, Level::Stateful, g.lockmask, lock, g.s, &ps);
  out.l =
      lift_critical_ats(ms, Level::Stateless, g.lockmask, lock, g.l, &pl);
  out.project.node_map.assign(out.s.g.node_count(), kNoNode);
  out.project.edge_map.assign(out.s.g.edge_count(), kNoEdge);
  for (NodeId x = 0; x < ps.locked.size(); ++x) {
    NodeId lx = g.project.node_map[x];
    if (lx == kNoNode) continue;
    out.project.node_map[ps.locked[x]] = pl.locked[lx];
    out.project.node_map[ps.unlocked[x]] = pl.unlocked[lx];
  }
  for (EdgeId e = 0; e < ps.locked_edges.size(); ++e) {
    EdgeId le = g.project.edge_map[e];
    if (le == kNoEdge) continue;
    out.project.edge_map[ps.locked_edges[e]] = pl.locked_edges[le];
    out.project.edge_map[ps.unlocked_edges[e]] = pl.unlocked_edges[le];
  }
  for (NodeId x = 0; x < ps.release_seam.size(); ++x) {
    NodeId lx = g.project.node_map[x];
    if (lx == kNoNode) continue;
    if (ps.release_seam[x] != kNoEdge && pl.release_seam[lx] != kNoEdge)
      out.project.edge_map[ps.release_seam[x]] = pl.release_seam[lx];
    if (ps.acquire_seam[x] != kNoEdge && pl.acquire_seam[lx] != kNoEdge)
      out.project.edge_map[ps.acquire_seam[x]] = pl.acquire_seam[lx];
  }
  // Conditional acquires shadow the bare acquire at the lock level; their
  // fault variants land on the crash companion's acquire fault.
  Instr pi;
  pi.kind = Instr::Kind::Lock;
  pi.lock = lock;
  Label p_lab = ms.instructions().intern(pi);
  for (const GuardSeam& gs : ps.guard_seams) {
    NodeId lx = g.project.node_map[gs.owner];
    if (lx == kNoNode) continue;
    if (!gs.fault) {
      out.project.edge_map[gs.edge] = pl.acquire_seam[lx];
      continue;
    }
    NodeId lcomp = g.project.node_map[gs.companion];
    if (lcomp == kNoNode) continue;
    NodeId src = gs.from_locked ? pl.locked[lx] : pl.unlocked[lx];
    NodeId dst = pl.locked[lcomp];
    for (EdgeId e : out.l.g.out(src))
      if (out.l.g.edge(e).pol == Polarity::Frame &&
          out.l.g.edge(e).label == p_lab && out.l.g.edge(e).dst == dst) {
        out.project.edge_map[gs.edge] = e;
        break;
      }
  }
  return out;
}

// =========================================================================
// The program interpretation.

namespace {

CodeSem sem_loop(ModelSpace& ms, const CodePtr& c, std::uint32_t mask,
                 const SemOptions& opt) {
  CodeSem body = sem_code(ms, c->c1, mask, opt);
  // The re-test at the head of every round reads the guard, like the
  // conditional entry does.
  Instr probe;
  if (!trivially_true(c->guard)) {
    probe.kind = Instr::Kind::Test;
    probe.b = c->guard;
  }
  CodeSem step = sem_instr(ms, probe, mask);
  CodeSem pre = sem_seq(ms, sem_guard_filter(ms, step, c->guard, true), body);
  CodeSem stop = sem_guard_filter(ms, step, c->guard, false);
  CodeSem crash = sem_guard_abort(ms, mask, c->guard);

  CodeSem cur = sem_dead(ms, mask);
  bool settled = false;
  for (int k = 0; k < opt.loop_bound && !settled; ++k) {
    CodeSem next =
        sem_sum(ms, sem_sum(ms, sem_seq(ms, pre, cur), stop), crash);
    settled = ats_match(next.s, cur.s, opt.match_budget).matched() &&
              ats_match(next.l, cur.l, opt.match_budget).matched();
    cur = std::move(next);
  }
  if (!settled) cur.truncated = true;
  return cur;
}

}  // namespace

CodeSem sem_code(ModelSpace& ms, const CodePtr& c, std::uint32_t lockmask,
                 const SemOptions& opt) {
  lockmask &= ms.full_mask();
  switch (c->kind) {
    case Code::Kind::Skip: {
      Instr nop;
      return sem_instr(ms, nop, lockmask);
    }
    case Code::Kind::Assign: {
      Instr i;
      i.kind = Instr::Kind::Assign;
      i.var = c->var;
      i.e1 = c->e1;
      return sem_instr(ms, i, lockmask);
    }
    case Code::Kind::Load: {
      Instr i;
      i.kind = Instr::Kind::Load;
      i.var = c->var;
      i.e1 = c->e1;
      return sem_instr(ms, i, lockmask);
    }
    case Code::Kind::Store: {
      Instr i;
      i.kind = Instr::Kind::Store;
      i.e1 = c->e1;
      i.e2 = c->e2;
      return sem_instr(ms, i, lockmask);
    }
    case Code::Kind::Dispose: {
      Instr i;
      i.kind = Instr::Kind::Dispose;
      i.e1 = c->e1;
      return sem_instr(ms, i, lockmask);
    }
    case Code::Kind::Malloc: {
      // The location is chosen nondeterministically: one pinned allocation
      // per location, merged over their shared borders.
      const Config& cfg = ms.config();
      bool first = true;
      CodeSem acc;
      for (std::size_t l = 0; l < cfg.locations.size(); ++l) {
        Instr i;
        i.kind = Instr::Kind::Alloc;
        i.var = c->var;
        i.e1 = c->e1;
        i.loc = static_cast<int>(l);
        CodeSem leaf = sem_instr(ms, i, lockmask);
        acc = first ? std::move(leaf) : sem_sum(ms, acc, leaf);
        first = false;
      }
      if (first) acc = sem_dead(ms, lockmask);
      return acc;
    }
    case Code::Kind::Seq:
      return sem_seq(ms, sem_code(ms, c->c1, lockmask, opt),
                     sem_code(ms, c->c2, lockmask, opt));
    case Code::Kind::Par:
      return sem_par(ms, sem_code(ms, c->c1, lockmask, opt),
                     sem_code(ms, c->c2, lockmask, opt));
    case Code::Kind::If: {
      // The entry step carries the guard's read footprint, so an
      // environment edit of the guard does not commute with the branch
      // decision. A plain nop entry would owe the model a swap that the
      // discarded branch can no longer provide.
      Instr probe;
      if (!trivially_true(c->guard)) {
        probe.kind = Instr::Kind::Test;
        probe.b = c->guard;
      }
      CodeSem step = sem_instr(ms, probe, lockmask);
      CodeSem yes =
          sem_seq(ms, sem_guard_filter(ms, step, c->guard, true),
                  sem_code(ms, c->c1, lockmask, opt));
      CodeSem no =
          sem_seq(ms, sem_guard_filter(ms, step, c->guard, false),
                  sem_code(ms, c->c2, lockmask, opt));
      CodeSem crash = sem_guard_abort(ms, lockmask, c->guard);
      return sem_sum(ms, sem_sum(ms, yes, no), crash);
    }
    case Code::Kind::While:
      return sem_loop(ms, c, lockmask, opt);
    case Code::Kind::Resource:
      return sem_hide(
          ms, sem_code(ms, c->c1, lockmask | (1u << c->lock), opt), c->lock);
    case Code::Kind::With: {
      std::uint32_t inner_mask = lockmask & ~(1u << c->lock);
      CodeSem body = sem_lift(ms, sem_code(ms, c->c1, inner_mask, opt),
                              c->lock);
      // The entry checks the guard and takes the lock in one indivisible
      // step; it waits while the guard is false and faults when the guard
      // reads undefined memory, so no separate filter or abort branch is
      // needed.
      Instr pi, vi;
      pi.kind = Instr::Kind::Lock;
      pi.lock = c->lock;
      if (!trivially_true(c->guard)) {
        pi.kind = Instr::Kind::Test;
        pi.b = c->guard;
      }
      vi.kind = Instr::Kind::Unlock;
      vi.lock = c->lock;
      return sem_seq(ms, sem_seq(ms, sem_instr(ms, pi, lockmask), body),
                     sem_instr(ms, vi, lockmask));
    }
  }
  return sem_dead(ms, lockmask);
}

// =========================================================================
// Structural checks of the pairing.

std::vector<std::string> check_code_sem(ModelSpace& ms, const CodeSem& k) {
  std::vector<std::string> out;
  auto cap_push = [&out, n = std::size_t{0}](std::string msg) mutable {
    if (n < 8) out.push_back(std::move(msg));
    ++n;
  };

  MorphismCheckOptions mo;
  mo.check_polarity = true;
  mo.check_labels = false;
  for (auto& p : check_graph_morphism(k.s.g, k.l.g, k.project, mo))
    cap_push("projection: " + p);

  const GraphMorphism& era = ms.erasure(k.lockmask);
  for (NodeId x = 0; x < k.s.g.node_count(); ++x) {
    NodeId lx = k.project.node_map[x];
    if (lx == kNoNode) {
      cap_push("node " + std::to_string(x) + " has no projection");
      continue;
    }
    if (k.l.image(lx) != era.node_map[k.s.image(x)])
      cap_push("node " + std::to_string(x) +
               ": projection and state erasure disagree");
  }
  for (EdgeId e = 0; e < k.s.g.edge_count(); ++e) {
    EdgeId le = k.project.edge_map[e];
    if (le == kNoEdge) {
      cap_push("edge " + std::to_string(e) + " has no projection");
      continue;
    }
    if (k.l.image_edge(le) != era.edge_map[k.s.image_edge(e)])
      cap_push("edge " + std::to_string(e) +
               ": projection and state erasure disagree");
  }

  std::vector<std::uint8_t> linit(k.l.g.node_count(), 0);
  for (NodeId x : k.l.initial) linit[x] = 1;
  for (NodeId x : k.s.initial) {
    NodeId lx = k.project.node_map[x];
    if (lx == kNoNode || !linit[lx])
      cap_push("initial node " + std::to_string(x) +
               " does not project to an initial node");
  }
  for (NodeId x = 0; x < k.s.g.node_count(); ++x) {
    if (!k.s.returning[x]) continue;
    NodeId lx = k.project.node_map[x];
    if (lx == kNoNode || !k.l.returning[lx])
      cap_push("returning node " + std::to_string(x) +
               " does not project to a returning node");
  }
  return out;
}

}  // namespace asyncsl
