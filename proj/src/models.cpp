#include "asyncsl/models.hpp"

#include <algorithm>

namespace asyncsl {

EdgeId StatefulModel::find_edge(NodeId src, Label label, NodeId dst) const {
  for (EdgeId e : g.out(src))
    if (g.edge(e).label == label && g.edge(e).dst == dst) return e;
  return kNoEdge;
}

EdgeId LockModel::find_edge(NodeId src, Label label, NodeId dst) const {
  for (EdgeId e : g.out(src))
    if (g.edge(e).label == label && g.edge(e).dst == dst) return e;
  return kNoEdge;
}

StatefulModel build_stateful_model(const Config& cfg, InstrTable& instrs,
                                   const std::vector<Label>& alphabet,
                                   std::uint32_t lockmask) {
  StatefulModel m;
  m.cfg = &cfg;
  m.instrs = &instrs;
  std::uint32_t full = (1u << cfg.locks.size()) - 1;
  m.lockmask = lockmask & full;

  // Nodes: every memory over every usable lock set, then the crash node.
  for_each_memory(cfg, [&](const Memory& mem) {
    for (std::uint32_t L = 0; L <= full; ++L) {
      if ((L & ~m.lockmask) != 0) continue;
      MachineState s{false, mem, L};
      NodeId v = m.g.add_node();
      m.states.push_back(s);
      m.index.emplace(std::move(s), v);
    }
  });
  m.crash = m.g.add_node();
  m.states.push_back(MachineState::crashed());
  m.index.emplace(MachineState::crashed(), m.crash);

  // Edges.
  for (NodeId v = 0; v < m.crash; ++v) {
    const MachineState& s = m.states[v];
    for (Label l : alphabet) {
      const Instr& i = instrs.at(l);
      if ((i.kind == Instr::Kind::Lock || i.kind == Instr::Kind::Unlock ||
           (i.kind == Instr::Kind::Test && i.lock >= 0)) &&
          !((m.lockmask >> i.lock) & 1u))
        continue;
      StepResult r = step(cfg, s, i);
      if (r.cls == StepClass::Blocked) continue;
      bool fault = r.cls == StepClass::Fault;
      NodeId dst = fault ? m.crash : m.node_of(r.next);
      m.g.add_edge(v, dst, l, Polarity::Code);
      m.edge_fp.push_back(footprint(cfg, s.mem, i, fault));
      m.edge_fault.push_back(fault);
    }
  }

  // Tiles: both steps normal, footprints independent, and the two residual
  // steps meet in the same state.
  for (NodeId v = 0; v < m.crash; ++v) {
    const auto& outs = m.g.out(v);
    for (std::size_t a = 0; a < outs.size(); ++a) {
      EdgeId u = outs[a];
      if (m.edge_fault[u]) continue;
      for (std::size_t b = a; b < outs.size(); ++b) {
        EdgeId w = outs[b];
        if (m.edge_fault[w]) continue;
        if (!independent(m.edge_fp[u], m.edge_fp[w])) continue;
        const Instr& mu = instrs.at(m.g.edge(u).label);
        const Instr& mw = instrs.at(m.g.edge(w).label);
        StepResult ru = step(cfg, m.states[m.g.edge(u).dst], mw);
        StepResult rw = step(cfg, m.states[m.g.edge(w).dst], mu);
        if (ru.cls != StepClass::Normal || rw.cls != StepClass::Normal)
          continue;
        if (!(ru.next == rw.next)) continue;
        NodeId meet = m.node_of(ru.next);
        EdgeId w2 = m.find_edge(m.g.edge(u).dst, m.g.edge(w).label, meet);
        EdgeId u2 = m.find_edge(m.g.edge(w).dst, m.g.edge(u).label, meet);
        if (w2 == kNoEdge || u2 == kNoEdge) continue;
        m.g.add_tile(u, w2, w, u2);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

LockModel build_lock_model(const Config& cfg, InstrTable& instrs,
                           std::uint32_t lockmask) {
  LockModel m;
  m.cfg = &cfg;
  m.instrs = &instrs;
  std::uint32_t full = (1u << cfg.locks.size()) - 1;
  m.lockmask = lockmask & full;
  for (std::uint32_t L = 0; L <= full; ++L) {
    if ((L & ~m.lockmask) != 0) continue;
    NodeId v = m.g.add_node();
    m.locksets.push_back(L);
    m.index.emplace(L, v);
  }
  m.crash = m.g.add_node();

  std::vector<Label> alphabet = lock_level_alphabet(cfg, instrs);
  for (NodeId v = 0; v < m.crash; ++v) {
    std::uint32_t L = m.locksets[v];
    for (Label l : alphabet) {
      const Instr& i = instrs.at(l);
      switch (i.kind) {
        case Instr::Kind::Tau:
        case Instr::Kind::AllocAt:
        case Instr::Kind::DisposeAt:
          m.g.add_edge(v, v, l, Polarity::Code);
          break;
        case Instr::Kind::Lock:
          if (!((m.lockmask >> i.lock) & 1u)) continue;
          if (!(L & (1u << i.lock)))
            m.g.add_edge(v, m.node_of_lockset(L | (1u << i.lock)), l,
                         Polarity::Code);
          break;
        case Instr::Kind::Unlock:
          if (!((m.lockmask >> i.lock) & 1u)) continue;
          if (L & (1u << i.lock))
            m.g.add_edge(v, m.node_of_lockset(L & ~(1u << i.lock)), l,
                         Polarity::Code);
          break;
        default:
          break;
      }
      // Memory faults are invisible here, so every instruction can crash.
      m.g.add_edge(v, m.crash, l, Polarity::Code);
    }
  }

  for (NodeId L = 0; L < m.crash; ++L) {
    const auto& outs = m.g.out(L);
    for (std::size_t a = 0; a < outs.size(); ++a) {
      EdgeId u = outs[a];
      Footprint fu = lock_footprint(cfg, instrs.at(m.g.edge(u).label));
      for (std::size_t b = a; b < outs.size(); ++b) {
        EdgeId w = outs[b];
        Footprint fw = lock_footprint(cfg, instrs.at(m.g.edge(w).label));
        if (!independent(fu, fw)) continue;
        // All co-final completions of the square.
        for (EdgeId w2 : m.g.out(m.g.edge(u).dst)) {
          if (m.g.edge(w2).label != m.g.edge(w).label) continue;
          for (EdgeId u2 : m.g.out(m.g.edge(w).dst)) {
            if (m.g.edge(u2).label != m.g.edge(u).label) continue;
            if (m.g.edge(w2).dst != m.g.edge(u2).dst) continue;
            m.g.add_tile(u, w2, w, u2);
          }
        }
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

std::vector<Label> standard_alphabet(const Config& cfg, InstrTable& instrs) {
  std::vector<Label> out;
  auto add = [&](Instr i) { out.push_back(instrs.intern(i)); };
  add(Instr{});  // nop
  for (std::size_t x = 0; x < cfg.vars.size(); ++x) {
    for (int v : cfg.values) {
      Instr i;
      i.kind = Instr::Kind::Assign;
      i.var = static_cast<int>(x);
      i.e1 = e_const(v);
      add(i);
    }
    for (std::size_t l = 0; l < cfg.locations.size(); ++l) {
      Instr i;
      i.kind = Instr::Kind::Load;
      i.var = static_cast<int>(x);
      i.e1 = e_const(cfg.locations[l]);
      add(i);
      for (int v : cfg.values) {
        Instr a;
        a.kind = Instr::Kind::Alloc;
        a.var = static_cast<int>(x);
        a.e1 = e_const(v);
        a.loc = static_cast<int>(l);
        add(a);
      }
    }
  }
  for (std::size_t l = 0; l < cfg.locations.size(); ++l) {
    for (int v : cfg.values) {
      Instr i;
      i.kind = Instr::Kind::Store;
      i.e1 = e_const(cfg.locations[l]);
      i.e2 = e_const(v);
      add(i);
    }
    Instr d;
    d.kind = Instr::Kind::Dispose;
    d.e1 = e_const(cfg.locations[l]);
    add(d);
  }
  for (std::size_t r = 0; r < cfg.locks.size(); ++r) {
    Instr p;
    p.kind = Instr::Kind::Lock;
    p.lock = static_cast<int>(r);
    add(p);
    Instr q;
    q.kind = Instr::Kind::Unlock;
    q.lock = static_cast<int>(r);
    add(q);
  }
  return out;
}

std::vector<Label> lock_level_alphabet(const Config& cfg, InstrTable& instrs) {
  std::vector<Label> out;
  auto add = [&](Instr i) { out.push_back(instrs.intern(i)); };
  Instr t;
  t.kind = Instr::Kind::Tau;
  add(t);
  for (std::size_t r = 0; r < cfg.locks.size(); ++r) {
    Instr p;
    p.kind = Instr::Kind::Lock;
    p.lock = static_cast<int>(r);
    add(p);
    Instr q;
    q.kind = Instr::Kind::Unlock;
    q.lock = static_cast<int>(r);
    add(q);
  }
  for (std::size_t l = 0; l < cfg.locations.size(); ++l) {
    Instr a;
    a.kind = Instr::Kind::AllocAt;
    a.loc = static_cast<int>(l);
    add(a);
    Instr d;
    d.kind = Instr::Kind::DisposeAt;
    d.loc = static_cast<int>(l);
    add(d);
  }
  return out;
}

Instr erase_instr(const Config& cfg, const Instr& full, const Memory& at,
                  bool fault) {
  Instr tau;
  tau.kind = Instr::Kind::Tau;
  switch (full.kind) {
    case Instr::Kind::Lock:
    case Instr::Kind::Unlock:
      return full;
    case Instr::Kind::Alloc: {
      if (fault) return tau;  // no address was determined
      Instr a;
      a.kind = Instr::Kind::AllocAt;
      a.loc = full.loc;
      return a;
    }
    case Instr::Kind::Dispose: {
      StackView view(cfg, at.cells.data());
      auto v = eval_expr(view, full.e1);
      if (!v) return tau;
      int li = cfg.location_index(*v);
      if (li < 0) return tau;
      Instr d;
      d.kind = Instr::Kind::DisposeAt;
      d.loc = li;
      return d;
    }
    case Instr::Kind::Tau:
    case Instr::Kind::AllocAt:
    case Instr::Kind::DisposeAt:
      return full;  // already lock-level
    case Instr::Kind::Test: {
      if (full.lock < 0) return tau;
      // A conditional acquire synchronizes exactly like the bare one.
      Instr p;
      p.kind = Instr::Kind::Lock;
      p.lock = full.lock;
      return p;
    }
    default:
      return tau;
  }
}

GraphMorphism erasure_morphism(const StatefulModel& sm, const LockModel& lm) {
  const Config& cfg = *sm.cfg;
  GraphMorphism mor;
  mor.node_map.resize(sm.g.node_count());
  mor.edge_map.resize(sm.g.edge_count());
  for (NodeId v = 0; v < sm.g.node_count(); ++v) {
    const MachineState& s = sm.states[v];
    mor.node_map[v] = s.crash ? lm.crash : lm.node_of_lockset(s.locks);
  }
  for (EdgeId e = 0; e < sm.g.edge_count(); ++e) {
    const Edge& ed = sm.g.edge(e);
    const MachineState& src = sm.states[ed.src];
    Instr lock_instr = erase_instr(cfg, sm.instrs->at(ed.label), src.mem,
                                   sm.edge_fault[e]);
    NodeId lsrc = mor.node_map[ed.src];
    NodeId ldst = mor.node_map[ed.dst];
    EdgeId found = kNoEdge;
    for (EdgeId le : lm.g.out(lsrc)) {
      if (lm.g.edge(le).dst != ldst) continue;
      if (instr_equal(lm.instrs->at(lm.g.edge(le).label), lock_instr)) {
        found = le;
        break;
      }
    }
    mor.edge_map[e] = found;
  }
  return mor;
}

// ---------------------------------------------------------------------------

Footprint perturbation_footprint(const Config& cfg, const MachineState& s,
                                 const Instr& i) {
  Footprint fp;
  StepResult base = step(cfg, s, i);
  int top = static_cast<int>(cfg.values.size()) - 1;
  std::size_t ncells = cfg.cell_count();

  if (base.cls == StepClass::Normal) {
    // Allocation footprint: heap cells whose definedness flipped. Lock
    // footprint: the lock-word delta.
    for (std::size_t l = 0; l < cfg.locations.size(); ++l) {
      std::size_t c = cfg.loc_cell(l);
      if ((s.mem.cells[c] < 0) != (base.next.mem.cells[c] < 0))
        fp.alloc |= 1ull << c;
    }
    fp.lock = s.locks ^ base.next.locks;
  }

  for (std::size_t c = 0; c < ncells; ++c) {
    bool reads = false, writes = false;
    for (int w = -1; w <= top; ++w) {
      MachineState v = s;
      v.mem.cells[c] = static_cast<signed char>(w);
      StepResult r = step(cfg, v, i);
      if (r.cls != base.cls) {
        reads = true;
        continue;
      }
      if (r.cls != StepClass::Normal) continue;
      if (r.next.mem.cells[c] != v.mem.cells[c]) writes = true;
      for (std::size_t c2 = 0; c2 < ncells && !reads; ++c2) {
        if (c2 == c) continue;
        if (base.cls == StepClass::Normal &&
            r.next.mem.cells[c2] != base.next.mem.cells[c2])
          reads = true;
      }
      if (base.cls == StepClass::Normal && r.next.locks != base.next.locks)
        reads = true;
    }
    if (reads) fp.rd |= 1ull << c;
    if (writes) fp.wr |= 1ull << c;
  }
  return fp;
}

OracleReport residual_oracle(const StatefulModel& sm, std::size_t pair_cap) {
  const Config& cfg = *sm.cfg;
  OracleReport rep;
  for (NodeId v = 0; v < sm.g.node_count(); ++v) {
    if (v == sm.crash) continue;
    const auto& outs = sm.g.out(v);
    for (std::size_t a = 0; a < outs.size(); ++a) {
      if (sm.edge_fault[outs[a]]) continue;
      for (std::size_t b = a; b < outs.size(); ++b) {
        if (sm.edge_fault[outs[b]]) continue;
        if (rep.pairs_checked >= pair_cap) return rep;
        ++rep.pairs_checked;
        EdgeId u = outs[a], w = outs[b];
        const Instr& mu = sm.instrs->at(sm.g.edge(u).label);
        const Instr& mw = sm.instrs->at(sm.g.edge(w).label);
        const MachineState& s = sm.states[v];

        Footprint fu = perturbation_footprint(cfg, s, mu);
        Footprint fw = perturbation_footprint(cfg, s, mw);
        bool oracle_tile = independent(fu, fw);
        if (oracle_tile) {
          StepResult ru = step(cfg, sm.states[sm.g.edge(u).dst], mw);
          StepResult rw = step(cfg, sm.states[sm.g.edge(w).dst], mu);
          oracle_tile = ru.cls == StepClass::Normal &&
                        rw.cls == StepClass::Normal && ru.next == rw.next;
        }

        // Is there a tile whose two sides start with u and w?
        bool model_tile = false;
        for (EdgeId x : sm.g.out(sm.g.edge(u).dst)) {
          for (auto& [c1, c2] : sm.g.completions(u, x)) {
            (void)c2;
            if (c1 == w) {
              model_tile = true;
              break;
            }
          }
          if (model_tile) break;
        }
        if (model_tile != oracle_tile)
          rep.mismatches.push_back({v, u, w, model_tile, oracle_tile});
      }
    }
  }
  return rep;
}

}  // namespace asyncsl
