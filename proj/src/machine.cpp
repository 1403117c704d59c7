#include "asyncsl/machine.hpp"

namespace asyncsl {

bool instr_equal(const Instr& a, const Instr& b) {
  return a.kind == b.kind && a.var == b.var && a.lock == b.lock &&
         a.loc == b.loc && expr_equal(a.e1, b.e1) && expr_equal(a.e2, b.e2) &&
         bool_equal(a.b, b.b);
}

std::size_t instr_hash(const Instr& i) {
  std::size_t h = static_cast<std::size_t>(i.kind);
  h = h * 1000003 + static_cast<std::size_t>(i.var + 1);
  h = h * 1000003 + static_cast<std::size_t>(i.lock + 1);
  h = h * 1000003 + static_cast<std::size_t>(i.loc + 1);
  h = h * 1000003 + expr_hash(i.e1);
  h = h * 1000003 + expr_hash(i.e2);
  h = h * 1000003 + bool_hash(i.b);
  return h;
}

std::string instr_to_string(const Config& cfg, const Instr& i) {
  switch (i.kind) {
    case Instr::Kind::Nop:
      return "nop";
    case Instr::Kind::Assign:
      return cfg.vars[i.var] + " := " + expr_to_string(cfg, i.e1);
    case Instr::Kind::Load:
      return cfg.vars[i.var] + " := [" + expr_to_string(cfg, i.e1) + "]";
    case Instr::Kind::Store:
      return "[" + expr_to_string(cfg, i.e1) +
             "] := " + expr_to_string(cfg, i.e2);
    case Instr::Kind::Lock:
      return "P(" + cfg.locks[i.lock] + ")";
    case Instr::Kind::Unlock:
      return "V(" + cfg.locks[i.lock] + ")";
    case Instr::Kind::Alloc:
      return cfg.vars[i.var] + " := alloc(" + expr_to_string(cfg, i.e1) +
             ")@" + std::to_string(cfg.locations[i.loc]);
    case Instr::Kind::Dispose:
      return "dispose(" + expr_to_string(cfg, i.e1) + ")";
    case Instr::Kind::Test:
      if (i.lock >= 0)
        return "P(" + cfg.locks[i.lock] + ") when " +
               bool_to_string(cfg, i.b);
      return "test(" + bool_to_string(cfg, i.b) + ")";
    case Instr::Kind::Tau:
      return "tau";
    case Instr::Kind::AllocAt:
      return "alloc@" + std::to_string(cfg.locations[i.loc]);
    case Instr::Kind::DisposeAt:
      return "dispose@" + std::to_string(cfg.locations[i.loc]);
  }
  return "?";
}

bool is_lock_level(Instr::Kind k) {
  switch (k) {
    case Instr::Kind::Tau:
    case Instr::Kind::Lock:
    case Instr::Kind::Unlock:
    case Instr::Kind::AllocAt:
    case Instr::Kind::DisposeAt:
      return true;
    default:
      return false;
  }
}

Label InstrTable::intern(const Instr& i) {
  if (buckets_.empty()) buckets_.resize(1024);
  std::size_t b = instr_hash(i) % buckets_.size();
  for (Label l : buckets_[b])
    if (instr_equal(instrs_[l], i)) return l;
  Label l = static_cast<Label>(instrs_.size());
  instrs_.push_back(i);
  buckets_[b].push_back(l);
  return l;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<int> eval_at(const Config& cfg, const Memory& mem,
                           const ExprPtr& e) {
  StackView view(cfg, mem.cells.data());
  return eval_expr(view, e);
}

// Address of an evaluated expression, if it names a real location.
std::optional<int> loc_index_of(const Config& cfg, std::optional<int> v) {
  if (!v) return std::nullopt;
  int li = cfg.location_index(*v);
  if (li < 0) return std::nullopt;
  return li;
}

}  // namespace

StepResult step(const Config& cfg, const MachineState& s, const Instr& i) {
  StepResult fault{StepClass::Fault, MachineState::crashed()};
  StepResult blocked{StepClass::Blocked, {}};
  if (s.crash) return blocked;
  MachineState n = s;

  switch (i.kind) {
    case Instr::Kind::Nop:
    case Instr::Kind::Tau:
      return {StepClass::Normal, n};

    case Instr::Kind::Assign: {
      auto v = eval_at(cfg, s.mem, i.e1);
      if (!v) return fault;
      n.mem.cells[cfg.var_cell(i.var)] =
          static_cast<signed char>(cfg.value_index(*v));
      return {StepClass::Normal, n};
    }
    case Instr::Kind::Load: {
      auto li = loc_index_of(cfg, eval_at(cfg, s.mem, i.e1));
      if (!li) return fault;
      signed char h = s.mem.cells[cfg.loc_cell(*li)];
      if (h < 0) return fault;  // unallocated
      n.mem.cells[cfg.var_cell(i.var)] = h;
      return {StepClass::Normal, n};
    }
    case Instr::Kind::Store: {
      auto li = loc_index_of(cfg, eval_at(cfg, s.mem, i.e1));
      auto v = eval_at(cfg, s.mem, i.e2);
      if (!li || !v) return fault;
      if (s.mem.cells[cfg.loc_cell(*li)] < 0) return fault;
      n.mem.cells[cfg.loc_cell(*li)] =
          static_cast<signed char>(cfg.value_index(*v));
      return {StepClass::Normal, n};
    }
    case Instr::Kind::Lock:
      if (s.locks & (1u << i.lock)) return blocked;
      n.locks |= 1u << i.lock;
      return {StepClass::Normal, n};
    case Instr::Kind::Unlock:
      if (!(s.locks & (1u << i.lock))) return blocked;
      n.locks &= ~(1u << i.lock);
      return {StepClass::Normal, n};

    case Instr::Kind::Alloc: {
      // An occupied target blocks even when the size expression is
      // undefined; the fault edge exists only for a free location.
      if (s.mem.cells[cfg.loc_cell(i.loc)] >= 0) return blocked;
      auto v = eval_at(cfg, s.mem, i.e1);
      if (!v) return fault;
      n.mem.cells[cfg.loc_cell(i.loc)] =
          static_cast<signed char>(cfg.value_index(*v));
      n.mem.cells[cfg.var_cell(i.var)] = static_cast<signed char>(
          cfg.value_index(cfg.locations[i.loc]));
      return {StepClass::Normal, n};
    }
    case Instr::Kind::Dispose: {
      auto li = loc_index_of(cfg, eval_at(cfg, s.mem, i.e1));
      if (!li) return fault;
      if (s.mem.cells[cfg.loc_cell(*li)] < 0) return fault;
      n.mem.cells[cfg.loc_cell(*li)] = -1;
      return {StepClass::Normal, n};
    }

    case Instr::Kind::Test: {
      StackView view(cfg, s.mem.cells.data());
      auto v = eval_bool(view, i.b);
      if (!v) return fault;
      if (i.lock < 0) return {StepClass::Normal, n};
      // Conditional acquire: the guard is read and the lock taken in one
      // indivisible step; a false guard or a held lock waits.
      if (!*v || (s.locks & (1u << i.lock))) return blocked;
      n.locks |= 1u << i.lock;
      return {StepClass::Normal, n};
    }

    case Instr::Kind::AllocAt:
    case Instr::Kind::DisposeAt:
      // Lock-level only; they do not act on memories.
      return blocked;
  }
  return blocked;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t cells_of_vars(const Config& cfg, std::uint64_t var_mask) {
  // Variable cells come first, so the masks coincide.
  (void)cfg;
  return var_mask;
}

}  // namespace

Footprint footprint(const Config& cfg, const Memory& mem, const Instr& i,
                    bool fault) {
  Footprint fp;
  auto eval1 = [&]() { return eval_at(cfg, mem, i.e1); };
  switch (i.kind) {
    case Instr::Kind::Nop:
    case Instr::Kind::Tau:
      break;
    case Instr::Kind::Assign:
      fp.rd = cells_of_vars(cfg, expr_vars(i.e1));
      if (!fault) fp.wr = 1ull << cfg.var_cell(i.var);
      break;
    case Instr::Kind::Load: {
      fp.rd = cells_of_vars(cfg, expr_vars(i.e1));
      if (auto li = loc_index_of(cfg, eval1()))
        fp.rd |= 1ull << cfg.loc_cell(*li);
      if (!fault) fp.wr = 1ull << cfg.var_cell(i.var);
      break;
    }
    case Instr::Kind::Store: {
      fp.rd = cells_of_vars(cfg, expr_vars(i.e1) | expr_vars(i.e2));
      if (auto li = loc_index_of(cfg, eval1())) {
        if (fault)
          fp.rd |= 1ull << cfg.loc_cell(*li);
        else
          fp.wr = 1ull << cfg.loc_cell(*li);
      }
      break;
    }
    case Instr::Kind::Lock:
    case Instr::Kind::Unlock:
      fp.lock = 1u << i.lock;
      break;
    case Instr::Kind::Alloc:
      fp.rd = cells_of_vars(cfg, expr_vars(i.e1));
      if (!fault) {
        fp.wr = (1ull << cfg.var_cell(i.var)) | (1ull << cfg.loc_cell(i.loc));
        fp.alloc = 1ull << cfg.loc_cell(i.loc);
      }
      break;
    case Instr::Kind::Dispose: {
      fp.rd = cells_of_vars(cfg, expr_vars(i.e1));
      if (auto li = loc_index_of(cfg, eval1())) {
        fp.rd |= 1ull << cfg.loc_cell(*li);
        if (!fault) fp.alloc = 1ull << cfg.loc_cell(*li);
      }
      break;
    }
    case Instr::Kind::Test:
      fp.rd = cells_of_vars(cfg, bool_vars(i.b));
      if (i.lock >= 0) fp.lock = 1u << i.lock;
      break;
    case Instr::Kind::AllocAt:
    case Instr::Kind::DisposeAt:
      fp.alloc = 1ull << cfg.loc_cell(i.loc);
      break;
  }
  return fp;
}

Footprint lock_footprint(const Config& cfg, const Instr& i) {
  Footprint fp;
  switch (i.kind) {
    case Instr::Kind::Lock:
    case Instr::Kind::Unlock:
      fp.lock = 1u << i.lock;
      break;
    case Instr::Kind::AllocAt:
    case Instr::Kind::DisposeAt:
      fp.alloc = 1ull << cfg.loc_cell(i.loc);
      break;
    default:
      break;
  }
  return fp;
}

bool independent(const Footprint& a, const Footprint& b) {
  if (((a.rd | a.wr) & b.wr) != 0) return false;
  if ((a.wr & (b.rd | b.wr)) != 0) return false;
  if ((a.lock & b.lock) != 0) return false;
  if ((a.alloc & b.alloc) != 0) return false;
  return true;
}

// ---------------------------------------------------------------------------

void for_each_memory(const Config& cfg,
                     const std::function<void(const Memory&)>& fn) {
  Memory mem = Memory::blank(cfg);
  std::size_t n = cfg.cell_count();
  int top = static_cast<int>(cfg.values.size()) - 1;
  while (true) {
    fn(mem);
    std::size_t i = 0;
    for (; i < n; ++i) {
      if (mem.cells[i] < top) {
        ++mem.cells[i];
        break;
      }
      mem.cells[i] = -1;
    }
    if (i == n) return;
  }
}

std::string memory_to_string(const Config& cfg, const Memory& mem) {
  std::string out = "[";
  bool first = true;
  for (std::size_t v = 0; v < cfg.vars.size(); ++v) {
    signed char c = mem.cells[cfg.var_cell(v)];
    if (c < 0) continue;
    if (!first) out += " ";
    first = false;
    out += cfg.vars[v] + "=" + std::to_string(cfg.values[c]);
  }
  out += " |";
  for (std::size_t l = 0; l < cfg.locations.size(); ++l) {
    signed char c = mem.cells[cfg.loc_cell(l)];
    if (c < 0) continue;
    out += " " + std::to_string(cfg.locations[l]) + ":" +
           std::to_string(cfg.values[c]);
  }
  out += "]";
  return out;
}

std::string state_to_string(const Config& cfg, const MachineState& s) {
  if (s.crash) return "CRASH";
  std::string out = memory_to_string(cfg, s.mem);
  out += " {";
  bool first = true;
  for (std::size_t r = 0; r < cfg.locks.size(); ++r) {
    if (!(s.locks & (1u << r))) continue;
    if (!first) out += ",";
    first = false;
    out += cfg.locks[r];
  }
  out += "}";
  return out;
}

}  // namespace asyncsl
