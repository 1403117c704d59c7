#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "asyncsl/config.hpp"
#include "asyncsl/expr.hpp"
#include "asyncsl/graph.hpp"

namespace asyncsl {

// Partial stack and heap, one byte per cell: the value index, or -1 for an
// undefined variable / unallocated location. Cell order follows the config.
struct Memory {
  std::vector<signed char> cells;

  static Memory blank(const Config& cfg) {
    return Memory{std::vector<signed char>(cfg.cell_count(), -1)};
  }
  bool operator==(const Memory& o) const { return cells == o.cells; }
};

// A running machine state, or the crash caused by a faulting instruction.
// The lock word has bit r set when lock r is currently held.
struct MachineState {
  bool crash = false;
  Memory mem;
  std::uint32_t locks = 0;

  static MachineState crashed() { return MachineState{true, {}, 0}; }
  bool operator==(const MachineState& o) const {
    if (crash != o.crash) return false;
    if (crash) return true;
    return locks == o.locks && mem == o.mem;
  }
};

struct MachineStateHash {
  std::size_t operator()(const MachineState& s) const {
    std::size_t h = s.crash ? 0x517cc1b7 : 0x9e3779b9;
    if (!s.crash) {
      h = h * 1000003 + s.locks;
      for (signed char c : s.mem.cells)
        h = h * 1000003 + static_cast<std::size_t>(c + 2);
    }
    return h;
  }
};

// One instruction alphabet covers both the full machine and its lock-level
// shadow: Tau, Lock, Unlock, AllocAt, DisposeAt also serve as lock
// instructions (AllocAt/DisposeAt with only the address retained).
struct Instr {
  enum class Kind : std::uint8_t {
    Nop,
    Assign,     // var := e1
    Load,       // var := [e1]
    Store,      // [e1] := e2
    Lock,       // P(lock)
    Unlock,     // V(lock)
    Alloc,      // var := alloc(e1) pinned at location loc
    Dispose,    // dispose(e1)
    Test,       // read the guard b; faults when it is undefined. With a
                // lock attached, checks the guard and acquires the lock in
                // one indivisible step, waiting while the guard is false.
    Tau,        // lock-level stand-in for any memory instruction
    AllocAt,    // lock-level allocation at loc
    DisposeAt,  // lock-level disposal at loc
  };
  Kind kind = Kind::Nop;
  int var = -1;   // variable index
  int lock = -1;  // lock index
  int loc = -1;   // location index
  ExprPtr e1, e2;
  BoolPtr b;      // Test only
};

bool instr_equal(const Instr& a, const Instr& b);
std::size_t instr_hash(const Instr& i);
std::string instr_to_string(const Config& cfg, const Instr& i);
bool is_lock_level(Instr::Kind k);

// Interning table; ATS and model edges carry labels into one shared table.
class InstrTable {
 public:
  Label intern(const Instr& i);
  const Instr& at(Label l) const { return instrs_[l]; }
  std::size_t size() const { return instrs_.size(); }
  std::string name(const Config& cfg, Label l) const {
    return instr_to_string(cfg, instrs_[l]);
  }

 private:
  std::vector<Instr> instrs_;
  std::vector<std::vector<Label>> buckets_;  // open hash on instr_hash
};

// ---------------------------------------------------------------------------
// Stepping. Each instruction is deterministic at a given state; allocation
// nondeterminism lives at the language level, which fans out one pinned
// Alloc per location.

enum class StepClass : std::uint8_t {
  Normal,   // state transition
  Fault,    // undefined read, unallocated access: edge to the crash state
  Blocked,  // lock held / lock not held / location occupied: no edge
};

struct StepResult {
  StepClass cls = StepClass::Blocked;
  MachineState next;  // meaningful for Normal only
};

StepResult step(const Config& cfg, const MachineState& s, const Instr& i);

// ---------------------------------------------------------------------------
// Footprints: which cells an execution of the instruction at a given memory
// reads, writes, allocates or frees, and which locks it touches. Fault edges
// get the read-attempt footprint: reads only.

struct Footprint {
  std::uint64_t rd = 0, wr = 0, alloc = 0;  // cell masks
  std::uint32_t lock = 0;                   // lock mask

  bool operator==(const Footprint& o) const {
    return rd == o.rd && wr == o.wr && alloc == o.alloc && lock == o.lock;
  }
};

Footprint footprint(const Config& cfg, const Memory& mem, const Instr& i,
                    bool fault);

// Lock-level footprint of a lock instruction; states play no role there.
Footprint lock_footprint(const Config& cfg, const Instr& i);

// Both writes clear of the other's reads and writes, lock sets disjoint,
// allocation sets disjoint.
bool independent(const Footprint& a, const Footprint& b);

// ---------------------------------------------------------------------------
// Enumeration helpers for building the full model.

// All memories over the config (every cell undefined or any value index).
void for_each_memory(const Config& cfg,
                     const std::function<void(const Memory&)>& fn);

std::string memory_to_string(const Config& cfg, const Memory& mem);
std::string state_to_string(const Config& cfg, const MachineState& s);

}  // namespace asyncsl
