#pragma once

#include <unordered_map>

#include "asyncsl/graph.hpp"
#include "asyncsl/machine.hpp"

namespace asyncsl {

// Full machine model: every machine state over the config, transitions for
// every alphabet instruction that is enabled, fault edges into one crash
// node, and a tile for every pair of footprint-independent co-initial steps
// whose residuals close the square.
//
// lockmask restricts the usable locks: states range over its subsets and
// acquire / release instructions outside it are dropped from the alphabet.
// Scoped resource declarations make the set of usable locks vary between
// program fragments, so models come in one variant per mask.
struct StatefulModel {
  const Config* cfg = nullptr;
  const InstrTable* instrs = nullptr;
  std::uint32_t lockmask = 0;
  AsyncGraph g;
  std::vector<MachineState> states;  // node payloads
  NodeId crash = kNoNode;
  std::vector<Footprint> edge_fp;      // per edge, fault edges read-only
  std::vector<std::uint8_t> edge_fault;
  std::unordered_map<MachineState, NodeId, MachineStateHash> index;

  NodeId node_of(const MachineState& s) const {
    auto it = index.find(s);
    return it == index.end() ? kNoNode : it->second;
  }
  EdgeId find_edge(NodeId src, Label label, NodeId dst) const;
};

StatefulModel build_stateful_model(const Config& cfg, InstrTable& instrs,
                                   const std::vector<Label>& alphabet,
                                   std::uint32_t lockmask = 0xffffffffu);

// Lock-level model: one node per usable set of held locks plus a crash
// node. Acquire and release move between lock sets; every lock instruction
// also carries a fault edge from every lock set, since memory faults are
// invisible at this level. Tiles are the label-swapped squares of
// instructions with disjoint lock and allocation components.
struct LockModel {
  const Config* cfg = nullptr;
  const InstrTable* instrs = nullptr;
  std::uint32_t lockmask = 0;
  AsyncGraph g;
  std::vector<std::uint32_t> locksets;  // payload for non-crash nodes
  NodeId crash = kNoNode;
  std::unordered_map<std::uint32_t, NodeId> index;

  NodeId node_of_lockset(std::uint32_t locks) const {
    auto it = index.find(locks);
    return it == index.end() ? kNoNode : it->second;
  }
  EdgeId find_edge(NodeId src, Label label, NodeId dst) const;
};

LockModel build_lock_model(const Config& cfg, InstrTable& instrs,
                           std::uint32_t lockmask = 0xffffffffu);

// Alphabets. The standard one holds every constant-form instruction over the
// config plus nop and the lock primitives; callers append the program's own
// compound-expression instructions.
std::vector<Label> standard_alphabet(const Config& cfg, InstrTable& instrs);
std::vector<Label> lock_level_alphabet(const Config& cfg, InstrTable& instrs);

// The lock-level image of one stateful edge: memory instructions fade to
// tau, disposal keeps its address when the address expression evaluates,
// and faulting reads with no determined address fade to tau as well.
Instr erase_instr(const Config& cfg, const Instr& full, const Memory& at,
                  bool fault);

// Node and edge map of the quotient from the stateful to the lock-level
// model.
GraphMorphism erasure_morphism(const StatefulModel& sm, const LockModel& lm);

// ---------------------------------------------------------------------------
// Independent oracle for the stateful tiles. Footprints are recovered by
// perturbing single cells and watching the step's behavior, instead of
// reading the declared footprint table; a tile is predicted when the
// perturbation footprints are independent and both residual steps close the
// square. Disagreements with the model's tile relation are reported.
struct OracleReport {
  std::size_t pairs_checked = 0;
  struct Mismatch {
    NodeId node;
    EdgeId e1, e2;
    bool model_tile;   // what the model says
    bool oracle_tile;  // what the perturbation semantics says
  };
  std::vector<Mismatch> mismatches;
  bool ok() const { return mismatches.empty(); }
};

OracleReport residual_oracle(const StatefulModel& sm, std::size_t pair_cap);

// Perturbation footprint of one enabled instruction at one state; exposed
// for the oracle's own tests.
Footprint perturbation_footprint(const Config& cfg, const MachineState& s,
                                 const Instr& i);

}  // namespace asyncsl
