#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "asyncsl/ats.hpp"
#include "asyncsl/models.hpp"

namespace asyncsl {

// =========================================================================
// Programs. Locks come into scope either free for the whole program or
// through a `resource` block; a conditional critical section (`with`) takes
// a lock that is in scope and holds it for the duration of its body.

struct Code;
using CodePtr = std::shared_ptr<const Code>;

struct Code {
  enum class Kind : std::uint8_t {
    Skip,
    Assign,    // var := e1
    Load,      // var := [e1]
    Store,     // [e1] := e2
    Malloc,    // var := alloc(e1), location chosen nondeterministically
    Dispose,   // dispose(e1)
    Seq,       // c1 ; c2
    Par,       // c1 || c2
    If,        // if guard then c1 else c2
    While,     // while guard do c1
    Resource,  // resource lock in c1
    With,      // with lock when guard do c1
  };
  Kind kind = Kind::Skip;
  int var = -1;
  int lock = -1;
  ExprPtr e1, e2;
  BoolPtr guard;
  CodePtr c1, c2;
};

CodePtr c_skip();
CodePtr c_assign(int var, ExprPtr e);
CodePtr c_load(int var, ExprPtr addr);
CodePtr c_store(ExprPtr addr, ExprPtr value);
CodePtr c_malloc(int var, ExprPtr value);
CodePtr c_dispose(ExprPtr addr);
CodePtr c_seq(CodePtr a, CodePtr b);
CodePtr c_par(CodePtr a, CodePtr b);
CodePtr c_if(BoolPtr g, CodePtr then_branch, CodePtr else_branch);
CodePtr c_while(BoolPtr g, CodePtr body);
CodePtr c_resource(int lock, CodePtr body);
CodePtr c_with(int lock, BoolPtr g, CodePtr body);

std::string code_to_string(const Config& cfg, const CodePtr& c);

std::uint32_t free_locks(const CodePtr& c);   // used without a binder
std::uint32_t bound_locks(const CodePtr& c);  // introduced by resource

// Identifier ranges and lock scoping; scope is the lock set usable at top
// level. Empty result means well-formed.
std::vector<std::string> check_code(const Config& cfg, const CodePtr& c,
                                    std::uint32_t scope = 0);

// Every instruction the program or its environment can perform: the
// standard alphabet, the program's compound-expression leaves, and one
// guard probe per conditional construct (its fault edges model a guard
// reading an undefined variable).
std::vector<Label> program_alphabet(const Config& cfg, InstrTable& instrs,
                                    const CodePtr& c);

// =========================================================================
// Machine models per set of usable locks. Scoped resources shrink or grow
// that set between program fragments, so the two models and the erasure
// between them come in one variant per lock mask, built on demand.

class ModelSpace {
 public:
  ModelSpace(const Config& cfg, InstrTable& instrs,
             std::vector<Label> alphabet);

  const StatefulModel& stateful(std::uint32_t lockmask);
  const LockModel& lock_level(std::uint32_t lockmask);
  const GraphMorphism& erasure(std::uint32_t lockmask);

  const Config& config() const { return *cfg_; }
  InstrTable& instructions() { return *instrs_; }
  const std::vector<Label>& alphabet() const { return alphabet_; }
  std::uint32_t full_mask() const {
    return (1u << cfg_->locks.size()) - 1u;
  }

 private:
  const Config* cfg_;
  InstrTable* instrs_;
  std::vector<Label> alphabet_;
  std::map<std::uint32_t, std::unique_ptr<StatefulModel>> s_;
  std::map<std::uint32_t, std::unique_ptr<LockModel>> l_;
  std::map<std::uint32_t, std::unique_ptr<GraphMorphism>> f_;
};

enum class Level : std::uint8_t { Stateful, Stateless };

// =========================================================================
// Building blocks, exposed for the proof layer and for tests. Each returns
// a pruned transition system; trace reports where inputs landed.

// Two all-Frame copies of the model joined by a Code edge over every listed
// model step, with the squares that close a Code step against an
// environment step. Initial: the lower copy; returning: the reachable part
// of the upper copy. Trace: node_maps {lower, upper} and edge_maps {lower,
// upper, code} indexed by model ids, kNoEdge where nothing was built.
Ats step_lift_ats(const AsyncGraph& model, const std::vector<EdgeId>& steps,
                  CombineTrace* trace = nullptr);

// Drops the Code edges leaving initial nodes whose state disagrees with the
// guard: keep_true demands the guard to hold, otherwise it must be false;
// an undefined guard drops the edge either way. Trace: single maps.
Ats guard_filter_ats(const StatefulModel& sm, const Ats& g,
                     const BoolPtr& guard, bool keep_true,
                     CombineTrace* trace = nullptr);

// Makes a lock local: nodes forget it, its Code acquire / release steps
// turn into memory no-ops, its Frame steps disappear, and the borders
// restrict to states not holding it. g lives over the model for g_mask,
// which contains the lock; the result lives over g_mask without it.
// Trace: single maps.
Ats hide_resource_ats(ModelSpace& ms, Level lv, std::uint32_t g_mask,
                      int lock, const Ats& g,
                      CombineTrace* trace = nullptr);

// Runs a fragment while holding a lock it does not know: one zone per lock
// status of the observed state, Frame seams over the acquire and release
// steps between them, plus the squares sliding the fragment's own steps
// across the seams. Borders lift zone-wise; crash nodes are shared.
// Frame lift of a conditional acquire of the lifted lock, stateful level
// only: the environment enters a guarded section of its own.
struct GuardSeam {
  EdgeId edge = kNoEdge;      // in the lifted graph
  NodeId owner = kNoNode;     // source node, as a g node
  NodeId companion = kNoNode; // crash target, as a g node (fault seams)
  bool from_locked = false;
  bool fault = false;
};

struct LiftPlacement {
  std::vector<NodeId> locked, unlocked;        // g node -> zone node
  std::vector<EdgeId> locked_edges, unlocked_edges;
  std::vector<EdgeId> release_seam, acquire_seam;  // per g node
  // Frame lifts of the lock's fault steps, stateless level only.
  std::vector<EdgeId> fault_seams;  // flat list for diagnostics
  std::vector<GuardSeam> guard_seams;
};
// g lives over the model for g_mask, which does not contain the lock; the
// result lives over g_mask with it.
Ats lift_critical_ats(ModelSpace& ms, Level lv, std::uint32_t g_mask,
                      int lock, const Ats& g,
                      LiftPlacement* place = nullptr);

// =========================================================================
// Paired interpretation of a program: the stateful transition system, its
// lock-level shadow, and the projection between them. The projection sends
// Code to Code and Frame to Frame, commutes with getstate over the model
// erasure, and preserves initial and returning nodes.

struct CodeSem {
  Ats s;
  Ats l;
  GraphMorphism project;   // s.g -> l.g
  bool truncated = false;  // a loop hit the unrolling bound unsettled
  std::uint32_t lockmask = 0;
};

struct SemOptions {
  int loop_bound = 6;  // loop unrollings before giving up on a fixpoint
  std::size_t match_budget = 200000;
};

CodeSem sem_code(ModelSpace& ms, const CodePtr& c, std::uint32_t lockmask,
                 const SemOptions& opt = {});

// One instruction as a program fragment.
CodeSem sem_instr(ModelSpace& ms, const Instr& i, std::uint32_t lockmask);

// The fragment with no behavior at all: all-Frame, never returns.
CodeSem sem_dead(ModelSpace& ms, std::uint32_t lockmask);

// Pointwise combinators pairing the two levels and restitching the
// projection. Guard filtering only acts on the stateful side; the lock
// level cannot observe memory. sem_guard_abort builds the fragment that
// crashes from every state where the guard reads an undefined variable.
CodeSem sem_seq(ModelSpace& ms, const CodeSem& a, const CodeSem& b);
CodeSem sem_sum(ModelSpace& ms, const CodeSem& a, const CodeSem& b);
CodeSem sem_par(ModelSpace& ms, const CodeSem& a, const CodeSem& b);
CodeSem sem_guard_filter(ModelSpace& ms, const CodeSem& g, const BoolPtr& b,
                         bool keep_true);
CodeSem sem_guard_abort(ModelSpace& ms, std::uint32_t lockmask,
                        const BoolPtr& b);
CodeSem sem_hide(ModelSpace& ms, const CodeSem& g, int lock);
CodeSem sem_lift(ModelSpace& ms, const CodeSem& g, int lock);

// Structural checks of the pairing: projection well-formedness, the
// commuting square with the model erasure, border preservation. Validity
// of the two sides themselves is validate_ats's business.
std::vector<std::string> check_code_sem(ModelSpace& ms, const CodeSem& k);

}  // namespace asyncsl
