#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "asyncsl/graph.hpp"

namespace asyncsl {

// Transition system of a program fragment over a machine model. The graph
// carries Code transitions (steps the fragment performs itself) and Frame
// transitions (steps of its environment); getstate projects every node onto
// the machine state it observes.
//
// Well-formedness, checked by validate_ats:
//   - no cycle passes through a Code edge,
//   - getstate is a label-preserving graph morphism into *model,
//   - initial nodes map bijectively onto the model nodes, returning nodes
//     injectively,
//   - every model transition has exactly one Frame lift at every node,
//   - downstairs tiles lift along Code-Frame and Frame-Frame paths,
//   - returning nodes have no outgoing Code edge and are closed under Frame
//     successors.
struct Ats {
  AsyncGraph g;
  const AsyncGraph* model = nullptr;
  GraphMorphism getstate;
  std::vector<NodeId> initial;
  std::vector<std::uint8_t> returning;  // indexed by node

  NodeId image(NodeId x) const { return getstate.node_map[x]; }
  EdgeId image_edge(EdgeId e) const { return getstate.edge_map[e]; }
  bool is_returning(NodeId x) const { return returning[x] != 0; }
  bool has_returning() const;
  std::vector<NodeId> returning_nodes() const;
};

// Origin bookkeeping for combinator outputs. Gluing constructions fill
// node_maps / edge_maps, one entry per input, with kNoNode / kNoEdge for
// dropped elements. Product constructions fill pair_of_node / pair_of_edge,
// indexed by output id, with the component pair behind each output element.
struct CombineTrace {
  std::vector<std::vector<NodeId>> node_maps;
  std::vector<std::vector<EdgeId>> edge_maps;
  std::vector<std::pair<NodeId, NodeId>> pair_of_node;
  std::vector<std::pair<EdgeId, EdgeId>> pair_of_edge;
};

struct AtsReport {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

AtsReport validate_ats(const Ats& a);

// The all-Frame copy of a machine model: every node initial, nothing
// returning; the fragment that never acts. identity_ats additionally marks
// every node returning, which makes it a unit for seq_ats.
Ats frame_copy(const AsyncGraph& model);
Ats identity_ats(const AsyncGraph& model);

// Drops the nodes unreachable from the initial ones, with their edges and
// tiles. Every combinator below prunes its result.
Ats prune_unreachable(const Ats& a, CombineTrace* trace = nullptr);

// Disjoint union glued on initial nodes of equal image and, when both
// operands can return, on returning nodes of equal image. When only one
// operand can return, its returning nodes are kept as they are.
Ats sum_ats(const Ats& a, const Ats& b, CombineTrace* trace = nullptr);

// Same construction as sum_ats. Used when both operands interpret one and
// the same code, so a caller tracking per-code morphisms folds the two
// origin maps into a single relabelling.
Ats union_ats(const Ats& a, const Ats& b, CombineTrace* trace = nullptr);

// Glues the returning nodes of a onto the initial nodes of b with the same
// image. The seam keeps one copy of each Frame lift, so lift uniqueness
// survives. When a never returns, pruning leaves exactly a.
Ats seq_ats(const Ats& a, const Ats& b, CombineTrace* trace = nullptr);

// How a product combines the two component images. The diagonal instance
// demands equal images and fits whenever both operands observe the full
// machine state.
struct ParallelOps {
  std::function<std::optional<NodeId>(NodeId, NodeId)> join_node;
  std::function<std::optional<EdgeId>(EdgeId, EdgeId)> join_edge;
};
ParallelOps diagonal_ops();

// Interleaving product: one side fires a Code edge while the other follows
// with its Frame edge over the same model transition, or both follow their
// environment together; the two sides never fire Code together. Tiles are
// the squares both of whose projections are tiles. Returning nodes are the
// pairs of returning nodes.
Ats parallel_ats(const Ats& a, const Ats& b, const ParallelOps& ops,
                 CombineTrace* trace = nullptr);

// Synchronous product: both sides fire an edge of the same polarity over the
// same model transition at every step.
Ats intersection_ats(const Ats& a, const Ats& b, CombineTrace* trace = nullptr);

// Isomorphism search preserving labels, polarities, tiles, getstate, initial
// and returning nodes. conclusive is false when the search budget ran out
// before a verdict; a negative verdict is definite only when conclusive.
struct MatchResult {
  std::optional<GraphMorphism> iso;  // maps a onto b when found
  bool conclusive = true;
  bool matched() const { return iso.has_value(); }
};
MatchResult ats_match(const Ats& a, const Ats& b, std::size_t budget = 200000);

}  // namespace asyncsl
