#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace asyncsl {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;
using Label = std::uint32_t;

inline constexpr NodeId kNoNode = 0xffffffffu;
inline constexpr EdgeId kNoEdge = 0xffffffffu;

// Code = executed by the program under study, Frame = executed by its
// environment. Plain transition graphs (machine models) conventionally use
// Code everywhere and ignore the field.
enum class Polarity : std::uint8_t { Code, Frame };

struct Edge {
  NodeId src;
  NodeId dst;
  Label label;
  Polarity pol;
};

// An unordered pair of length-2 paths declared interchangeable. Invariant
// after normalization: (a1,a2) <= (b1,b2) lexicographically.
struct Tile {
  EdgeId a1, a2;
  EdgeId b1, b2;
};

// Directed multigraph with a tile relation on co-initial, co-final length-2
// paths. Tiles are stored unordered, so symmetry of the relation holds by
// construction.
class AsyncGraph {
 public:
  NodeId add_node();
  void add_nodes(std::size_t n);
  EdgeId add_edge(NodeId src, NodeId dst, Label label, Polarity pol);

  // Accepts structurally invalid quadruples too; validate_axioms reports
  // them. Returns false when the tile was already present.
  bool add_tile(EdgeId a1, EdgeId a2, EdgeId b1, EdgeId b2);

  std::size_t node_count() const { return out_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t tile_count() const { return tiles_.size(); }

  const Edge& edge(EdgeId e) const { return edges_[e]; }
  const std::vector<EdgeId>& out(NodeId v) const { return out_[v]; }
  const std::vector<EdgeId>& in(NodeId v) const { return in_[v]; }
  const std::vector<Tile>& tiles() const { return tiles_; }

  // All (b1,b2) such that (a1,a2) and (b1,b2) form a tile, in either
  // orientation of the stored pair.
  const std::vector<std::pair<EdgeId, EdgeId>>& completions(EdgeId a1,
                                                            EdgeId a2) const;
  bool tile_exists(EdgeId a1, EdgeId a2, EdgeId b1, EdgeId b2) const;

 private:
  static std::uint64_t path_key(EdgeId a, EdgeId b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }

  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
  std::vector<Tile> tiles_;
  std::unordered_map<std::uint64_t, std::vector<std::pair<EdgeId, EdgeId>>>
      completions_;
};

// ---------------------------------------------------------------------------
// Axioms of the tile relation.

struct AxiomReport {
  // Tiles whose two paths are not co-initial, not co-final, or reuse an edge
  // in impossible positions.
  struct Malformed {
    std::size_t tile_index;
    std::string reason;
  };
  // Two tiles over the same first edge and the same target node where one
  // side of the "same swap, same remainder" dichotomy holds and the other
  // does not, or a single upper path carrying two distinct completions.
  struct Ambiguous {
    EdgeId u;        // shared first edge
    EdgeId w1, w2;   // second edges of the two upper paths
    EdgeId v1, v2;   // first edges of the two completions
    std::string reason;
  };

  std::vector<Malformed> malformed;
  std::vector<Ambiguous> ambiguous;
  bool ok() const { return malformed.empty() && ambiguous.empty(); }
};

AxiomReport validate_axioms(const AsyncGraph& g);

// Polarity discipline inside tiles: in u.v' <> v.u', u and u' carry the same
// polarity, and so do v and v'. Returns indices of offending tiles.
std::vector<std::size_t> polarity_violations(const AsyncGraph& g);

// ---------------------------------------------------------------------------
// Morphisms and fibrations.

struct GraphMorphism {
  std::vector<NodeId> node_map;  // indexed by source node
  std::vector<EdgeId> edge_map;  // indexed by source edge
};

struct MorphismCheckOptions {
  bool check_polarity = true;  // image edge must carry the same polarity
  bool check_labels = false;   // image edge must carry the same label
};

// Structure check: edge images must connect node images, tiles must be sent
// to tiles. Returns human-readable problems; empty means valid.
std::vector<std::string> check_graph_morphism(const AsyncGraph& up,
                                              const AsyncGraph& down,
                                              const GraphMorphism& m,
                                              const MorphismCheckOptions& opt = {});

enum class PolFilter : std::uint8_t { Any, Code, Frame };

inline bool pol_matches(PolFilter f, Polarity p) {
  return f == PolFilter::Any || (f == PolFilter::Code && p == Polarity::Code) ||
         (f == PolFilter::Frame && p == Polarity::Frame);
}

struct Fib1Options {
  PolFilter down = PolFilter::Any;  // which downstairs edges must lift
  PolFilter up = PolFilter::Any;    // polarity the lift must carry
  bool unique = false;              // demand exactly one lift
};

struct Fib1Violation {
  NodeId node;       // upstairs node where the lift is missing / ambiguous
  EdgeId down_edge;  // transition from its image
  std::uint32_t lifts_found;
};

std::vector<Fib1Violation> check_1_fibration(const AsyncGraph& up,
                                             const AsyncGraph& down,
                                             const GraphMorphism& m,
                                             const Fib1Options& opt = {});

struct Fib2Options {
  PolFilter first = PolFilter::Any;   // polarity of u in the upstairs path
  PolFilter second = PolFilter::Any;  // polarity of v' in the upstairs path
};

struct Fib2Violation {
  EdgeId up_first;     // u
  EdgeId up_second;    // v'
  EdgeId down_first;   // b : the unmatched downstairs completion
  EdgeId down_second;  // a'
};

std::vector<Fib2Violation> check_2_fibration(const AsyncGraph& up,
                                             const AsyncGraph& down,
                                             const GraphMorphism& m,
                                             const Fib2Options& opt = {});

// ---------------------------------------------------------------------------
// Paths and homotopy.

using Path = std::vector<EdgeId>;

bool is_path(const AsyncGraph& g, const Path& p);

enum class Tri : std::uint8_t { Yes, No, Inconclusive };

// Are f and g related by a chain of single-tile exchanges? Breadth-first
// closure over the permutation neighbours of f; `budget` caps the number of
// distinct paths explored. No is definite only when the closure was
// exhausted within budget.
Tri paths_equivalent(const AsyncGraph& g, const Path& f, const Path& h,
                     std::size_t budget = 1000000);

// ---------------------------------------------------------------------------
// Reachability helpers shared by the transition-system layer.

std::vector<std::uint8_t> forward_reachable(const AsyncGraph& g,
                                            const std::vector<NodeId>& seeds);
std::vector<std::uint8_t> backward_reachable(const AsyncGraph& g,
                                             const std::vector<NodeId>& seeds);

// Nodes with no incoming path containing a Code edge.
std::vector<NodeId> nodes_without_code_history(const AsyncGraph& g);
// Nodes with no outgoing path containing a Code edge.
std::vector<NodeId> nodes_without_code_future(const AsyncGraph& g);

// True when no cycle of the graph contains a Code edge.
bool code_acyclic(const AsyncGraph& g);

}  // namespace asyncsl
