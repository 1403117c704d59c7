#include "asyncsl/graph.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <queue>

namespace asyncsl {

NodeId AsyncGraph::add_node() {
  out_.emplace_back();
  in_.emplace_back();
  return static_cast<NodeId>(out_.size() - 1);
}

void AsyncGraph::add_nodes(std::size_t n) {
  out_.resize(out_.size() + n);
  in_.resize(in_.size() + n);
}

EdgeId AsyncGraph::add_edge(NodeId src, NodeId dst, Label label, Polarity pol) {
  EdgeId e = static_cast<EdgeId>(edges_.size());
  edges_.push_back(Edge{src, dst, label, pol});
  out_[src].push_back(e);
  in_[dst].push_back(e);
  return e;
}

bool AsyncGraph::add_tile(EdgeId a1, EdgeId a2, EdgeId b1, EdgeId b2) {
  if (tile_exists(a1, a2, b1, b2)) return false;
  if (std::make_pair(b1, b2) < std::make_pair(a1, a2)) {
    std::swap(a1, b1);
    std::swap(a2, b2);
  }
  tiles_.push_back(Tile{a1, a2, b1, b2});
  completions_[path_key(a1, a2)].emplace_back(b1, b2);
  if (a1 != b1 || a2 != b2)
    completions_[path_key(b1, b2)].emplace_back(a1, a2);
  return true;
}

const std::vector<std::pair<EdgeId, EdgeId>>& AsyncGraph::completions(
    EdgeId a1, EdgeId a2) const {
  static const std::vector<std::pair<EdgeId, EdgeId>> empty;
  auto it = completions_.find(path_key(a1, a2));
  return it == completions_.end() ? empty : it->second;
}

bool AsyncGraph::tile_exists(EdgeId a1, EdgeId a2, EdgeId b1, EdgeId b2) const {
  for (auto& [c1, c2] : completions(a1, a2))
    if (c1 == b1 && c2 == b2) return true;
  return false;
}

// ---------------------------------------------------------------------------

AxiomReport validate_axioms(const AsyncGraph& g) {
  AxiomReport rep;
  std::size_t ne = g.edge_count();
  for (std::size_t i = 0; i < g.tiles().size(); ++i) {
    const Tile& t = g.tiles()[i];
    if (t.a1 >= ne || t.a2 >= ne || t.b1 >= ne || t.b2 >= ne) {
      rep.malformed.push_back({i, "edge id out of range"});
      continue;
    }
    const Edge& a1 = g.edge(t.a1);
    const Edge& a2 = g.edge(t.a2);
    const Edge& b1 = g.edge(t.b1);
    const Edge& b2 = g.edge(t.b2);
    if (a1.dst != a2.src || b1.dst != b2.src)
      rep.malformed.push_back({i, "sides are not paths"});
    else if (a1.src != b1.src)
      rep.malformed.push_back({i, "sides are not co-initial"});
    else if (a2.dst != b2.dst)
      rep.malformed.push_back({i, "sides are not co-final"});
  }
  if (!rep.malformed.empty()) return rep;

  // Every tile in both orientations: (first path, completion).
  struct Oriented {
    EdgeId w;   // second edge of the first path
    EdgeId v;   // first edge of the completion
    EdgeId u2;  // second edge of the completion
  };
  std::unordered_map<EdgeId, std::vector<Oriented>> by_first;
  for (const Tile& t : g.tiles()) {
    by_first[t.a1].push_back({t.a2, t.b1, t.b2});
    if (t.a1 != t.b1 || t.a2 != t.b2)
      by_first[t.b1].push_back({t.b2, t.a1, t.a2});
  }

  for (auto& [u, list] : by_first) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        const Oriented& p = list[i];
        const Oriented& q = list[j];
        if (g.edge(p.w).dst != g.edge(q.w).dst) continue;  // different targets
        bool same_w = p.w == q.w;
        bool same_v = p.v == q.v;
        if (same_w != same_v) {
          rep.ambiguous.push_back(
              {u, p.w, q.w, p.v, q.v,
               same_w ? "one path, two distinct swapped heads"
                      : "one swapped head resolves two distinct paths"});
        } else if (same_w && same_v && p.u2 != q.u2) {
          rep.ambiguous.push_back(
              {u, p.w, q.w, p.v, q.v, "one path carries two completions"});
        }
      }
    }
  }
  return rep;
}

std::vector<std::size_t> polarity_violations(const AsyncGraph& g) {
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < g.tiles().size(); ++i) {
    const Tile& t = g.tiles()[i];
    if (t.a1 >= g.edge_count() || t.a2 >= g.edge_count() ||
        t.b1 >= g.edge_count() || t.b2 >= g.edge_count())
      continue;
    if (g.edge(t.a1).pol != g.edge(t.b2).pol ||
        g.edge(t.b1).pol != g.edge(t.a2).pol)
      bad.push_back(i);
  }
  return bad;
}

// ---------------------------------------------------------------------------

std::vector<std::string> check_graph_morphism(const AsyncGraph& up,
                                              const AsyncGraph& down,
                                              const GraphMorphism& m,
                                              const MorphismCheckOptions& opt) {
  std::vector<std::string> problems;
  auto complain = [&](std::string s) {
    if (problems.size() < 50) problems.push_back(std::move(s));
  };
  if (m.node_map.size() != up.node_count())
    complain("node map has wrong size");
  if (m.edge_map.size() != up.edge_count())
    complain("edge map has wrong size");
  if (!problems.empty()) return problems;

  for (EdgeId e = 0; e < up.edge_count(); ++e) {
    const Edge& ue = up.edge(e);
    EdgeId fe = m.edge_map[e];
    if (fe >= down.edge_count()) {
      complain("edge " + std::to_string(e) + ": image out of range");
      continue;
    }
    const Edge& de = down.edge(fe);
    if (de.src != m.node_map[ue.src] || de.dst != m.node_map[ue.dst])
      complain("edge " + std::to_string(e) + ": image endpoints disagree");
    if (opt.check_polarity && de.pol != ue.pol)
      complain("edge " + std::to_string(e) + ": image polarity disagrees");
    if (opt.check_labels && de.label != ue.label)
      complain("edge " + std::to_string(e) + ": image label disagrees");
  }
  for (std::size_t i = 0; i < up.tiles().size(); ++i) {
    const Tile& t = up.tiles()[i];
    if (!down.tile_exists(m.edge_map[t.a1], m.edge_map[t.a2],
                          m.edge_map[t.b1], m.edge_map[t.b2]))
      complain("tile " + std::to_string(i) + ": image is not a tile");
  }
  return problems;
}

std::vector<Fib1Violation> check_1_fibration(const AsyncGraph& up,
                                             const AsyncGraph& down,
                                             const GraphMorphism& m,
                                             const Fib1Options& opt) {
  std::vector<Fib1Violation> out;
  for (NodeId x = 0; x < up.node_count(); ++x) {
    NodeId fx = m.node_map[x];
    for (EdgeId v : down.out(fx)) {
      if (!pol_matches(opt.down, down.edge(v).pol)) continue;
      std::uint32_t found = 0;
      for (EdgeId u : up.out(x)) {
        if (m.edge_map[u] != v) continue;
        if (!pol_matches(opt.up, up.edge(u).pol)) continue;
        ++found;
      }
      if (found == 0 || (opt.unique && found != 1))
        out.push_back({x, v, found});
    }
  }
  return out;
}

std::vector<Fib2Violation> check_2_fibration(const AsyncGraph& up,
                                             const AsyncGraph& down,
                                             const GraphMorphism& m,
                                             const Fib2Options& opt) {
  std::vector<Fib2Violation> out;
  for (EdgeId u = 0; u < up.edge_count(); ++u) {
    if (!pol_matches(opt.first, up.edge(u).pol)) continue;
    for (EdgeId v2 : up.out(up.edge(u).dst)) {
      if (!pol_matches(opt.second, up.edge(v2).pol)) continue;
      for (auto& [b, a2] : down.completions(m.edge_map[u], m.edge_map[v2])) {
        bool lifted = false;
        for (auto& [lv, lu2] : up.completions(u, v2)) {
          if (m.edge_map[lv] == b && m.edge_map[lu2] == a2) {
            lifted = true;
            break;
          }
        }
        if (!lifted) out.push_back({u, v2, b, a2});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

bool is_path(const AsyncGraph& g, const Path& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= g.edge_count()) return false;
    if (i > 0 && g.edge(p[i - 1]).dst != g.edge(p[i]).src) return false;
  }
  return true;
}

namespace {
std::string pack_path(const Path& p) {
  std::string s(p.size() * sizeof(EdgeId), '\0');
  if (!p.empty()) std::memcpy(s.data(), p.data(), s.size());
  return s;
}
}  // namespace

Tri paths_equivalent(const AsyncGraph& g, const Path& f, const Path& h,
                     std::size_t budget) {
  if (!is_path(g, f) || !is_path(g, h)) return Tri::No;
  if (f == h) return Tri::Yes;
  if (f.size() != h.size()) return Tri::No;
  if (f.empty()) return Tri::Yes;
  if (g.edge(f.front()).src != g.edge(h.front()).src ||
      g.edge(f.back()).dst != g.edge(h.back()).dst)
    return Tri::No;

  std::unordered_set<std::string> seen;
  std::deque<Path> queue;
  seen.insert(pack_path(f));
  queue.push_back(f);
  std::string goal = pack_path(h);
  while (!queue.empty()) {
    Path cur = std::move(queue.front());
    queue.pop_front();
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      for (auto& [c1, c2] : g.completions(cur[i], cur[i + 1])) {
        Path next = cur;
        next[i] = c1;
        next[i + 1] = c2;
        std::string key = pack_path(next);
        if (key == goal) return Tri::Yes;
        if (seen.count(key)) continue;
        if (seen.size() >= budget) return Tri::Inconclusive;
        seen.insert(std::move(key));
        queue.push_back(std::move(next));
      }
    }
  }
  return Tri::No;
}

// ---------------------------------------------------------------------------

namespace {
std::vector<std::uint8_t> reach(const AsyncGraph& g,
                                const std::vector<NodeId>& seeds,
                                bool forward) {
  std::vector<std::uint8_t> vis(g.node_count(), 0);
  std::vector<NodeId> stack;
  for (NodeId s : seeds)
    if (s < g.node_count() && !vis[s]) {
      vis[s] = 1;
      stack.push_back(s);
    }
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    for (EdgeId e : forward ? g.out(v) : g.in(v)) {
      NodeId w = forward ? g.edge(e).dst : g.edge(e).src;
      if (!vis[w]) {
        vis[w] = 1;
        stack.push_back(w);
      }
    }
  }
  return vis;
}
}  // namespace

std::vector<std::uint8_t> forward_reachable(const AsyncGraph& g,
                                            const std::vector<NodeId>& seeds) {
  return reach(g, seeds, true);
}

std::vector<std::uint8_t> backward_reachable(const AsyncGraph& g,
                                             const std::vector<NodeId>& seeds) {
  return reach(g, seeds, false);
}

std::vector<NodeId> nodes_without_code_history(const AsyncGraph& g) {
  std::vector<NodeId> seeds;
  for (EdgeId e = 0; e < g.edge_count(); ++e)
    if (g.edge(e).pol == Polarity::Code) seeds.push_back(g.edge(e).dst);
  auto vis = forward_reachable(g, seeds);
  std::vector<NodeId> out;
  for (NodeId v = 0; v < g.node_count(); ++v)
    if (!vis[v]) out.push_back(v);
  return out;
}

std::vector<NodeId> nodes_without_code_future(const AsyncGraph& g) {
  std::vector<NodeId> seeds;
  for (EdgeId e = 0; e < g.edge_count(); ++e)
    if (g.edge(e).pol == Polarity::Code) seeds.push_back(g.edge(e).src);
  auto vis = backward_reachable(g, seeds);
  std::vector<NodeId> out;
  for (NodeId v = 0; v < g.node_count(); ++v)
    if (!vis[v]) out.push_back(v);
  return out;
}

bool code_acyclic(const AsyncGraph& g) {
  // Iterative Tarjan; a Code edge inside a strongly connected component lies
  // on a cycle.
  std::size_t n = g.node_count();
  std::vector<std::uint32_t> index(n, 0), low(n, 0), comp(n, 0);
  std::vector<std::uint8_t> on_stack(n, 0);
  std::vector<NodeId> stack;
  std::uint32_t next_index = 1, next_comp = 1;

  struct Frame {
    NodeId v;
    std::size_t ei;
  };
  std::vector<Frame> call;
  for (NodeId root = 0; root < n; ++root) {
    if (index[root]) continue;
    call.push_back({root, 0});
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.ei < g.out(f.v).size()) {
        NodeId w = g.edge(g.out(f.v)[f.ei++]).dst;
        if (!index[w]) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        NodeId v = f.v;
        call.pop_back();
        if (!call.empty())
          low[call.back().v] = std::min(low[call.back().v], low[v]);
        if (low[v] == index[v]) {
          while (true) {
            NodeId w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp[w] = next_comp;
            if (w == v) break;
          }
          ++next_comp;
        }
      }
    }
  }
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    const Edge& ed = g.edge(e);
    if (ed.pol == Polarity::Code && comp[ed.src] == comp[ed.dst]) return false;
  }
  return true;
}

}  // namespace asyncsl
