#include "asyncsl/ats.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace asyncsl {

bool Ats::has_returning() const {
  return std::any_of(returning.begin(), returning.end(),
                     [](std::uint8_t f) { return f != 0; });
}

std::vector<NodeId> Ats::returning_nodes() const {
  std::vector<NodeId> out;
  for (NodeId x = 0; x < returning.size(); ++x)
    if (returning[x]) out.push_back(x);
  return out;
}

namespace {

void require_same_model(const Ats& a, const Ats& b) {
  if (a.model == nullptr || a.model != b.model)
    throw std::invalid_argument("operands live over different machine models");
}

// Identity of an edge up to gluing: endpoints, label, polarity and image.
// Two input edges with the same signature denote the same transition and
// collapse to one, which is what keeps Frame lifts unique across seams.
struct EdgeKey {
  NodeId src, dst;
  Label label;
  std::uint8_t pol;
  EdgeId img;
  bool operator==(const EdgeKey&) const = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const {
    std::uint64_t h = k.src;
    h = h * 1000003u + k.dst;
    h = h * 1000003u + k.label;
    h = h * 1000003u + k.pol;
    h = h * 1000003u + k.img;
    return static_cast<std::size_t>(h);
  }
};

std::uint64_t pair_key(EdgeId a, EdgeId b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Merges b into out along a partially pre-filled node glue map. Fresh nodes
// are appended; edges are deduplicated by signature; tiles carried over.
void merge_second(Ats& out, const Ats& b, std::vector<NodeId>& bmap,
                  std::vector<EdgeId>& bemap) {
  std::unordered_map<EdgeKey, EdgeId, EdgeKeyHash> index;
  for (EdgeId e = 0; e < out.g.edge_count(); ++e) {
    const Edge& ed = out.g.edge(e);
    index[{ed.src, ed.dst, ed.label, static_cast<std::uint8_t>(ed.pol),
           out.image_edge(e)}] = e;
  }
  for (NodeId y = 0; y < b.g.node_count(); ++y) {
    if (bmap[y] != kNoNode) {
      out.returning[bmap[y]] =
          static_cast<std::uint8_t>(out.returning[bmap[y]] | b.returning[y]);
      continue;
    }
    bmap[y] = out.g.add_node();
    out.getstate.node_map.push_back(b.image(y));
    out.returning.push_back(b.returning[y]);
  }
  bemap.assign(b.g.edge_count(), kNoEdge);
  for (EdgeId e = 0; e < b.g.edge_count(); ++e) {
    const Edge& ed = b.g.edge(e);
    EdgeKey k{bmap[ed.src], bmap[ed.dst], ed.label,
              static_cast<std::uint8_t>(ed.pol), b.image_edge(e)};
    auto it = index.find(k);
    if (it != index.end()) {
      bemap[e] = it->second;
      continue;
    }
    EdgeId ne = out.g.add_edge(k.src, k.dst, ed.label, ed.pol);
    out.getstate.edge_map.push_back(b.image_edge(e));
    index.emplace(k, ne);
    bemap[e] = ne;
  }
  for (const Tile& t : b.g.tiles())
    out.g.add_tile(bemap[t.a1], bemap[t.a2], bemap[t.b1], bemap[t.b2]);
}

void write_trace(CombineTrace* t, std::vector<std::vector<NodeId>> nmaps,
                 std::vector<std::vector<EdgeId>> emaps,
                 const CombineTrace* prune) {
  if (!t) return;
  if (prune) {
    for (auto& m : nmaps)
      for (auto& x : m)
        if (x != kNoNode) x = prune->node_maps[0][x];
    for (auto& m : emaps)
      for (auto& e : m)
        if (e != kNoEdge) e = prune->edge_maps[0][e];
  }
  t->node_maps = std::move(nmaps);
  t->edge_maps = std::move(emaps);
  t->pair_of_node.clear();
  t->pair_of_edge.clear();
}

}  // namespace

Ats frame_copy(const AsyncGraph& model) {
  Ats out;
  out.model = &model;
  out.g.add_nodes(model.node_count());
  out.getstate.node_map.resize(model.node_count());
  std::iota(out.getstate.node_map.begin(), out.getstate.node_map.end(), 0u);
  for (EdgeId e = 0; e < model.edge_count(); ++e) {
    const Edge& ed = model.edge(e);
    out.g.add_edge(ed.src, ed.dst, ed.label, Polarity::Frame);
    out.getstate.edge_map.push_back(e);
  }
  for (const Tile& t : model.tiles()) out.g.add_tile(t.a1, t.a2, t.b1, t.b2);
  out.initial.resize(model.node_count());
  std::iota(out.initial.begin(), out.initial.end(), 0u);
  out.returning.assign(model.node_count(), 0);
  return out;
}

Ats identity_ats(const AsyncGraph& model) {
  Ats out = frame_copy(model);
  out.returning.assign(out.g.node_count(), 1);
  return out;
}

Ats prune_unreachable(const Ats& a, CombineTrace* trace) {
  auto reach = forward_reachable(a.g, a.initial);
  Ats out;
  out.model = a.model;
  std::vector<NodeId> nmap(a.g.node_count(), kNoNode);
  for (NodeId x = 0; x < a.g.node_count(); ++x) {
    if (!reach[x]) continue;
    nmap[x] = out.g.add_node();
    out.getstate.node_map.push_back(a.image(x));
    out.returning.push_back(a.returning[x]);
  }
  std::vector<EdgeId> emap(a.g.edge_count(), kNoEdge);
  for (EdgeId e = 0; e < a.g.edge_count(); ++e) {
    const Edge& ed = a.g.edge(e);
    if (nmap[ed.src] == kNoNode || nmap[ed.dst] == kNoNode) continue;
    emap[e] = out.g.add_edge(nmap[ed.src], nmap[ed.dst], ed.label, ed.pol);
    out.getstate.edge_map.push_back(a.image_edge(e));
  }
  for (const Tile& t : a.g.tiles()) {
    if (emap[t.a1] == kNoEdge || emap[t.a2] == kNoEdge ||
        emap[t.b1] == kNoEdge || emap[t.b2] == kNoEdge)
      continue;
    out.g.add_tile(emap[t.a1], emap[t.a2], emap[t.b1], emap[t.b2]);
  }
  for (NodeId x : a.initial) out.initial.push_back(nmap[x]);
  if (trace) {
    trace->node_maps = {std::move(nmap)};
    trace->edge_maps = {std::move(emap)};
    trace->pair_of_node.clear();
    trace->pair_of_edge.clear();
  }
  return out;
}

Ats sum_ats(const Ats& a, const Ats& b, CombineTrace* trace) {
  require_same_model(a, b);
  Ats mid;
  mid.model = a.model;
  mid.g = a.g;
  mid.getstate = a.getstate;
  mid.initial = a.initial;
  mid.returning = a.returning;

  std::unordered_map<NodeId, NodeId> init_partner;
  for (NodeId x : a.initial) init_partner[a.image(x)] = x;
  std::unordered_map<NodeId, NodeId> ret_partner;
  if (a.has_returning() && b.has_returning())
    for (NodeId x : a.returning_nodes()) ret_partner[a.image(x)] = x;

  std::vector<NodeId> bmap(b.g.node_count(), kNoNode);
  for (NodeId y : b.initial) {
    auto it = init_partner.find(b.image(y));
    if (it != init_partner.end()) bmap[y] = it->second;
  }
  for (NodeId y = 0; y < b.g.node_count(); ++y) {
    if (!b.returning[y] || bmap[y] != kNoNode) continue;
    auto it = ret_partner.find(b.image(y));
    if (it != ret_partner.end()) bmap[y] = it->second;
  }
  std::vector<EdgeId> bemap;
  merge_second(mid, b, bmap, bemap);
  for (NodeId y : b.initial)
    if (std::find(mid.initial.begin(), mid.initial.end(), bmap[y]) ==
        mid.initial.end())
      mid.initial.push_back(bmap[y]);

  std::vector<NodeId> amap(a.g.node_count());
  std::iota(amap.begin(), amap.end(), 0u);
  std::vector<EdgeId> aemap(a.g.edge_count());
  std::iota(aemap.begin(), aemap.end(), 0u);

  CombineTrace pt;
  Ats out = prune_unreachable(mid, &pt);
  write_trace(trace, {std::move(amap), std::move(bmap)},
              {std::move(aemap), std::move(bemap)}, &pt);
  return out;
}

Ats union_ats(const Ats& a, const Ats& b, CombineTrace* trace) {
  return sum_ats(a, b, trace);
}

Ats seq_ats(const Ats& a, const Ats& b, CombineTrace* trace) {
  require_same_model(a, b);
  Ats mid;
  mid.model = a.model;
  mid.g = a.g;
  mid.getstate = a.getstate;
  mid.initial = a.initial;
  // Former returning nodes become interior points of the composite.
  mid.returning.assign(a.g.node_count(), 0);

  std::unordered_map<NodeId, NodeId> init_of_image;
  for (NodeId y : b.initial) init_of_image[b.image(y)] = y;
  std::vector<NodeId> bmap(b.g.node_count(), kNoNode);
  for (NodeId x : a.returning_nodes()) {
    auto it = init_of_image.find(a.image(x));
    if (it != init_of_image.end()) bmap[it->second] = x;
  }
  std::vector<EdgeId> bemap;
  merge_second(mid, b, bmap, bemap);

  std::vector<NodeId> amap(a.g.node_count());
  std::iota(amap.begin(), amap.end(), 0u);
  std::vector<EdgeId> aemap(a.g.edge_count());
  std::iota(aemap.begin(), aemap.end(), 0u);

  CombineTrace pt;
  Ats out = prune_unreachable(mid, &pt);
  write_trace(trace, {std::move(amap), std::move(bmap)},
              {std::move(aemap), std::move(bemap)}, &pt);
  return out;
}

ParallelOps diagonal_ops() {
  ParallelOps ops;
  ops.join_node = [](NodeId m1, NodeId m2) -> std::optional<NodeId> {
    if (m1 == m2) return m1;
    return std::nullopt;
  };
  ops.join_edge = [](EdgeId f1, EdgeId f2) -> std::optional<EdgeId> {
    if (f1 == f2) return f1;
    return std::nullopt;
  };
  return ops;
}

namespace {

using PolRule = std::optional<Polarity> (*)(Polarity, Polarity);

std::optional<Polarity> interleaving_rule(Polarity p1, Polarity p2) {
  if (p1 == Polarity::Code && p2 == Polarity::Code) return std::nullopt;
  if (p1 == Polarity::Code || p2 == Polarity::Code) return Polarity::Code;
  return Polarity::Frame;
}

std::optional<Polarity> synchronous_rule(Polarity p1, Polarity p2) {
  if (p1 != p2) return std::nullopt;
  return p1;
}

struct NodePairHash {
  std::size_t operator()(const std::pair<NodeId, NodeId>& p) const {
    return static_cast<std::size_t>(
        (static_cast<std::uint64_t>(p.first) << 32) | p.second);
  }
};

Ats product_ats(const Ats& a, const Ats& b, const ParallelOps& ops,
                PolRule rule, CombineTrace* trace) {
  require_same_model(a, b);
  Ats out;
  out.model = a.model;

  std::unordered_map<std::pair<NodeId, NodeId>, NodeId, NodePairHash> node_of;
  std::vector<std::pair<NodeId, NodeId>> pair_of_node;
  std::vector<std::pair<NodeId, NodeId>> work;
  auto get_node = [&](NodeId x1, NodeId x2, NodeId img) {
    auto [it, fresh] =
        node_of.try_emplace({x1, x2}, static_cast<NodeId>(out.g.node_count()));
    if (fresh) {
      out.g.add_node();
      out.getstate.node_map.push_back(img);
      out.returning.push_back((a.returning[x1] && b.returning[x2]) ? 1 : 0);
      pair_of_node.emplace_back(x1, x2);
      work.emplace_back(x1, x2);
    }
    return it->second;
  };

  for (NodeId x1 : a.initial)
    for (NodeId x2 : b.initial) {
      auto j = ops.join_node(a.image(x1), b.image(x2));
      if (!j) continue;
      out.initial.push_back(get_node(x1, x2, *j));
    }

  std::unordered_map<std::uint64_t, EdgeId> edge_of;
  std::vector<std::pair<EdgeId, EdgeId>> pair_of_edge;
  for (std::size_t head = 0; head < work.size(); ++head) {
    auto [x1, x2] = work[head];
    NodeId src = node_of[{x1, x2}];
    for (EdgeId e1 : a.g.out(x1))
      for (EdgeId e2 : b.g.out(x2)) {
        auto pol = rule(a.g.edge(e1).pol, b.g.edge(e2).pol);
        if (!pol) continue;
        auto je = ops.join_edge(a.image_edge(e1), b.image_edge(e2));
        if (!je) continue;
        NodeId y1 = a.g.edge(e1).dst;
        NodeId y2 = b.g.edge(e2).dst;
        const Edge& me = a.model->edge(*je);
        auto jt = ops.join_node(a.image(y1), b.image(y2));
        if (!jt || *jt != me.dst) continue;
        NodeId dst = get_node(y1, y2, *jt);
        EdgeId ne = out.g.add_edge(src, dst, me.label, *pol);
        out.getstate.edge_map.push_back(*je);
        edge_of[pair_key(e1, e2)] = ne;
        pair_of_edge.emplace_back(e1, e2);
      }
  }

  // A square is a tile exactly when both component projections are tiles.
  for (EdgeId E = 0; E < out.g.edge_count(); ++E) {
    auto [e1, e2] = pair_of_edge[E];
    for (EdgeId F : out.g.out(out.g.edge(E).dst)) {
      auto [f1, f2] = pair_of_edge[F];
      for (const auto& [g1, h1] : a.g.completions(e1, f1))
        for (const auto& [g2, h2] : b.g.completions(e2, f2)) {
          auto itG = edge_of.find(pair_key(g1, g2));
          if (itG == edge_of.end()) continue;
          auto itH = edge_of.find(pair_key(h1, h2));
          if (itH == edge_of.end()) continue;
          out.g.add_tile(E, F, itG->second, itH->second);
        }
    }
  }

  if (trace) {
    trace->node_maps.clear();
    trace->edge_maps.clear();
    trace->pair_of_node = std::move(pair_of_node);
    trace->pair_of_edge = std::move(pair_of_edge);
  }
  return out;  // grown from the initial pairs, so already pruned
}

}  // namespace

Ats parallel_ats(const Ats& a, const Ats& b, const ParallelOps& ops,
                 CombineTrace* trace) {
  return product_ats(a, b, ops, interleaving_rule, trace);
}

Ats intersection_ats(const Ats& a, const Ats& b, CombineTrace* trace) {
  return product_ats(a, b, diagonal_ops(), synchronous_rule, trace);
}

// ---------------------------------------------------------------------------
// Validation.

namespace {

void append_capped(std::vector<std::string>& out,
                   std::vector<std::string> msgs) {
  constexpr std::size_t kCap = 8;
  for (std::size_t i = 0; i < msgs.size() && i < kCap; ++i)
    out.push_back(std::move(msgs[i]));
  if (msgs.size() > kCap)
    out.push_back("(" + std::to_string(msgs.size() - kCap) +
                  " more like the last)");
}

}  // namespace

AtsReport validate_ats(const Ats& a) {
  AtsReport r;
  if (a.model == nullptr) {
    r.problems.push_back("no machine model attached");
    return r;
  }
  const AsyncGraph& m = *a.model;
  if (a.getstate.node_map.size() != a.g.node_count() ||
      a.getstate.edge_map.size() != a.g.edge_count() ||
      a.returning.size() != a.g.node_count()) {
    r.problems.push_back("getstate or returning flags out of step with graph");
    return r;
  }

  MorphismCheckOptions mopt;
  mopt.check_polarity = false;
  mopt.check_labels = true;
  append_capped(r.problems, check_graph_morphism(a.g, m, a.getstate, mopt));

  {
    std::vector<std::string> msgs;
    std::unordered_set<NodeId> images;
    for (NodeId x : a.initial)
      if (!images.insert(a.image(x)).second)
        msgs.push_back("initial nodes " + std::to_string(x) +
                       " and an earlier one share image " +
                       std::to_string(a.image(x)));
    if (images.size() != m.node_count())
      msgs.push_back("initial nodes cover " + std::to_string(images.size()) +
                     " of " + std::to_string(m.node_count()) +
                     " model nodes");
    append_capped(r.problems, std::move(msgs));
  }
  {
    std::vector<std::string> msgs;
    std::unordered_set<NodeId> images;
    for (NodeId x : a.returning_nodes())
      if (!images.insert(a.image(x)).second)
        msgs.push_back("returning node " + std::to_string(x) +
                       " duplicates image " + std::to_string(a.image(x)));
    append_capped(r.problems, std::move(msgs));
  }
  {
    std::vector<std::string> msgs;
    for (NodeId x : a.returning_nodes())
      for (EdgeId e : a.g.out(x)) {
        const Edge& ed = a.g.edge(e);
        if (ed.pol == Polarity::Code)
          msgs.push_back("returning node " + std::to_string(x) +
                         " fires Code edge " + std::to_string(e));
        else if (!a.returning[ed.dst])
          msgs.push_back("Frame edge " + std::to_string(e) +
                         " leaves the returning set");
      }
    append_capped(r.problems, std::move(msgs));
  }

  if (!code_acyclic(a.g))
    r.problems.push_back("a cycle passes through a Code edge");
  {
    std::vector<std::string> msgs;
    for (std::size_t i : polarity_violations(a.g))
      msgs.push_back("tile " + std::to_string(i) +
                     " breaks the polarity discipline");
    append_capped(r.problems, std::move(msgs));
  }
  {
    auto ax = validate_axioms(a.g);
    std::vector<std::string> msgs;
    for (const auto& bad : ax.malformed)
      msgs.push_back("tile " + std::to_string(bad.tile_index) + ": " +
                     bad.reason);
    for (const auto& amb : ax.ambiguous)
      msgs.push_back("tiles at edge " + std::to_string(amb.u) + ": " +
                     amb.reason);
    append_capped(r.problems, std::move(msgs));
  }

  {
    Fib1Options opt;
    opt.down = PolFilter::Any;
    opt.up = PolFilter::Frame;
    opt.unique = true;
    std::vector<std::string> msgs;
    for (const auto& v : check_1_fibration(a.g, m, a.getstate, opt))
      msgs.push_back("node " + std::to_string(v.node) + ": model edge " +
                     std::to_string(v.down_edge) + " has " +
                     std::to_string(v.lifts_found) +
                     " Frame lifts, want exactly one");
    append_capped(r.problems, std::move(msgs));
  }
  {
    std::vector<std::string> msgs;
    for (auto [first, second, tag] :
         {std::tuple{PolFilter::Code, PolFilter::Frame, "Code-Frame"},
          std::tuple{PolFilter::Frame, PolFilter::Frame, "Frame-Frame"}}) {
      Fib2Options opt;
      opt.first = first;
      opt.second = second;
      for (const auto& v : check_2_fibration(a.g, m, a.getstate, opt))
        msgs.push_back(std::string(tag) + " path " +
                       std::to_string(v.up_first) + "." +
                       std::to_string(v.up_second) +
                       ": no lift of downstairs completion " +
                       std::to_string(v.down_first) + "." +
                       std::to_string(v.down_second));
    }
    append_capped(r.problems, std::move(msgs));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Isomorphism search.

namespace {

std::uint64_t mix64(std::uint64_t h, std::uint64_t v) {
  v *= 0x9ddfea08eb382d69ull;
  v ^= v >> 32;
  return (h ^ v) * 0x9ddfea08eb382d69ull;
}

std::size_t distinct_count(std::vector<std::uint64_t> v) {
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(
      std::unique(v.begin(), v.end()) - v.begin());
}

// Colour refinement seeded by image, initial and returning flags, and
// refined by the signature multisets of incident edges. Nodes mapped by any
// isomorphism necessarily share a colour.
std::vector<std::uint64_t> refine_colors(const Ats& t) {
  std::vector<std::uint8_t> init(t.g.node_count(), 0);
  for (NodeId x : t.initial) init[x] = 1;
  std::vector<std::uint64_t> c(t.g.node_count());
  for (NodeId x = 0; x < t.g.node_count(); ++x)
    c[x] = mix64(mix64(mix64(0x5eedu, t.image(x)), init[x]), t.returning[x]);
  std::size_t classes = distinct_count(c);
  for (int round = 0; round < 32; ++round) {
    std::vector<std::uint64_t> next(c.size());
    std::vector<std::uint64_t> sig;
    for (NodeId x = 0; x < t.g.node_count(); ++x) {
      std::uint64_t h = c[x];
      sig.clear();
      for (EdgeId e : t.g.out(x)) {
        const Edge& ed = t.g.edge(e);
        sig.push_back(mix64(
            mix64(mix64(mix64(1u, ed.label), static_cast<int>(ed.pol)),
                  t.image_edge(e)),
            c[ed.dst]));
      }
      std::sort(sig.begin(), sig.end());
      for (std::uint64_t s : sig) h = mix64(h, s);
      sig.clear();
      for (EdgeId e : t.g.in(x)) {
        const Edge& ed = t.g.edge(e);
        sig.push_back(mix64(
            mix64(mix64(mix64(2u, ed.label), static_cast<int>(ed.pol)),
                  t.image_edge(e)),
            c[ed.src]));
      }
      std::sort(sig.begin(), sig.end());
      for (std::uint64_t s : sig) h = mix64(h, s);
      next[x] = h;
    }
    std::size_t next_classes = distinct_count(next);
    c = std::move(next);
    if (next_classes == classes) break;
    classes = next_classes;
  }
  return c;
}

std::vector<NodeId> search_order(const Ats& a) {
  std::vector<std::uint8_t> seen(a.g.node_count(), 0);
  std::vector<NodeId> order;
  std::vector<NodeId> queue;
  for (NodeId x : a.initial)
    if (!seen[x]) {
      seen[x] = 1;
      queue.push_back(x);
    }
  for (std::size_t h = 0; h < queue.size(); ++h) {
    NodeId x = queue[h];
    order.push_back(x);
    for (EdgeId e : a.g.out(x)) {
      NodeId y = a.g.edge(e).dst;
      if (!seen[y]) {
        seen[y] = 1;
        queue.push_back(y);
      }
    }
    for (EdgeId e : a.g.in(x)) {
      NodeId y = a.g.edge(e).src;
      if (!seen[y]) {
        seen[y] = 1;
        queue.push_back(y);
      }
    }
  }
  for (NodeId x = 0; x < a.g.node_count(); ++x)
    if (!seen[x]) order.push_back(x);
  return order;
}

using EdgeSig = std::tuple<Label, std::uint8_t, EdgeId>;

std::vector<EdgeSig> edges_between(const Ats& t, NodeId u, NodeId v) {
  std::vector<EdgeSig> sigs;
  for (EdgeId e : t.g.out(u)) {
    const Edge& ed = t.g.edge(e);
    if (ed.dst != v) continue;
    sigs.emplace_back(ed.label, static_cast<std::uint8_t>(ed.pol),
                      t.image_edge(e));
  }
  std::sort(sigs.begin(), sigs.end());
  return sigs;
}

}  // namespace

MatchResult ats_match(const Ats& a, const Ats& b, std::size_t budget) {
  MatchResult res;
  if (a.model != b.model || a.g.node_count() != b.g.node_count() ||
      a.g.edge_count() != b.g.edge_count() ||
      a.g.tile_count() != b.g.tile_count() ||
      a.initial.size() != b.initial.size() ||
      a.returning_nodes().size() != b.returning_nodes().size())
    return res;

  auto ca = refine_colors(a);
  auto cb = refine_colors(b);
  {
    auto sa = ca;
    auto sb = cb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return res;
  }

  std::vector<std::uint8_t> a_init(a.g.node_count(), 0), b_init(b.g.node_count(), 0);
  for (NodeId x : a.initial) a_init[x] = 1;
  for (NodeId y : b.initial) b_init[y] = 1;

  std::unordered_map<std::uint64_t, std::vector<NodeId>> candidates;
  for (NodeId y = 0; y < b.g.node_count(); ++y) candidates[cb[y]].push_back(y);

  std::vector<NodeId> order = search_order(a);
  std::vector<NodeId> phi(a.g.node_count(), kNoNode);
  std::vector<NodeId> inv(b.g.node_count(), kNoNode);
  std::size_t steps = 0;
  bool out_of_budget = false;

  // Accepts a finished node assignment: derives the edge bijection from
  // signatures and demands that tiles map onto tiles.
  auto finish = [&](std::vector<EdgeId>& emap) {
    emap.assign(a.g.edge_count(), kNoEdge);
    std::vector<std::uint8_t> used(b.g.edge_count(), 0);
    for (EdgeId e = 0; e < a.g.edge_count(); ++e) {
      const Edge& ed = a.g.edge(e);
      EdgeId found = kNoEdge;
      for (EdgeId f : b.g.out(phi[ed.src])) {
        if (used[f]) continue;
        const Edge& fd = b.g.edge(f);
        if (fd.dst != phi[ed.dst] || fd.label != ed.label ||
            fd.pol != ed.pol || b.image_edge(f) != a.image_edge(e))
          continue;
        found = f;
        break;
      }
      if (found == kNoEdge) return false;
      used[found] = 1;
      emap[e] = found;
    }
    for (const Tile& t : a.g.tiles())
      if (!b.g.tile_exists(emap[t.a1], emap[t.a2], emap[t.b1], emap[t.b2]))
        return false;
    return true;
  };

  std::vector<EdgeId> emap;
  auto rec = [&](auto&& self, std::size_t k) -> bool {
    if (steps++ > budget) {
      out_of_budget = true;
      return false;
    }
    if (k == order.size()) return finish(emap);
    NodeId x = order[k];
    for (NodeId y : candidates[ca[x]]) {
      if (inv[y] != kNoNode) continue;
      if (b.image(y) != a.image(x) || b.returning[y] != a.returning[x] ||
          b_init[y] != a_init[x])
        continue;
      bool ok = true;
      std::vector<NodeId> nbrs;
      for (EdgeId e : a.g.out(x)) nbrs.push_back(a.g.edge(e).dst);
      for (EdgeId e : a.g.in(x)) nbrs.push_back(a.g.edge(e).src);
      nbrs.push_back(x);
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
      for (NodeId x2 : nbrs) {
        NodeId y2 = (x2 == x) ? y : phi[x2];
        if (y2 == kNoNode) continue;
        if (edges_between(a, x, x2) != edges_between(b, y, y2) ||
            edges_between(a, x2, x) != edges_between(b, y2, y)) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      phi[x] = y;
      inv[y] = x;
      if (self(self, k + 1)) return true;
      phi[x] = kNoNode;
      inv[y] = kNoNode;
      if (out_of_budget) return false;
    }
    return false;
  };

  if (rec(rec, 0)) {
    res.iso = GraphMorphism{std::move(phi), std::move(emap)};
    res.conclusive = true;
    return res;
  }
  res.conclusive = !out_of_budget;
  return res;
}

}  // namespace asyncsl
