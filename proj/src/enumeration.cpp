#include "graphdisc/enumeration.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>

namespace graphdisc {

Rule rule_for(const Graph& g) {
  Rule r;
  r.mode = g.mode;
  const int n = g.vertex_count();
  if (g.mode == Mode::postselect) {
    for (int v = 0; v < n; ++v) r.degree_one.push_back(v);
    r.pair_count = n / 2;
    if (n % 2 != 0) r.warnings.push_back("odd vertex count: no term covers every vertex once");
    return r;
  }
  for (const Vertex& v : g.vertices)
    if (v.role != Role::detector) r.degree_one.push_back(v.id);
  if (g.mode == Mode::fock) {
    if (g.total_photons < 0) {
      r.warnings.push_back("fock mode without total_photons: nothing to enumerate");
      r.pair_count = 0;
    } else if (g.total_photons % 2 != 0) {
      r.warnings.push_back("odd total_photons: pair sources cannot reach it");
      r.pair_count = 0;
    } else {
      r.pair_count = g.total_photons / 2;
    }
    return r;
  }
  // heralded
  if (g.pair_count >= 1) {
    r.pair_count = g.pair_count;
  } else {
    r.pair_count = n / 2;
    if (n % 2 != 0)
      r.warnings.push_back("odd vertex count: default pair_count rounded down, set pair_count explicitly");
  }
  return r;
}

std::vector<int> selection_degrees(const Graph& g, const Selection& s) {
  std::vector<int> deg(static_cast<size_t>(g.vertex_count()), 0);
  for (auto [idx, mult] : s.items) {
    const Edge& e = g.edges[static_cast<size_t>(idx)];
    deg[static_cast<size_t>(e.u)] += mult;
    deg[static_cast<size_t>(e.v)] += mult;
  }
  return deg;
}

namespace {

// Perfect-matching search: branch on the lowest uncovered vertex. Emits in
// lexicographic order of the selection's edge-index list.
struct MatchingSearch {
  const Graph& g;
  const SelectionSink& sink;
  std::vector<std::vector<int>> adj;  // vertex -> incident non-loop edge indices
  uint64_t full = 0;
  Selection cur;
  bool stop = false;

  MatchingSearch(const Graph& gr, const SelectionSink& sk) : g(gr), sink(sk) {
    const int n = g.vertex_count();
    adj.resize(static_cast<size_t>(n));
    for (int i = 0; i < g.edge_count(); ++i) {
      const Edge& e = g.edges[static_cast<size_t>(i)];
      if (is_self_loop(e)) continue;
      adj[static_cast<size_t>(e.u)].push_back(i);
      adj[static_cast<size_t>(e.v)].push_back(i);
    }
    full = n == 64 ? ~uint64_t{0} : (uint64_t{1} << n) - 1;
  }

  void run() {
    if (g.vertex_count() == 0 || g.vertex_count() % 2 != 0) return;
    dfs(0);
  }

  void dfs(uint64_t covered) {
    if (stop) return;
    if (covered == full) {
      if (!sink(cur)) stop = true;
      return;
    }
    const int x = std::countr_one(covered);  // lowest uncovered vertex
    for (int idx : adj[static_cast<size_t>(x)]) {
      const Edge& e = g.edges[static_cast<size_t>(idx)];
      const int other = e.u == x ? e.v : e.u;
      if (other < x) continue;  // covered earlier, edge already dead
      if (covered & (uint64_t{1} << other)) continue;
      cur.items.emplace_back(idx, 1);
      dfs(covered | (uint64_t{1} << x) | (uint64_t{1} << other));
      cur.items.pop_back();
      if (stop) return;
    }
  }
};

// General multiset search over edges with a pinned degree-1 vertex set and a
// total multiplicity budget. Tries higher multiplicities first so expanded
// edge-index lists come out in ascending lexicographic order.
struct MultisetSearch {
  const Graph& g;
  const SelectionSink& sink;
  int budget;
  uint64_t pinned = 0;
  std::vector<uint64_t> emask;      // pinned endpoints per edge (loops excluded)
  std::vector<uint64_t> coverable;  // suffix OR of emask
  std::vector<char> dead;           // self-loop touching a pinned vertex
  Selection cur;
  bool stop = false;

  MultisetSearch(const Graph& gr, const Rule& r, const SelectionSink& sk)
      : g(gr), sink(sk), budget(r.pair_count) {
    for (int v : r.degree_one) pinned |= uint64_t{1} << v;
    const size_t ne = static_cast<size_t>(g.edge_count());
    emask.assign(ne, 0);
    dead.assign(ne, 0);
    for (size_t i = 0; i < ne; ++i) {
      const Edge& e = g.edges[i];
      if (is_self_loop(e)) {
        dead[i] = (pinned >> e.u) & 1;  // degree 2 at once can never fit
        continue;
      }
      if ((pinned >> e.u) & 1) emask[i] |= uint64_t{1} << e.u;
      if ((pinned >> e.v) & 1) emask[i] |= uint64_t{1} << e.v;
    }
    coverable.assign(ne + 1, 0);
    for (size_t i = ne; i-- > 0;) coverable[i] = coverable[i + 1] | emask[i];
  }

  void run() {
    if (budget <= 0) return;
    dfs(0, budget, pinned);
  }

  void dfs(int i, int remaining, uint64_t uncovered) {
    if (stop) return;
    if (remaining == 0) {
      if (uncovered == 0 && !sink(cur)) stop = true;
      return;
    }
    if (i >= g.edge_count()) return;
    const size_t ui = static_cast<size_t>(i);
    if ((uncovered & ~coverable[ui]) != 0) return;
    if (std::popcount(uncovered) > 2 * remaining) return;

    int maxmult = remaining;
    if (dead[ui]) {
      maxmult = 0;
    } else if (emask[ui] != 0) {
      if ((emask[ui] & ~uncovered) != 0) maxmult = 0;  // a pinned endpoint already covered
      else maxmult = 1;
    }
    for (int mult = maxmult; mult >= 1; --mult) {
      cur.items.emplace_back(i, mult);
      dfs(i + 1, remaining - mult, uncovered & ~emask[ui]);
      cur.items.pop_back();
      if (stop) return;
    }
    dfs(i + 1, remaining, uncovered);
  }
};

bool pins_everything(const Graph& g, const Rule& r) {
  return static_cast<int>(r.degree_one.size()) == g.vertex_count() &&
         2 * r.pair_count == g.vertex_count();
}

}  // namespace

void enumerate_selections(const Graph& g, const Rule& r, const SelectionSink& sink) {
  if (pins_everything(g, r)) {
    MatchingSearch s(g, sink);
    s.run();
    return;
  }
  if (static_cast<int>(r.degree_one.size()) == g.vertex_count() &&
      2 * r.pair_count != g.vertex_count())
    return;  // every vertex pinned at degree 1 fixes the pair count
  MultisetSearch s(g, r, sink);
  s.run();
}

std::vector<Selection> collect_selections(const Graph& g, const Rule& r) {
  std::vector<Selection> out;
  enumerate_selections(g, r, [&](const Selection& s) {
    out.push_back(s);
    return true;
  });
  return out;
}

std::vector<Selection> perfect_matchings(const Graph& g) {
  Rule r;
  r.mode = Mode::postselect;
  for (int v = 0; v < g.vertex_count(); ++v) r.degree_one.push_back(v);
  r.pair_count = g.vertex_count() / 2;
  return collect_selections(g, r);
}

}  // namespace graphdisc
