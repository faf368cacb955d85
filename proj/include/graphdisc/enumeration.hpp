#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "graphdisc/graph.hpp"

namespace graphdisc {

// Which vertices must end up with exactly one photon, and how many photon
// pairs the selected edges emit in total.
struct Rule {
  Mode mode = Mode::postselect;
  std::vector<int> degree_one;  // sorted vertex ids pinned to degree exactly 1
  int pair_count = 0;           // sum of edge multiplicities per selection
  std::vector<std::string> warnings;
};

// Derives the conditioning rule from the graph: postselect pins every vertex
// at degree 1 with pair_count = V/2; heralded and fock pin ancilla, input and
// environment vertices. Fock takes pair_count from total_photons / 2;
// heralded uses pair_count when given, else assumes one photon per free
// vertex. An odd fock photon budget yields pair_count 0 plus a warning.
Rule rule_for(const Graph& g);

// A multiset of edges: (edge index, multiplicity), ascending edge index,
// multiplicities >= 1. Multiplicity stays 1 whenever a degree constraint pins
// both endpoints.
struct Selection {
  std::vector<std::pair<int, int>> items;
};

// Per-vertex total photon count produced by a selection (self-loops count 2).
std::vector<int> selection_degrees(const Graph& g, const Selection& s);

// Streams selections in lexicographic order of the expanded edge-index
// multiset. Return false from the sink to stop early.
using SelectionSink = std::function<bool(const Selection&)>;
void enumerate_selections(const Graph& g, const Rule& r, const SelectionSink& sink);

std::vector<Selection> collect_selections(const Graph& g, const Rule& r);

// All edge subsets in which every vertex has degree exactly 1.
std::vector<Selection> perfect_matchings(const Graph& g);

}  // namespace graphdisc
