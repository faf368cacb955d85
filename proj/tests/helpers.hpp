#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "graphdisc/graph.hpp"

namespace testutil {

using graphdisc::cplx;
using graphdisc::Edge;
using graphdisc::Graph;
using graphdisc::Mode;
using graphdisc::Role;
using graphdisc::Vertex;
using graphdisc::WeightDomain;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fixture_path(const std::string& rel) {
  return std::string(FIXTURES_DIR) + "/" + rel;
}

inline Graph load_fixture_graph(const std::string& rel) {
  return graphdisc::deserialize(read_file(fixture_path(rel)));
}

// engine() % n is biased but plenty for test corpora, and unlike the
// std:: distributions it behaves identically on every platform.
inline int rand_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

inline double rand_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double rand_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * rand_unit(rng);
}

struct RandomGraphOptions {
  int max_vertices = 6;
  int max_edges = 8;
  int max_dim = 3;
  bool allow_modes[3] = {true, true, true};  // postselect, heralded, fock
  bool allow_env = false;
  bool allow_special_roles = true;  // ancilla / input vertices
  int max_pairs = 3;
};

// Valid-by-construction random graph. Mode-dependent details: fock gets
// self-loops and a photon budget, postselect gets an even vertex count.
inline Graph random_graph(std::mt19937_64& rng, const RandomGraphOptions& opt = {}) {
  std::vector<Mode> modes;
  if (opt.allow_modes[0]) modes.push_back(Mode::postselect);
  if (opt.allow_modes[1]) modes.push_back(Mode::heralded);
  if (opt.allow_modes[2]) modes.push_back(Mode::fock);
  const Mode mode = modes[static_cast<size_t>(rand_int(rng, 0, static_cast<int>(modes.size()) - 1))];

  int n = rand_int(rng, 2, opt.max_vertices);
  if (mode == Mode::postselect && n % 2 != 0) n = n == opt.max_vertices ? n - 1 : n + 1;

  std::vector<Vertex> verts;
  bool have_env = false;
  int specials = 0;
  for (int i = 0; i < n; ++i) {
    Vertex v;
    v.id = i;
    v.dim = rand_int(rng, 1, opt.max_dim);
    const int roll = rand_int(rng, 0, 9);
    if (opt.allow_env && mode != Mode::fock && !have_env && roll == 9) {
      v.role = Role::environment;
      have_env = true;
    } else if (opt.allow_special_roles && roll >= 7 && specials + 1 < n) {
      v.role = roll == 7 ? Role::ancilla : Role::input;
      ++specials;
    }
    verts.push_back(v);
  }

  const WeightDomain domain = rng() % 2 ? WeightDomain::complex_amps : WeightDomain::real;
  Graph g;
  g.mode = mode;
  g.domain = domain;
  g.vertices = verts;

  const int want = rand_int(rng, 1, opt.max_edges);
  int guard = 0;
  while (g.edge_count() < want && guard++ < 200) {
    int u = rand_int(rng, 0, n - 1);
    int v = rand_int(rng, 0, n - 1);
    if (u == v && mode != Mode::fock) continue;
    if (verts[static_cast<size_t>(u)].role == Role::input &&
        verts[static_cast<size_t>(v)].role == Role::input)
      continue;
    if (u == v && verts[static_cast<size_t>(u)].role == Role::environment) continue;
    const int cu = rand_int(rng, 0, verts[static_cast<size_t>(u)].dim - 1);
    const int cv = rand_int(rng, 0, verts[static_cast<size_t>(v)].dim - 1);
    cplx w{rand_range(rng, -1.0, 1.0),
           domain == WeightDomain::complex_amps ? rand_range(rng, -1.0, 1.0) : 0.0};
    if (std::abs(w) < 0.05) w += cplx{0.2, 0.0};
    Edge e = graphdisc::canonical_edge(u, v, cu, cv, w);
    bool dup = false;
    for (const Edge& ex : g.edges)
      if (ex.key() == e.key()) { dup = true; break; }
    if (!dup) g.edges.push_back(e);
  }
  graphdisc::canonicalize(g);

  if (mode == Mode::fock) g.total_photons = 2 * rand_int(rng, 1, opt.max_pairs);
  if (mode == Mode::heralded) {
    int pinned = 0;
    for (const Vertex& v : verts)
      if (v.role != Role::detector) ++pinned;
    const int lo = std::max(1, (pinned + 1) / 2);
    g.pair_count = rand_int(rng, lo, std::max(lo, opt.max_pairs));
  }
  return g;
}

}  // namespace testutil
