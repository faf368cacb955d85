#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace graphdisc {

using cplx = std::complex<double>;

enum class Role { detector, ancilla, input, environment };
enum class Mode { postselect, heralded, fock };
enum class WeightDomain { real, complex_amps };

const char* to_string(Role r);
const char* to_string(Mode m);
const char* to_string(WeightDomain d);
Role role_from_string(const std::string& s);
Mode mode_from_string(const std::string& s);
WeightDomain domain_from_string(const std::string& s);

struct Vertex {
  int id = 0;
  Role role = Role::detector;
  int dim = 1;
};

// One pair-creation term: endpoints u,v and the mode color each endpoint
// receives. Canonical form has u < v, or u == v with cu <= cv (self-loop).
struct Edge {
  int u = 0;
  int v = 0;
  int cu = 0;
  int cv = 0;
  cplx w{0.0, 0.0};

  std::tuple<int, int, int, int> key() const { return {u, v, cu, cv}; }
};

inline bool edge_key_less(const Edge& a, const Edge& b) { return a.key() < b.key(); }
inline bool is_self_loop(const Edge& e) { return e.u == e.v; }

// Puts endpoints (and their colors) into canonical order; weight unchanged.
Edge canonical_edge(int u, int v, int cu, int cv, cplx w);

struct Graph {
  Mode mode = Mode::postselect;
  WeightDomain domain = WeightDomain::real;
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;  // canonically sorted, unique keys
  int total_photons = -1;   // fock mode photon budget, -1 when unset
  int pair_count = -1;      // heralded mode pair budget, -1 when unset

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }
  int dim(int v) const { return vertices[static_cast<size_t>(v)].dim; }
  Role role(int v) const { return vertices[static_cast<size_t>(v)].role; }
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> problems;

  void fail(std::string msg) {
    ok = false;
    problems.push_back(std::move(msg));
  }
};

class parse_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sorts edges by key and merges duplicates by weight addition. Returns the
// number of merges performed.
int canonicalize(Graph& g);

Graph make_graph(Mode mode, WeightDomain domain, std::vector<Vertex> vertices,
                 std::vector<Edge> edges, int total_photons = -1, int pair_count = -1);

ValidationReport validate(const Graph& g);

// -1 when the graph has no environment vertex.
int environment_vertex(const Graph& g);

std::string serialize(const Graph& g);

// Throws parse_error on malformed input (message carries the byte offset for
// syntax errors). Duplicate edge keys are merged with a warning.
Graph deserialize(const std::string& text, std::vector<std::string>* warnings = nullptr);

}  // namespace graphdisc
