#include "graphdisc/graph.hpp"

#include <algorithm>
#include <json.hpp>
#include <set>
#include <utility>

#include "graphdisc/json_detail.hpp"

namespace graphdisc {

using nlohmann::json;
using detail::check_keys;

const char* to_string(Role r) {
  switch (r) {
    case Role::detector: return "detector";
    case Role::ancilla: return "ancilla";
    case Role::input: return "input";
    case Role::environment: return "environment";
  }
  return "?";
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::postselect: return "postselect";
    case Mode::heralded: return "heralded";
    case Mode::fock: return "fock";
  }
  return "?";
}

const char* to_string(WeightDomain d) {
  return d == WeightDomain::real ? "real" : "complex";
}

Role role_from_string(const std::string& s) {
  if (s == "detector") return Role::detector;
  if (s == "ancilla") return Role::ancilla;
  if (s == "input") return Role::input;
  if (s == "environment") return Role::environment;
  throw parse_error("unknown vertex role '" + s + "'");
}

Mode mode_from_string(const std::string& s) {
  if (s == "postselect") return Mode::postselect;
  if (s == "heralded") return Mode::heralded;
  if (s == "fock") return Mode::fock;
  throw parse_error("unknown mode '" + s + "'");
}

WeightDomain domain_from_string(const std::string& s) {
  if (s == "real") return WeightDomain::real;
  if (s == "complex") return WeightDomain::complex_amps;
  throw parse_error("unknown weight domain '" + s + "'");
}

Edge canonical_edge(int u, int v, int cu, int cv, cplx w) {
  if (u > v || (u == v && cu > cv)) {
    std::swap(u, v);
    std::swap(cu, cv);
  }
  return Edge{u, v, cu, cv, w};
}

int canonicalize(Graph& g) {
  for (Edge& e : g.edges) e = canonical_edge(e.u, e.v, e.cu, e.cv, e.w);
  std::sort(g.edges.begin(), g.edges.end(), edge_key_less);
  std::vector<Edge> merged;
  merged.reserve(g.edges.size());
  int merges = 0;
  for (const Edge& e : g.edges) {
    if (!merged.empty() && merged.back().key() == e.key()) {
      merged.back().w += e.w;
      ++merges;
    } else {
      merged.push_back(e);
    }
  }
  g.edges = std::move(merged);
  return merges;
}

Graph make_graph(Mode mode, WeightDomain domain, std::vector<Vertex> vertices,
                 std::vector<Edge> edges, int total_photons, int pair_count) {
  Graph g;
  g.mode = mode;
  g.domain = domain;
  g.vertices = std::move(vertices);
  g.edges = std::move(edges);
  g.total_photons = total_photons;
  g.pair_count = pair_count;
  canonicalize(g);
  return g;
}

int environment_vertex(const Graph& g) {
  for (const Vertex& v : g.vertices)
    if (v.role == Role::environment) return v.id;
  return -1;
}

ValidationReport validate(const Graph& g) {
  ValidationReport rep;
  const int n = g.vertex_count();
  if (n > 64) rep.fail("at most 64 vertices are supported");
  for (int i = 0; i < n; ++i) {
    const Vertex& v = g.vertices[static_cast<size_t>(i)];
    if (v.id != i) rep.fail("vertex ids must be 0-based and contiguous; slot " +
                            std::to_string(i) + " has id " + std::to_string(v.id));
    if (v.dim < 1) rep.fail("vertex " + std::to_string(v.id) + " has dim < 1");
  }
  int env_count = 0;
  for (const Vertex& v : g.vertices)
    if (v.role == Role::environment) ++env_count;
  if (env_count > 1) rep.fail("more than one environment vertex");
  if (env_count > 0 && g.mode == Mode::fock)
    rep.fail("environment vertex is not supported in fock mode");

  std::set<std::tuple<int, int, int, int>> seen;
  for (const Edge& e : g.edges) {
    const std::string tag = "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                            "," + std::to_string(e.cu) + "," + std::to_string(e.cv) + ")";
    if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n) {
      rep.fail(tag + ": endpoint out of range");
      continue;
    }
    if (e.u > e.v || (e.u == e.v && e.cu > e.cv)) rep.fail(tag + ": not in canonical order");
    if (e.cu < 0 || e.cu >= g.dim(e.u)) rep.fail(tag + ": color cu out of range");
    if (e.cv < 0 || e.cv >= g.dim(e.v)) rep.fail(tag + ": color cv out of range");
    if (!seen.insert(e.key()).second) rep.fail(tag + ": duplicate edge key");
    if (g.role(e.u) == Role::input && g.role(e.v) == Role::input)
      rep.fail(tag + ": edges between input vertices are not allowed");
    if (is_self_loop(e)) {
      if (g.role(e.u) == Role::environment) rep.fail(tag + ": self-loop on environment vertex");
      if (g.mode != Mode::fock) rep.fail(tag + ": self-loops are only allowed in fock mode");
    }
    if (g.domain == WeightDomain::real && e.w.imag() != 0.0)
      rep.fail(tag + ": nonzero imaginary weight in a real-domain graph");
  }

  if (g.mode == Mode::fock) {
    if (g.total_photons < 0) rep.fail("fock mode requires total_photons");
    else if (g.total_photons % 2 != 0)
      rep.fail("total_photons must be even (pair sources)");
  }
  if (g.pair_count == 0) rep.fail("pair_count must be positive when given");
  return rep;
}

namespace {

json weight_to_json(cplx w) { return json::array({w.real(), w.imag()}); }

cplx weight_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw parse_error("edge weight must be a [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string serialize(const Graph& g) {
  json j;
  j["mode"] = to_string(g.mode);
  j["weight_domain"] = to_string(g.domain);
  json verts = json::array();
  for (const Vertex& v : g.vertices)
    verts.push_back({{"id", v.id}, {"role", to_string(v.role)}, {"dim", v.dim}});
  j["vertices"] = verts;
  json edges = json::array();
  for (const Edge& e : g.edges)
    edges.push_back({{"u", e.u}, {"v", e.v}, {"cu", e.cu}, {"cv", e.cv},
                     {"w", weight_to_json(e.w)}});
  j["edges"] = edges;
  if (g.total_photons >= 0) j["total_photons"] = g.total_photons;
  if (g.pair_count >= 0) j["pair_count"] = g.pair_count;
  return j.dump(2) + "\n";
}

Graph deserialize(const std::string& text, std::vector<std::string>* warnings) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw parse_error("graph JSON: parse failure at byte " + std::to_string(e.byte) + ": " +
                      e.what());
  }
  if (!j.is_object()) throw parse_error("graph JSON: top level must be an object");
  check_keys(j, {"mode", "weight_domain", "vertices", "edges", "total_photons", "pair_count"},
             "graph");
  for (const char* req : {"mode", "weight_domain", "vertices", "edges"})
    if (!j.contains(req)) throw parse_error(std::string("graph JSON: missing key '") + req + "'");

  Graph g;
  g.mode = mode_from_string(j["mode"].get<std::string>());
  g.domain = domain_from_string(j["weight_domain"].get<std::string>());
  if (!j["vertices"].is_array()) throw parse_error("graph JSON: 'vertices' must be an array");
  for (const json& vj : j["vertices"]) {
    check_keys(vj, {"id", "role", "dim"}, "vertex");
    for (const char* req : {"id", "role", "dim"})
      if (!vj.contains(req)) throw parse_error(std::string("vertex: missing key '") + req + "'");
    Vertex v;
    v.id = vj["id"].get<int>();
    v.role = role_from_string(vj["role"].get<std::string>());
    v.dim = vj["dim"].get<int>();
    g.vertices.push_back(v);
  }
  if (!j["edges"].is_array()) throw parse_error("graph JSON: 'edges' must be an array");
  for (const json& ej : j["edges"]) {
    check_keys(ej, {"u", "v", "cu", "cv", "w"}, "edge");
    for (const char* req : {"u", "v", "cu", "cv", "w"})
      if (!ej.contains(req)) throw parse_error(std::string("edge: missing key '") + req + "'");
    g.edges.push_back(canonical_edge(ej["u"].get<int>(), ej["v"].get<int>(),
                                     ej["cu"].get<int>(), ej["cv"].get<int>(),
                                     weight_from_json(ej["w"])));
  }
  if (j.contains("total_photons")) g.total_photons = j["total_photons"].get<int>();
  if (j.contains("pair_count")) g.pair_count = j["pair_count"].get<int>();

  const int merges = canonicalize(g);
  if (merges > 0 && warnings)
    warnings->push_back(std::to_string(merges) + " duplicate edge key(s) merged by weight addition");
  return g;
}

}  // namespace graphdisc
