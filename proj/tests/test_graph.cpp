#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "graphdisc/graph.hpp"
#include "helpers.hpp"

using namespace graphdisc;
using testutil::load_fixture_graph;
using testutil::random_graph;

namespace {

std::vector<Vertex> detectors(int n, int dim) {
  std::vector<Vertex> v;
  for (int i = 0; i < n; ++i) v.push_back({i, Role::detector, dim});
  return v;
}

bool graphs_equal(const Graph& a, const Graph& b) {
  if (a.mode != b.mode || a.domain != b.domain) return false;
  if (a.total_photons != b.total_photons || a.pair_count != b.pair_count) return false;
  if (a.vertices.size() != b.vertices.size() || a.edges.size() != b.edges.size()) return false;
  for (size_t i = 0; i < a.vertices.size(); ++i) {
    if (a.vertices[i].id != b.vertices[i].id) return false;
    if (a.vertices[i].role != b.vertices[i].role) return false;
    if (a.vertices[i].dim != b.vertices[i].dim) return false;
  }
  for (size_t i = 0; i < a.edges.size(); ++i) {
    if (a.edges[i].key() != b.edges[i].key()) return false;
    if (a.edges[i].w != b.edges[i].w) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("canonical edge ordering") {
  Edge e = canonical_edge(3, 1, 0, 1, {0.5, 0.0});
  CHECK(e.u == 1);
  CHECK(e.v == 3);
  CHECK(e.cu == 1);
  CHECK(e.cv == 0);

  Edge loop = canonical_edge(2, 2, 1, 0, {0.5, 0.0});
  CHECK(loop.cu == 0);
  CHECK(loop.cv == 1);
}

TEST_CASE("construction merges duplicate keys by weight addition") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real, detectors(2, 2),
                       {canonical_edge(0, 1, 0, 0, {0.25, 0.0}),
                        canonical_edge(1, 0, 0, 0, {0.5, 0.0}),
                        canonical_edge(0, 1, 1, 0, {0.125, 0.0})});
  REQUIRE(g.edge_count() == 2);
  CHECK(g.edges[0].w == cplx{0.75, 0.0});
  CHECK(g.edges[1].cu == 1);
  CHECK(g.edges[1].cv == 0);
}

TEST_CASE("canonicalize is idempotent and input-order insensitive") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = random_graph(rng);
    Graph again = g;
    CHECK(canonicalize(again) == 0);
    CHECK(graphs_equal(g, again));

    Graph shuffled = g;
    for (size_t i = shuffled.edges.size(); i > 1; --i)
      std::swap(shuffled.edges[i - 1], shuffled.edges[rng() % i]);
    canonicalize(shuffled);
    CHECK(graphs_equal(g, shuffled));
  }
}

TEST_CASE("validation accepts the minimal GHZ graph") {
  Graph g = load_fixture_graph("ghz_4_2_minimal/graph.json");
  ValidationReport rep = validate(g);
  CHECK(rep.ok);
  CHECK(rep.problems.empty());
}

TEST_CASE("validation accepts every encoded fixture graph") {
  for (const char* rel : {"ghz_4_2_minimal/graph.json", "ghz_6_3_asymptotic/graph.json",
                          "ghz_3_2_environment/graph.json", "noon_2_2/graph.json",
                          "noon_3_2_ancilla/graph.json"}) {
    CAPTURE(rel);
    CHECK(validate(load_fixture_graph(rel)).ok);
  }
}

TEST_CASE("validation rejects edges between input vertices") {
  std::vector<Vertex> v = {{0, Role::input, 2}, {1, Role::input, 2}, {2, Role::detector, 2},
                           {3, Role::detector, 2}};
  Graph g = make_graph(Mode::postselect, WeightDomain::real, v,
                       {canonical_edge(0, 1, 0, 0, {1.0, 0.0})});
  CHECK_FALSE(validate(g).ok);
}

TEST_CASE("validation rejects self-loops outside fock mode") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real, detectors(2, 2),
                       {canonical_edge(0, 0, 0, 0, {1.0, 0.0})});
  CHECK_FALSE(validate(g).ok);
  g.mode = Mode::fock;
  g.total_photons = 2;
  CHECK(validate(g).ok);
}

TEST_CASE("validation rejects environment misuse") {
  std::vector<Vertex> v = {{0, Role::detector, 2}, {1, Role::environment, 2}};
  Graph loop = make_graph(Mode::postselect, WeightDomain::real, v,
                          {canonical_edge(1, 1, 0, 0, {1.0, 0.0})});
  CHECK_FALSE(validate(loop).ok);

  std::vector<Vertex> two_env = {{0, Role::environment, 2}, {1, Role::environment, 2}};
  CHECK_FALSE(validate(make_graph(Mode::postselect, WeightDomain::real, two_env, {})).ok);

  std::vector<Vertex> env_fock = {{0, Role::detector, 2}, {1, Role::environment, 2}};
  Graph gf = make_graph(Mode::fock, WeightDomain::real, env_fock, {}, 2);
  CHECK_FALSE(validate(gf).ok);
}

TEST_CASE("validation rejects out-of-range colors and bad ids") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real, detectors(2, 2),
                       {canonical_edge(0, 1, 0, 2, {1.0, 0.0})});
  CHECK_FALSE(validate(g).ok);

  std::vector<Vertex> skewed = {{0, Role::detector, 2}, {2, Role::detector, 2}};
  CHECK_FALSE(validate(make_graph(Mode::postselect, WeightDomain::real, skewed, {})).ok);
}

TEST_CASE("validation pins real-domain weights to a zero imaginary part") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real, detectors(2, 2),
                       {canonical_edge(0, 1, 0, 0, {1.0, 1e-12})});
  CHECK_FALSE(validate(g).ok);
  g.domain = WeightDomain::complex_amps;
  CHECK(validate(g).ok);
}

TEST_CASE("validation requires an even photon budget in fock mode") {
  Graph g = make_graph(Mode::fock, WeightDomain::real, detectors(2, 1),
                       {canonical_edge(0, 1, 0, 0, {1.0, 0.0})}, 3);
  CHECK_FALSE(validate(g).ok);
  g.total_photons = -1;
  CHECK_FALSE(validate(g).ok);
  g.total_photons = 4;
  CHECK(validate(g).ok);
}

TEST_CASE("serialize/deserialize round trip on random graphs") {
  std::mt19937_64 rng(7);
  testutil::RandomGraphOptions opt;
  opt.max_vertices = 10;
  opt.max_dim = 4;
  opt.max_edges = 12;
  opt.allow_env = true;
  for (int trial = 0; trial < 100; ++trial) {
    Graph g = random_graph(rng, opt);
    Graph back = deserialize(serialize(g));
    CHECK(graphs_equal(g, back));
    // serializing the round-tripped graph is byte-identical
    CHECK(serialize(back) == serialize(g));
  }
}

TEST_CASE("deserialize reports malformed JSON with a byte offset") {
  const std::string text = R"({"mode": "postselect", )";
  try {
    deserialize(text);
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("byte") != std::string::npos);
  }
}

TEST_CASE("deserialize rejects unknown keys and missing fields") {
  CHECK_THROWS_AS(deserialize(R"({"mode":"postselect","weight_domain":"real",
    "vertices":[],"edges":[],"surprise":1})"),
                  parse_error);
  CHECK_THROWS_AS(deserialize(R"({"mode":"postselect","vertices":[],"edges":[]})"),
                  parse_error);
  CHECK_THROWS_AS(deserialize(R"({"mode":"postselect","weight_domain":"real",
    "vertices":[{"id":0,"role":"detector","dim":2}],
    "edges":[{"u":0,"v":0,"cu":0,"cv":0,"w":1.0}]})"),
                  parse_error);
}

TEST_CASE("deserialize merges duplicate edges with a warning") {
  const std::string text = R"({
    "mode": "postselect", "weight_domain": "real",
    "vertices": [{"id":0,"role":"detector","dim":2},{"id":1,"role":"detector","dim":2}],
    "edges": [
      {"u":0,"v":1,"cu":0,"cv":0,"w":[0.25,0.0]},
      {"u":1,"v":0,"cu":0,"cv":0,"w":[0.5,0.0]}
    ]})";
  std::vector<std::string> warnings;
  Graph g = deserialize(text, &warnings);
  REQUIRE(g.edge_count() == 1);
  CHECK(g.edges[0].w == cplx{0.75, 0.0});
  REQUIRE(warnings.size() == 1);
}

TEST_CASE("environment lookup") {
  CHECK(environment_vertex(load_fixture_graph("ghz_4_2_minimal/graph.json")) == -1);
  CHECK(environment_vertex(load_fixture_graph("ghz_3_2_environment/graph.json")) == 3);
}
