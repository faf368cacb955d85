#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "graphdisc/render.hpp"

using namespace graphdisc;

namespace {

int count_of(const std::string& haystack, const std::string& needle) {
  int n = 0;
  for (size_t at = haystack.find(needle); at != std::string::npos;
       at = haystack.find(needle, at + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("two matchings draw two blue and two red edges") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real,
                       {{0, Role::detector, 2},
                        {1, Role::detector, 2},
                        {2, Role::detector, 2},
                        {3, Role::detector, 2}},
                       {{0, 1, 0, 0, 1.0},
                        {2, 3, 0, 0, 1.0},
                        {0, 2, 1, 1, 1.0},
                        {1, 3, 1, 1, 1.0}});
  std::string dot = render_dot(g);
  CHECK(count_of(dot, "shape=circle") == 4);
  CHECK(count_of(dot, "color=\"blue\"") == 2);
  CHECK(count_of(dot, "color=\"red\"") == 2);
  CHECK(count_of(dot, " -- ") == 4);
  // Pinned circular layout.
  CHECK(count_of(dot, "!\"") == 4);
}

TEST_CASE("negative real weights carry the diamond marker") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real,
                       {{0, Role::detector, 1}, {1, Role::detector, 1}},
                       {{0, 1, 0, 0, -1.0}});
  std::string dot = render_dot(g);
  CHECK(count_of(dot, "◆") == 1);
  CHECK(dot.find("label=\"-1 ◆\"") != std::string::npos);

  g.edges[0].w = 1.0;
  CHECK(count_of(render_dot(g), "◆") == 0);
}

TEST_CASE("mixed endpoint colors split the edge in half") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real,
                       {{0, Role::detector, 2}, {1, Role::detector, 2}},
                       {{0, 1, 0, 1, 0.5}});
  std::string dot = render_dot(g);
  CHECK(dot.find("color=\"blue;0.5:red\"") != std::string::npos);
}

TEST_CASE("vertex glyphs follow roles") {
  Graph g = make_graph(Mode::heralded, WeightDomain::real,
                       {{0, Role::input, 2},
                        {1, Role::detector, 2},
                        {2, Role::ancilla, 1},
                        {3, Role::environment, 1}},
                       {{1, 2, 0, 0, 1.0}});
  std::string dot = render_dot(g);
  CHECK(dot.find("0 [shape=triangle") != std::string::npos);
  CHECK(dot.find("1 [shape=circle") != std::string::npos);
  CHECK(dot.find("2 [shape=square") != std::string::npos);
  CHECK(dot.find("3 [shape=star") != std::string::npos);
}

TEST_CASE("complex weights and self-loops render") {
  Graph g = make_graph(Mode::fock, WeightDomain::complex_amps,
                       {{0, Role::detector, 2}, {1, Role::detector, 2}},
                       {{0, 0, 0, 1, cplx{0.0, 0.0}}, {0, 1, 0, 0, cplx{0.3, -0.4}}}, 2);
  std::string dot = render_dot(g);
  CHECK(dot.find("0 -- 0 ") != std::string::npos);
  CHECK(dot.find("label=\"0.3-0.4i\"") != std::string::npos);
  // Imaginary-carrying weights never get the negative marker.
  CHECK(count_of(dot, "◆") == 0);
}

TEST_CASE("empty graph is a valid empty diagram") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real, {}, {});
  std::string dot = render_dot(g);
  CHECK(dot.substr(0, 18) == "graph experiment {");
  CHECK(dot.find(" -- ") == std::string::npos);
  CHECK(dot.back() == '\n');
}

TEST_CASE("palette exhaustion is an error") {
  Graph g = make_graph(Mode::postselect, WeightDomain::real,
                       {{0, Role::detector, 9}, {1, Role::detector, 9}}, {});
  CHECK_THROWS_AS(render_dot(g), parse_error);

  RenderStyle wide;
  wide.palette.assign(9, "gray");
  CHECK_NOTHROW(render_dot(g, wide));
}
