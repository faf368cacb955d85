#pragma once

#include <string>
#include <vector>

#include "graphdisc/graph.hpp"

namespace graphdisc {

struct RenderStyle {
  // Indexed by mode color. Mode 0 draws blue, mode 1 red.
  std::vector<std::string> palette = {"blue",   "red",   "green", "orange",
                                      "purple", "brown", "cyan",  "magenta"};
  // Appended to the weight label of an edge whose amplitude is real negative.
  std::string negative_marker = "◆";
  // Circle radius for the pinned vertex layout, in layout units.
  double radius = 2.0;
};

// Emits a Graphviz DOT description of the graph: vertices pinned on a circle
// with one glyph per role (circle detector, triangle input, square ancilla,
// star environment), edges colored by mode and split into two halves when the
// endpoint colors differ. Throws parse_error when a vertex dimension exceeds
// the palette.
std::string render_dot(const Graph& g, const RenderStyle& style = {});

}  // namespace graphdisc
