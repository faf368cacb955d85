#include "graphdisc/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace graphdisc {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::string format_weight(cplx w) {
  if (w.imag() == 0.0) return format_number(w.real());
  std::string s = format_number(w.real());
  s += (w.imag() < 0.0) ? "-" : "+";
  s += format_number(std::abs(w.imag()));
  s += "i";
  return s;
}

const char* shape_for(Role r) {
  switch (r) {
    case Role::detector: return "circle";
    case Role::input: return "triangle";
    case Role::ancilla: return "square";
    case Role::environment: return "star";
  }
  return "circle";
}

}  // namespace

std::string render_dot(const Graph& g, const RenderStyle& style) {
  int max_dim = 1;
  for (const auto& v : g.vertices) max_dim = std::max(max_dim, v.dim);
  if (max_dim > static_cast<int>(style.palette.size()))
    throw parse_error("graph uses " + std::to_string(max_dim) +
                      " mode colors but the palette has only " +
                      std::to_string(style.palette.size()));

  std::ostringstream out;
  out << "graph experiment {\n";
  out << "  layout=neato;\n";
  out << "  node [fontsize=12, style=filled, fillcolor=white];\n";

  const int n = g.vertex_count();
  for (int i = 0; i < n; ++i) {
    // Clockwise from the top of the circle.
    double angle = kPi / 2.0 - 2.0 * kPi * i / n;
    char pos[64];
    std::snprintf(pos, sizeof(pos), "%.4f,%.4f", style.radius * std::cos(angle),
                  style.radius * std::sin(angle));
    out << "  " << i << " [shape=" << shape_for(g.role(i)) << ", pos=\"" << pos
        << "!\"];\n";
  }

  for (const auto& e : g.edges) {
    std::string color = style.palette[static_cast<size_t>(e.cu)];
    if (e.cu != e.cv)
      color += ";0.5:" + style.palette[static_cast<size_t>(e.cv)];
    std::string label = format_weight(e.w);
    if (e.w.imag() == 0.0 && e.w.real() < 0.0)
      label += " " + style.negative_marker;
    out << "  " << e.u << " -- " << e.v << " [color=\"" << color
        << "\", label=\"" << label << "\"];\n";
  }

  out << "}\n";
  return out.str();
}

}  // namespace graphdisc
