#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ltlrl/product.hpp"
#include "ltlrl/world.hpp"

namespace ltlrl {

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colours[] = {"#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
                                  "#8c564b", "#e377c2", "#bcbd22", "#7f7f7f"};
  return colours[i % (sizeof colours / sizeof *colours)];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace detail

/// SVG of the labelled cells with a trajectory on top. The path is split
/// into one polyline per automaton-state run, each state in its own colour.
inline std::string render_svg(const LabeledWorld& world, const std::vector<TracePoint>& trace,
                              double pixels_per_unit = 0) {
  using detail::num;
  if (pixels_per_unit <= 0) pixels_per_unit = 600.0 / std::max(world.width(), world.height());
  const double W = world.width() * pixels_per_unit, H = world.height() * pixels_per_unit;
  auto px = [&](double x) { return x * pixels_per_unit; };
  auto py = [&](double y) { return H - y * pixels_per_unit; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\"" << num(H + 24)
    << "\" viewBox=\"0 0 " << num(W) << ' ' << num(H + 24) << "\">\n";
  o << "<rect class=\"world\" x=\"0\" y=\"0\" width=\"" << num(W) << "\" height=\"" << num(H)
    << "\" fill=\"#fafafa\" stroke=\"#333\"/>\n";

  std::map<LabelSet, std::size_t> label_colour;
  const double cw = world.cell_width(), ch = world.cell_height();
  for (std::size_t iy = 0; iy < world.cells_y(); ++iy) {
    for (std::size_t ix = 0; ix < world.cells_x(); ++ix) {
      const LabelSet l = world.cell(ix, iy);
      if (!l) continue;
      const bool unsafe = (l & world.unsafe_mask()) != 0;
      auto [it, fresh] = label_colour.emplace(l, label_colour.size());
      const char* fill = unsafe ? "#d62728" : detail::palette(it->second + 3);
      o << "<rect class=\"region\" data-label=\"" << detail::xml_escape(world.alphabet().format(l)) << "\" x=\""
        << num(px(static_cast<double>(ix) * cw)) << "\" y=\"" << num(py(static_cast<double>(iy + 1) * ch))
        << "\" width=\"" << num(px(cw)) << "\" height=\"" << num(px(ch)) << "\" fill=\"" << fill
        << "\" fill-opacity=\"0.35\"/>\n";
    }
  }

  std::map<std::string, std::size_t> state_colour;
  auto colour_of = [&](const std::string& q) {
    auto [it, fresh] = state_colour.emplace(q, state_colour.size());
    return detail::palette(it->second);
  };
  for (std::size_t i = 0; i + 1 < trace.size();) {
    const std::string& q = trace[i + 1].q;
    o << "<polyline class=\"segment\" data-q=\"" << detail::xml_escape(q) << "\" fill=\"none\" stroke=\""
      << colour_of(q) << "\" stroke-width=\"2\" points=\"";
    std::size_t j = i;
    o << num(px(trace[j].x)) << ',' << num(py(trace[j].y));
    while (j + 1 < trace.size() && trace[j + 1].q == q) {
      ++j;
      o << ' ' << num(px(trace[j].x)) << ',' << num(py(trace[j].y));
    }
    o << "\"/>\n";
    i = j;
  }
  for (const auto& p : trace)
    o << "<circle class=\"vertex\" data-q=\"" << detail::xml_escape(p.q) << "\" cx=\"" << num(px(p.x)) << "\" cy=\""
      << num(py(p.y)) << "\" r=\"2.5\" fill=\"" << colour_of(p.q) << "\"/>\n";

  double lx = 4;
  for (const auto& [q, idx] : state_colour) {
    o << "<text class=\"legend\" x=\"" << num(lx) << "\" y=\"" << num(H + 16) << "\" fill=\"" << detail::palette(idx)
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(q) << "</text>\n";
    lx += 12.0 + 8.0 * static_cast<double>(q.size());
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace ltlrl
