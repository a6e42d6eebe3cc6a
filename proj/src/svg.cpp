#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "bstack/comparisons.hpp"
#include "bstack/ppc.hpp"

namespace bstack {

namespace {

constexpr double kWidth = 480, kHeight = 320;
constexpr double kLeft = 56, kRight = 16, kTop = 36, kBottom = 48;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + "<text x=\"" + num(kWidth / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" + escape(title) + "</text>\n";
}

std::string axes(double x0, double x1, double y0, double y1, const std::string& y_label) {
  const double px0 = kLeft, px1 = kWidth - kRight, py0 = kHeight - kBottom, py1 = kTop;
  std::string out = "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px1) + "\" y2=\"" + num(py0) +
                    "\" stroke=\"black\"/>\n<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px0) +
                    "\" y2=\"" + num(py1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    const double px = px0 + (px1 - px0) * i / 4.0, py = py0 + (py1 - py0) * i / 4.0;
    if (x1 > x0)
      out += "<text x=\"" + num(px) + "\" y=\"" + num(py0 + 16) + "\" text-anchor=\"middle\">" + tick(fx) + "</text>\n";
    out += "<text x=\"" + num(px0 - 6) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" + tick(fy) + "</text>\n";
  }
  out += "<text x=\"14\" y=\"" + num((py0 + py1) / 2) + "\" transform=\"rotate(-90 14 " + num((py0 + py1) / 2) +
         ")\" text-anchor=\"middle\">" + escape(y_label) + "</text>\n";
  return out;
}

}  // namespace

std::string histogram_svg(const GroupReport& group, const std::string& title) {
  const auto& h = group.histogram;
  const double x0 = std::min(h.edges.front(), group.observed), x1 = std::max(h.edges.back(), group.observed);
  const std::size_t max_count = h.counts.empty() ? 1 : std::max<std::size_t>(1, *std::max_element(h.counts.begin(), h.counts.end()));
  const double px0 = kLeft, px1 = kWidth - kRight, py0 = kHeight - kBottom, py1 = kTop;
  auto sx = [&](double x) { return px0 + (x - x0) / (x1 - x0) * (px1 - px0); };
  auto sy = [&](double c) { return py0 - c / static_cast<double>(max_count) * (py0 - py1); };

  std::string out = header(title);
  out += axes(x0, x1, 0.0, static_cast<double>(max_count), "count");
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double left = sx(h.edges[b]), right = sx(h.edges[b + 1]), top = sy(static_cast<double>(h.counts[b]));
    out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(std::max(0.0, right - left)) +
           "\" height=\"" + num(py0 - top) + "\" fill=\"#9ecae1\" stroke=\"#3182bd\" stroke-width=\"0.5\"/>\n";
  }
  const double ox = sx(group.observed);
  out += "<line x1=\"" + num(ox) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(ox) + "\" y2=\"" + num(py1) +
         "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  out += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 10) + "\" text-anchor=\"middle\">T(y_rep); TSPPPV = " +
         tick(group.tspppv) + "</text>\n";
  out += "</svg>\n";
  return out;
}

std::string cells_svg(const CellPosteriors& cells, const std::string& y_label) {
  const auto& grid = cells.grid;
  const std::size_t last = grid.focal.size() - 1;
  std::vector<std::string> x_levels;
  for (const auto& c : grid.cells)
    if (std::find(x_levels.begin(), x_levels.end(), c.levels[last]) == x_levels.end()) x_levels.push_back(c.levels[last]);

  // Series key: profile quantile + levels of the other focal variables.
  std::map<std::string, std::vector<const CellPosterior*>> series;
  std::vector<std::string> order;
  for (const auto& cp : cells.cells) {
    std::string key = "q=" + tick(cp.quantile);
    for (std::size_t f = 0; f < last; ++f) key += ", " + grid.focal[f] + "=" + grid.cells[cp.cell].levels[f];
    if (!series.count(key)) order.push_back(key);
    series[key].push_back(&cp);
  }

  double y0 = 1.0, y1 = 0.0;
  for (const auto& cp : cells.cells) {
    y0 = std::min(y0, cp.summary.q05);
    y1 = std::max(y1, cp.summary.q95);
  }
  if (y1 <= y0) {
    y0 = std::max(0.0, y0 - 0.05);
    y1 = std::min(1.0, y1 + 0.05);
  }
  const double px0 = kLeft, px1 = kWidth - kRight - 120, py0 = kHeight - kBottom, py1 = kTop;
  auto sy = [&](double y) { return py0 - (y - y0) / (y1 - y0) * (py0 - py1); };
  const double slot = (px1 - px0) / static_cast<double>(x_levels.size());

  static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"};
  std::string out = header("Predicted probability by " + grid.focal[last]);
  out += axes(0, 0, y0, y1, y_label);
  for (std::size_t i = 0; i < x_levels.size(); ++i)
    out += "<text x=\"" + num(px0 + slot * (static_cast<double>(i) + 0.5)) + "\" y=\"" + num(py0 + 16) +
           "\" text-anchor=\"middle\">" + escape(grid.focal[last] + "=" + x_levels[i]) + "</text>\n";
  for (std::size_t s = 0; s < order.size(); ++s) {
    const char* color = palette[s % 8];
    const double offset = (static_cast<double>(s) + 0.5) / static_cast<double>(order.size()) - 0.5;
    for (const CellPosterior* cp : series[order[s]]) {
      const auto& level = grid.cells[cp->cell].levels[last];
      const auto xi = static_cast<double>(std::find(x_levels.begin(), x_levels.end(), level) - x_levels.begin());
      const double x = px0 + slot * (xi + 0.5 + 0.8 * offset);
      out += "<line x1=\"" + num(x) + "\" y1=\"" + num(sy(cp->summary.q05)) + "\" x2=\"" + num(x) + "\" y2=\"" +
             num(sy(cp->summary.q95)) + "\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
      out += "<circle cx=\"" + num(x) + "\" cy=\"" + num(sy(cp->summary.median)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    out += "<circle cx=\"" + num(px1 + 14) + "\" cy=\"" + num(py1 + 14 * static_cast<double>(s)) + "\" r=\"3\" fill=\"" +
           color + "\"/>\n<text x=\"" + num(px1 + 22) + "\" y=\"" + num(py1 + 14 * static_cast<double>(s) + 4) + "\">" +
           escape(order[s]) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace bstack
