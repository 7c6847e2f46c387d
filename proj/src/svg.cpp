#include "innosurv/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "innosurv/io.hpp"

namespace innosurv {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
constexpr double kMarginLeft = 60.0;
constexpr double kMarginRight = 140.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
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

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
};

void pad(Range& r, const char* axis, Warnings* warnings) {
  if (r.hi - r.lo > 0.0) return;
  warn(warnings, std::string("degenerate ") + axis + " range; padded by one unit");
  r.lo -= 1.0;
  r.hi += 1.0;
}

}  // namespace

std::string svg_document(const std::vector<PlotSeries>& series, PlotKind kind, const PlotOptions& options,
                         Warnings* warnings) {
  Range xr, yr;
  std::size_t total = 0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) throw DomainError("plot series '" + s.name + "' has a non-finite point");
      xr.lo = std::min(xr.lo, x);
      xr.hi = std::max(xr.hi, x);
      yr.lo = std::min(yr.lo, y);
      yr.hi = std::max(yr.hi, y);
      ++total;
    }
  if (total == 0) throw DomainError("nothing to plot");
  pad(xr, "x", warnings);
  pad(yr, "y", warnings);

  const double plot_w = options.width - kMarginLeft - kMarginRight;
  const double plot_h = options.height - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return kMarginTop + (yr.hi - y) / (yr.hi - yr.lo) * plot_h; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(options.width) + "\" height=\"" +
         num(options.height) + "\" viewBox=\"0 0 " + num(options.width) + " " + num(options.height) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + num(options.width) + "\" height=\"" + num(options.height) +
         "\" fill=\"white\"/>\n";
  if (!options.title.empty())
    out += "<text x=\"" + num(kMarginLeft) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
           escape(options.title) + "</text>\n";

  // Axes and ticks.
  out += "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  out += "<line x1=\"" + num(kMarginLeft) + "\" y1=\"" + num(kMarginTop + plot_h) + "\" x2=\"" +
         num(kMarginLeft + plot_w) + "\" y2=\"" + num(kMarginTop + plot_h) + "\"/>\n";
  out += "<line x1=\"" + num(kMarginLeft) + "\" y1=\"" + num(kMarginTop) + "\" x2=\"" + num(kMarginLeft) +
         "\" y2=\"" + num(kMarginTop + plot_h) + "\"/>\n";
  out += "</g>\n<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"10\">\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    out += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(kMarginTop + plot_h + 16) + "\" text-anchor=\"middle\">" +
           tick_label(fx) + "</text>\n";
    out += "<text x=\"" + num(kMarginLeft - 6) + "\" y=\"" + num(py(fy) + 3) + "\" text-anchor=\"end\">" +
           tick_label(fy) + "</text>\n";
  }
  out += "</g>\n";
  if (!options.x_label.empty())
    out += "<text x=\"" + num(kMarginLeft + plot_w / 2) + "\" y=\"" + num(options.height - 10) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(options.x_label) +
           "</text>\n";
  if (!options.y_label.empty())
    out += "<text x=\"14\" y=\"" + num(kMarginTop + plot_h / 2) + "\" transform=\"rotate(-90 14 " +
           num(kMarginTop + plot_h / 2) + ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           escape(options.y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    if (s.points.empty()) continue;
    const char* colour = kPalette[k % std::size(kPalette)];
    std::string d = "M " + num(px(s.points[0].first)) + " " + num(py(s.points[0].second));
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      if (kind == PlotKind::step)
        d += " H " + num(px(s.points[i].first)) + " V " + num(py(s.points[i].second));
      else
        d += " L " + num(px(s.points[i].first)) + " " + num(py(s.points[i].second));
    }
    out += "<path class=\"series\" data-name=\"" + escape(s.name) + "\" d=\"" + d + "\" stroke=\"" + colour +
           "\" stroke-width=\"1.5\" fill=\"none\"/>\n";
    if (s.points.size() == 1)
      out += "<circle cx=\"" + num(px(s.points[0].first)) + "\" cy=\"" + num(py(s.points[0].second)) +
             "\" r=\"3\" fill=\"" + colour + "\"/>\n";
    const double ly = kMarginTop + 16.0 * static_cast<double>(k);
    const double lx = kMarginLeft + plot_w + 12;
    out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 18) + "\" y2=\"" + num(ly) +
           "\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(lx + 24) + "\" y=\"" + num(ly + 4) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
           escape(s.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void render_svg(const std::vector<PlotSeries>& series, PlotKind kind, const std::filesystem::path& path,
                const PlotOptions& options, Warnings* warnings) {
  write_file_atomic(path, svg_document(series, kind, options, warnings));
}

}  // namespace innosurv
