#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "innosurv/errors.hpp"

namespace innosurv {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y), x ascending for step series
};

enum class PlotKind { line, step };

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  double width = 640.0;
  double height = 420.0;
};

// Standalone SVG with axes, ticks and a legend. Each series becomes one
// <path>; step series move horizontally to the next x and then vertically to
// its y ("H x V y"), one pair per step. Output depends only on the inputs.
// A zero-width axis range is padded by one unit each side, with a warning.
std::string svg_document(const std::vector<PlotSeries>& series, PlotKind kind, const PlotOptions& options = {},
                         Warnings* warnings = nullptr);

void render_svg(const std::vector<PlotSeries>& series, PlotKind kind, const std::filesystem::path& path,
                const PlotOptions& options = {}, Warnings* warnings = nullptr);

}  // namespace innosurv
