#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gatediag {

enum class AxisScale { Linear, Log10 };

struct PlotSeries {
  std::string label;
  std::string color;
  std::vector<double> x, y;
  bool step = false;  // render as a staircase (histograms, CCDFs)
};

struct PlotSpec {
  std::string title, x_label, y_label;
  AxisScale x_scale = AxisScale::Linear;
  AxisScale y_scale = AxisScale::Linear;
  bool markers = false;
};

// Self-contained deterministic SVG; nonpositive values are dropped on log
// axes. Data points map affinely into the viewport, printed at %.10g so
// geometric checks on the emitted coordinates stay meaningful.
void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec,
                    std::span<const PlotSeries> series);

// Fixed palette keyed by cell-kind label, stable across plots.
std::string series_color(const std::string& label);

}  // namespace gatediag
