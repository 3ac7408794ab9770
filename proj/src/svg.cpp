#include "gatediag/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace gatediag {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 72, kRight = 24, kTop = 40, kBottom = 56;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

double to_axis(double v, AxisScale scale) {
  return scale == AxisScale::Log10 ? std::log10(v) : v;
}

bool usable(double v, AxisScale scale) {
  return std::isfinite(v) && (scale == AxisScale::Linear || v > 0.0);
}

// Tick positions in axis (possibly log) coordinates, with labels.
std::vector<std::pair<double, std::string>> make_ticks(const Range& r,
                                                       AxisScale scale) {
  std::vector<std::pair<double, std::string>> ticks;
  if (scale == AxisScale::Log10) {
    const int lo = static_cast<int>(std::floor(r.lo));
    const int hi = static_cast<int>(std::ceil(r.hi));
    int stride = 1 + (hi - lo) / 8;
    for (int e = lo; e <= hi; e += stride) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "1e%d", e);
      ticks.push_back({static_cast<double>(e), buf});
    }
    return ticks;
  }
  const double span = r.hi - r.lo;
  const double raw = span > 0.0 ? span / 6.0 : 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) { step = m * mag; break; }
  const double first = std::ceil(r.lo / step) * step;
  for (double v = first; v <= r.hi + 1e-9 * step; v += step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v == 0.0 ? 0.0 : v);
    ticks.push_back({v, buf});
  }
  return ticks;
}

}  // namespace

std::string series_color(const std::string& label) {
  if (label == "const") return "#1f77b4";
  if (label == "shared") return "#ff7f0e";
  if (label == "diag") return "#2ca02c";
  if (label == "gru") return "#d62728";
  if (label == "lstm") return "#9467bd";
  return "#555555";
}

void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec,
                    std::span<const PlotSeries> series) {
  Range rx, ry;
  for (const PlotSeries& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k)
      if (usable(s.x[k], spec.x_scale) && usable(s.y[k], spec.y_scale)) {
        rx.add(to_axis(s.x[k], spec.x_scale));
        ry.add(to_axis(s.y[k], spec.y_scale));
      }
  if (!(rx.lo <= rx.hi)) { rx.lo = 0.0; rx.hi = 1.0; }
  if (!(ry.lo <= ry.hi)) { ry.lo = 0.0; ry.hi = 1.0; }
  if (rx.hi == rx.lo) { rx.lo -= 0.5; rx.hi += 0.5; }
  if (ry.hi == ry.lo) { ry.lo -= 0.5; ry.hi += 0.5; }
  // A small margin keeps extreme points off the frame.
  const double pad_x = 0.02 * (rx.hi - rx.lo);
  const double pad_y = 0.04 * (ry.hi - ry.lo);
  rx.lo -= pad_x; rx.hi += pad_x;
  ry.lo -= pad_y; ry.hi += pad_y;

  auto px = [&](double v) {
    return kLeft + (to_axis(v, spec.x_scale) - rx.lo) / (rx.hi - rx.lo) *
                       (kWidth - kLeft - kRight);
  };
  auto py = [&](double v) {
    return kHeight - kBottom -
           (to_axis(v, spec.y_scale) - ry.lo) / (ry.hi - ry.lo) *
               (kHeight - kTop - kBottom);
  };

  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::fprintf(f,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" "
               "height=\"%g\" viewBox=\"0 0 %g %g\">\n",
               kWidth, kHeight, kWidth, kHeight);
  std::fprintf(f, "<rect width=\"%g\" height=\"%g\" fill=\"white\"/>\n", kWidth,
               kHeight);
  std::fprintf(f,
               "<text x=\"%g\" y=\"24\" font-family=\"sans-serif\" "
               "font-size=\"15\" text-anchor=\"middle\">%s</text>\n",
               (kLeft + kWidth - kRight) / 2, spec.title.c_str());

  // Frame.
  std::fprintf(f,
               "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" "
               "fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
               kLeft, kTop, kWidth - kLeft - kRight, kHeight - kTop - kBottom);

  // Ticks and grid.
  for (const auto& [v, label] : make_ticks(rx, spec.x_scale)) {
    if (v < rx.lo || v > rx.hi) continue;
    const double x =
        kLeft + (v - rx.lo) / (rx.hi - rx.lo) * (kWidth - kLeft - kRight);
    std::fprintf(f,
                 "<line x1=\"%s\" y1=\"%g\" x2=\"%s\" y2=\"%g\" "
                 "stroke=\"#ddd\" stroke-width=\"0.5\"/>\n",
                 fmt(x).c_str(), kTop, fmt(x).c_str(), kHeight - kBottom);
    std::fprintf(f,
                 "<text x=\"%s\" y=\"%g\" font-family=\"sans-serif\" "
                 "font-size=\"11\" text-anchor=\"middle\">%s</text>\n",
                 fmt(x).c_str(), kHeight - kBottom + 16, label.c_str());
  }
  for (const auto& [v, label] : make_ticks(ry, spec.y_scale)) {
    if (v < ry.lo || v > ry.hi) continue;
    const double y = kHeight - kBottom -
                     (v - ry.lo) / (ry.hi - ry.lo) * (kHeight - kTop - kBottom);
    std::fprintf(f,
                 "<line x1=\"%g\" y1=\"%s\" x2=\"%g\" y2=\"%s\" "
                 "stroke=\"#ddd\" stroke-width=\"0.5\"/>\n",
                 kLeft, fmt(y).c_str(), kWidth - kRight, fmt(y).c_str());
    std::fprintf(f,
                 "<text x=\"%g\" y=\"%s\" font-family=\"sans-serif\" "
                 "font-size=\"11\" text-anchor=\"end\">%s</text>\n",
                 kLeft - 6, fmt(y + 4).c_str(), label.c_str());
  }

  // Axis labels.
  std::fprintf(f,
               "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"13\" text-anchor=\"middle\">%s</text>\n",
               (kLeft + kWidth - kRight) / 2, kHeight - 12, spec.x_label.c_str());
  std::fprintf(f,
               "<text x=\"16\" y=\"%g\" font-family=\"sans-serif\" "
               "font-size=\"13\" text-anchor=\"middle\" "
               "transform=\"rotate(-90 16 %g)\">%s</text>\n",
               (kTop + kHeight - kBottom) / 2, (kTop + kHeight - kBottom) / 2,
               spec.y_label.c_str());

  // Series.
  for (const PlotSeries& s : series) {
    std::string points;
    double prev_y = 0.0;
    bool have_prev = false;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!usable(s.x[k], spec.x_scale) || !usable(s.y[k], spec.y_scale)) {
        have_prev = false;
        continue;
      }
      const double x = px(s.x[k]), y = py(s.y[k]);
      if (s.step && have_prev)
        points += fmt(x) + "," + fmt(prev_y) + " ";
      points += fmt(x) + "," + fmt(y) + " ";
      prev_y = y;
      have_prev = true;
    }
    if (points.empty()) continue;
    std::fprintf(f,
                 "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.6\" "
                 "points=\"%s\"/>\n",
                 s.color.c_str(), points.c_str());
    if (spec.markers)
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        if (!usable(s.x[k], spec.x_scale) || !usable(s.y[k], spec.y_scale))
          continue;
        std::fprintf(f,
                     "<circle cx=\"%s\" cy=\"%s\" r=\"2.4\" fill=\"%s\"/>\n",
                     fmt(px(s.x[k])).c_str(), fmt(py(s.y[k])).c_str(),
                     s.color.c_str());
      }
  }

  // Legend.
  double ly = kTop + 10;
  for (const PlotSeries& s : series) {
    if (s.label.empty()) continue;
    std::fprintf(f,
                 "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" "
                 "stroke=\"%s\" stroke-width=\"2\"/>\n",
                 kWidth - kRight - 110.0, ly, kWidth - kRight - 86.0, ly,
                 s.color.c_str());
    std::fprintf(f,
                 "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" "
                 "font-size=\"12\">%s</text>\n",
                 kWidth - kRight - 80.0, ly + 4, s.label.c_str());
    ly += 16;
  }

  std::fprintf(f, "</svg>\n");
  std::fclose(f);
}

}  // namespace gatediag
