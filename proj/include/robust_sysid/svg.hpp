#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace rsid {

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y), y on a log axis
};

struct SvgPanel {
  std::string title;
  std::vector<SvgSeries> series;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline const char* svg_palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  return colors[i % 6];
}

}  // namespace detail

/// Fixed-canvas row of log-y line charts. Output depends only on the input
/// data, so identical inputs produce byte-identical files.
inline void write_log_panels_svg(std::ostream& out, const std::string& figure_title,
                                 const std::vector<SvgPanel>& panels) {
  constexpr double kPanelW = 370.0, kPanelH = 330.0, kMarginL = 56.0, kMarginR = 14.0;
  constexpr double kMarginT = 46.0, kMarginB = 42.0, kGap = 18.0;
  constexpr double kFloor = 1e-16;
  const double width = panels.size() * kPanelW + (panels.size() - 1) * kGap + 20.0;
  const double height = kPanelH + 40.0;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::svg_num(width)
      << "\" height=\"" << detail::svg_num(height) << "\" viewBox=\"0 0 "
      << detail::svg_num(width) << " " << detail::svg_num(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << detail::svg_num(width / 2.0)
      << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">"
      << figure_title << "</text>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const SvgPanel& panel = panels[pi];
    const double x0 = 10.0 + pi * (kPanelW + kGap) + kMarginL;
    const double y0 = kMarginT;
    const double plot_w = kPanelW - kMarginL - kMarginR;
    const double plot_h = kPanelH - kMarginT - kMarginB;

    double xmin = 0.0, xmax = 1.0;
    double ymin_log = 0.0, ymax_log = 1.0;
    bool first = true;
    for (const SvgSeries& s : panel.series) {
      for (const auto& [x, y] : s.points) {
        const double ly = std::log10(std::max(std::abs(y), kFloor));
        if (first) {
          xmin = xmax = x;
          ymin_log = ymax_log = ly;
          first = false;
        } else {
          xmin = std::min(xmin, x);
          xmax = std::max(xmax, x);
          ymin_log = std::min(ymin_log, ly);
          ymax_log = std::max(ymax_log, ly);
        }
      }
    }
    if (xmax <= xmin) xmax = xmin + 1.0;
    ymin_log = std::floor(ymin_log);
    ymax_log = std::ceil(ymax_log);
    if (ymax_log <= ymin_log) ymax_log = ymin_log + 1.0;

    const auto px = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * plot_w; };
    const auto py = [&](double ly) {
      return y0 + plot_h - (ly - ymin_log) / (ymax_log - ymin_log) * plot_h;
    };

    out << "<rect x=\"" << detail::svg_num(x0) << "\" y=\"" << detail::svg_num(y0)
        << "\" width=\"" << detail::svg_num(plot_w) << "\" height=\"" << detail::svg_num(plot_h)
        << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << detail::svg_num(x0 + plot_w / 2.0) << "\" y=\""
        << detail::svg_num(y0 - 10.0)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << panel.title
        << "</text>\n";

    // y ticks at whole decades (at most ~8 labels)
    const int decades = static_cast<int>(ymax_log - ymin_log);
    const int tick_step = std::max(1, (decades + 7) / 8);
    for (int d = 0; d <= decades; d += tick_step) {
      const double ly = ymin_log + d;
      out << "<line x1=\"" << detail::svg_num(x0) << "\" y1=\"" << detail::svg_num(py(ly))
          << "\" x2=\"" << detail::svg_num(x0 + plot_w) << "\" y2=\"" << detail::svg_num(py(ly))
          << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
      out << "<text x=\"" << detail::svg_num(x0 - 6.0) << "\" y=\""
          << detail::svg_num(py(ly) + 3.0)
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">1e"
          << static_cast<long long>(ly) << "</text>\n";
    }
    // x ticks: five evenly spaced
    for (int t = 0; t <= 4; ++t) {
      const double x = xmin + (xmax - xmin) * t / 4.0;
      out << "<line x1=\"" << detail::svg_num(px(x)) << "\" y1=\""
          << detail::svg_num(y0 + plot_h) << "\" x2=\"" << detail::svg_num(px(x)) << "\" y2=\""
          << detail::svg_num(y0 + plot_h + 4.0) << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
      out << "<text x=\"" << detail::svg_num(px(x)) << "\" y=\""
          << detail::svg_num(y0 + plot_h + 16.0)
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
          << static_cast<long long>(std::llround(x)) << "</text>\n";
    }

    for (std::size_t si = 0; si < panel.series.size(); ++si) {
      const SvgSeries& s = panel.series[si];
      if (s.points.empty()) continue;
      out << "<polyline fill=\"none\" stroke=\"" << detail::svg_palette(si)
          << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) {
        const double ly = std::log10(std::max(std::abs(y), kFloor));
        out << detail::svg_num(px(x)) << "," << detail::svg_num(py(ly)) << " ";
      }
      out << "\"/>\n";
    }

    // legend in the first panel only
    if (pi == 0) {
      for (std::size_t si = 0; si < panel.series.size(); ++si) {
        const double ly = y0 + 12.0 + 14.0 * si;
        out << "<line x1=\"" << detail::svg_num(x0 + plot_w - 86.0) << "\" y1=\""
            << detail::svg_num(ly) << "\" x2=\"" << detail::svg_num(x0 + plot_w - 66.0)
            << "\" y2=\"" << detail::svg_num(ly) << "\" stroke=\"" << detail::svg_palette(si)
            << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << detail::svg_num(x0 + plot_w - 60.0) << "\" y=\""
            << detail::svg_num(ly + 3.0) << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << panel.series[si].label << "</text>\n";
      }
    }
  }
  out << "</svg>\n";
}

}  // namespace rsid
