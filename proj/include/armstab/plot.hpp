// Minimal SVG renderer for acceleration-vs-time curves from rollout logs.
#pragma once

#include <sstream>

#include "armstab/sim.hpp"

namespace armstab {

namespace detail {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> t;
  std::vector<double> y;
};

inline void render_panel(std::ostringstream& os, const std::vector<Series>& series, double x0,
                         double y0, double width, double height, const std::string& title) {
  double t_min = 1e300, t_max = -1e300, y_min = 0.0, y_max = -1e300;
  for (const Series& s : series) {
    for (size_t i = 0; i < s.t.size(); ++i) {
      t_min = std::min(t_min, s.t[i]);
      t_max = std::max(t_max, s.t[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (t_max <= t_min) t_max = t_min + 1.0;
  if (y_max <= y_min) y_max = y_min + 1.0;
  y_max *= 1.05;

  auto px = [&](double t) { return x0 + (t - t_min) / (t_max - t_min) * width; };
  auto py = [&](double y) { return y0 + height - (y - y_min) / (y_max - y_min) * height; };

  os << "<rect x='" << x0 << "' y='" << y0 << "' width='" << width << "' height='" << height
     << "' fill='white' stroke='#444'/>\n";
  os << "<text x='" << x0 + 6 << "' y='" << y0 + 16 << "' font-size='13' fill='#222'>" << title
     << "</text>\n";
  os << "<text x='" << x0 - 4 << "' y='" << py(y_max / 1.05) + 4
     << "' font-size='10' text-anchor='end' fill='#222'>" << fmt_double(y_max / 1.05)
     << "</text>\n";
  os << "<text x='" << x0 - 4 << "' y='" << py(y_min) + 4
     << "' font-size='10' text-anchor='end' fill='#222'>" << fmt_double(y_min) << "</text>\n";
  os << "<text x='" << px(t_max) << "' y='" << y0 + height + 14
     << "' font-size='10' text-anchor='end' fill='#222'>t = " << fmt_double(t_max)
     << " s</text>\n";

  int legend = 0;
  for (const Series& s : series) {
    os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1' points='";
    for (size_t i = 0; i < s.t.size(); ++i) os << px(s.t[i]) << "," << py(s.y[i]) << " ";
    os << "'/>\n";
    os << "<text x='" << x0 + width - 150 << "' y='" << y0 + 16 + 14 * legend
       << "' font-size='11' fill='" << s.color << "'>" << s.label << "</text>\n";
    ++legend;
  }
}

}  // namespace detail

// Two stacked panels: EE linear and angular acceleration norms over time.
// Multiple logs overlay for method comparisons.
inline std::string plot_accel_svg(const std::vector<std::pair<std::string, const RolloutLog*>>& logs) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
  std::vector<detail::Series> lin, ang;
  int color = 0;
  for (const auto& [label, log] : logs) {
    detail::Series sl, sa;
    sl.label = sa.label = label;
    sl.color = sa.color = kColors[color % 5];
    ++color;
    for (const SimRecord& r : log->records) {
      sl.t.push_back(r.t);
      sl.y.push_back(r.a_glob.head<3>().norm());
      sa.t.push_back(r.t);
      sa.y.push_back(r.a_glob.tail<3>().norm());
    }
    lin.push_back(std::move(sl));
    ang.push_back(std::move(sa));
  }

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='900' height='560' "
        "viewBox='0 0 900 560'>\n";
  os << "<rect width='900' height='560' fill='#fafafa'/>\n";
  detail::render_panel(os, lin, 60, 20, 810, 240, "EE linear acceleration |a| (m/s^2)");
  detail::render_panel(os, ang, 60, 300, 810, 240, "EE angular acceleration |alpha| (rad/s^2)");
  os << "</svg>\n";
  return os.str();
}

}  // namespace armstab
