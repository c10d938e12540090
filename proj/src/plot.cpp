#include "vmf/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace vmf {

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
constexpr std::array<const char*, kNumMetrics> kUnits = {"mm", "mm", "mm", "mm", "deg"};

constexpr double kWidth = 640;
constexpr double kPanelHeight = 220;
constexpr double kLeft = 70, kRight = 170, kTop = 30, kBottom = 40;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escapeXml(const std::string& s) {
  std::string out;
  for (char c : s) {
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

/// Upper axis bound rounded to 1, 2 or 5 times a power of ten.
double niceCeil(double v) {
  if (!(v > 0)) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= v) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::vector<Metric> parseMetricList(const std::string& comma_separated) {
  std::vector<Metric> out;
  std::istringstream is(comma_separated);
  std::string name;
  while (std::getline(is, name, ',')) {
    if (name.empty()) continue;
    auto it = std::find(kMetricNames.begin(), kMetricNames.end(), name);
    if (it == kMetricNames.end()) throw std::invalid_argument("unknown metric '" + name + "'");
    out.push_back(static_cast<Metric>(it - kMetricNames.begin()));
  }
  if (out.empty()) throw std::invalid_argument("no metrics selected");
  return out;
}

std::string renderErrorChart(const std::vector<ReportSeries>& series,
                             const std::vector<Metric>& metrics) {
  if (series.empty()) throw std::invalid_argument("renderErrorChart: no series");
  if (metrics.empty()) throw std::invalid_argument("renderErrorChart: no metrics");
  std::size_t steps = 0;
  for (const auto& s : series) steps = std::max(steps, s.per_step.size());

  const double height = kPanelHeight * static_cast<double>(metrics.size());
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kPanelHeight - kTop - kBottom;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\""
     << num(height) << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(height) << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(height)
     << "\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < metrics.size(); ++p) {
    const Metric m = metrics[p];
    const double y0 = kPanelHeight * static_cast<double>(p);
    double ymax = 0;
    for (const auto& s : series)
      for (const auto& row : s.per_step) ymax = std::max(ymax, row[m]);
    ymax = niceCeil(ymax);
    const double x_span = steps > 1 ? static_cast<double>(steps - 1) : 1.0;
    auto px = [&](std::size_t i) { return kLeft + plot_w * (static_cast<double>(i) / x_span); };
    auto py = [&](double v) { return y0 + kTop + plot_h * (1.0 - v / ymax); };

    os << "<g class=\"panel\" id=\"panel-" << kMetricNames[m] << "\">\n";
    os << "<text x=\"" << num(kLeft) << "\" y=\"" << num(y0 + kTop - 10)
       << "\" font-family=\"sans-serif\" font-size=\"13\">" << kMetricNames[m] << " ("
       << kUnits[m] << ") vs. forecast step</text>\n";
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(kLeft + plot_w)
       << "\" y2=\"" << num(py(0)) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(0)) << "\" x2=\"" << num(kLeft)
       << "\" y2=\"" << num(py(ymax)) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = ymax * t / 4.0;
      os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(v) + 4)
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(v)
         << "</text>\n";
    }
    for (std::size_t i = 0; i < steps; ++i) {
      os << "<text x=\"" << num(px(i)) << "\" y=\"" << num(py(0) + 14)
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << (i + 1)
         << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
      const char* color = kPalette[s % kPalette.size()];
      os << "<polyline class=\"series\" data-method=\"" << escapeXml(series[s].method)
         << "\" data-metric=\"" << kMetricNames[m] << "\" fill=\"none\" stroke=\"" << color
         << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < series[s].per_step.size(); ++i)
        os << (i ? " " : "") << num(px(i)) << ',' << num(py(series[s].per_step[i][m]));
      os << "\"/>\n";
      const double ly = y0 + kTop + 16.0 * static_cast<double>(s);
      os << "<rect x=\"" << num(kLeft + plot_w + 15) << "\" y=\"" << num(ly - 8)
         << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
      os << "<text x=\"" << num(kLeft + plot_w + 30) << "\" y=\"" << num(ly + 1)
         << "\" font-family=\"sans-serif\" font-size=\"11\">" << escapeXml(series[s].method)
         << "</text>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace vmf
