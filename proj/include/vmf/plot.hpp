#ifndef VMF_PLOT_HPP
#define VMF_PLOT_HPP

#include "vmf/report.hpp"

#include <string>
#include <vector>

namespace vmf {

/// SVG line chart of error versus forecast step: one panel per selected
/// metric, one polyline per method in each panel.
std::string renderErrorChart(const std::vector<ReportSeries>& series,
                             const std::vector<Metric>& metrics);

/// Maps metric names to Metric values. Throws std::invalid_argument on an
/// unknown name.
std::vector<Metric> parseMetricList(const std::string& comma_separated);

}  // namespace vmf

#endif  // VMF_PLOT_HPP
