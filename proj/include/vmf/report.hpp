#ifndef VMF_REPORT_HPP
#define VMF_REPORT_HPP

#include "vmf/kinematics.hpp"

#include <json.hpp>

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vmf {

enum Metric : int { kPaMpjpe = 0, kHeadPos, kGazePos, kHandPos, kHeadRot, kNumMetrics };

inline constexpr std::array<std::string_view, kNumMetrics> kMetricNames = {
    "pa_mpjpe", "head_pos", "gaze_pos", "hand_pos", "head_rot"};

using MetricRow = std::array<double, kNumMetrics>;

/// All metrics for one predicted/ground-truth state pair.
MetricRow stateMetrics(const Stated& pred, const Stated& gt);

struct ClassReport {
  std::vector<MetricRow> per_step;
  MetricRow mean{};
  std::size_t sample_count = 0;
};

struct EvalReport {
  std::vector<MetricRow> per_step;  // one row per forecast step
  MetricRow mean{};                 // mean of per_step rows
  std::size_t sample_count = 0;
  std::map<std::string, ClassReport> per_class;
};

/// Metrics per sample and step, averaged over samples per step, then over
/// steps. `labels` may be empty (no per-class breakdown) or one per sample.
EvalReport evaluate(const std::vector<std::vector<Stated>>& predictions,
                    const std::vector<std::vector<Stated>>& ground_truth,
                    const std::vector<std::string>& labels = {});

/// Rows "1".."H" then "mean"; columns step + the five metrics.
std::string reportCsv(const EvalReport& report);
nlohmann::json reportJson(const EvalReport& report);

/// One parsed per-step series: method name -> rows (without the mean row).
struct ReportSeries {
  std::string method;
  std::vector<MetricRow> per_step;
};

/// Reads either a single-method report CSV (first column "step"; the method
/// name is `default_method`) or a multi-method CSV with a leading "method"
/// column. Throws ParseError on malformed input.
std::vector<ReportSeries> parseReportCsv(const std::string& text, const std::string& default_method);

/// Methods x metric means as a Markdown table. Cells other than the column
/// minimum also show their relative gap to that minimum.
std::string comparisonTable(const std::vector<std::pair<std::string, EvalReport>>& reports);
std::string comparisonCsv(const std::vector<std::pair<std::string, EvalReport>>& reports);
/// Per-step rows of several methods with a leading "method" column.
std::string perStepCsv(const std::vector<std::pair<std::string, EvalReport>>& reports);

}  // namespace vmf

#endif  // VMF_REPORT_HPP
