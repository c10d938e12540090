#include "vmf/report.hpp"

#include "vmf/errors.hpp"
#include "vmf/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace vmf {

using nlohmann::json;

namespace {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Mean per step over samples, then mean over steps.
void aggregate(const std::vector<std::vector<MetricRow>>& samples, std::size_t horizon,
               std::vector<MetricRow>& per_step, MetricRow& mean) {
  per_step.assign(horizon, MetricRow{});
  for (std::size_t t = 0; t < horizon; ++t) {
    for (int m = 0; m < kNumMetrics; ++m) {
      CompensatedSum s;
      for (const auto& sample : samples) s.add(sample[t][m]);
      per_step[t][m] = samples.empty() ? 0.0 : s.value() / static_cast<double>(samples.size());
    }
  }
  for (int m = 0; m < kNumMetrics; ++m) {
    CompensatedSum s;
    for (const auto& row : per_step) s.add(row[m]);
    mean[m] = horizon == 0 ? 0.0 : s.value() / static_cast<double>(horizon);
  }
}

json rowJson(const MetricRow& r) {
  json j = json::object();
  for (int m = 0; m < kNumMetrics; ++m) j[std::string(kMetricNames[m])] = r[m];
  return j;
}

std::vector<std::string> splitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parseNumber(const std::string& s, std::size_t lineno) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw ParseError("line " + std::to_string(lineno) + ": '" + s + "' is not a finite number");
  return v;
}

}  // namespace

MetricRow stateMetrics(const Stated& pred, const Stated& gt) {
  const auto pos = positionErrors(pred, gt);
  MetricRow r{};
  r[kPaMpjpe] = paMpjpe(pred, gt);
  r[kHeadPos] = pos.head;
  r[kGazePos] = pos.gaze;
  r[kHandPos] = pos.hand;
  r[kHeadRot] = headRotationError(pred, gt);
  return r;
}

EvalReport evaluate(const std::vector<std::vector<Stated>>& predictions,
                    const std::vector<std::vector<Stated>>& ground_truth,
                    const std::vector<std::string>& labels) {
  if (predictions.size() != ground_truth.size())
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(ground_truth.size()) +
                                " ground-truth sequences");
  if (!labels.empty() && labels.size() != predictions.size())
    throw std::invalid_argument("evaluate: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(predictions.size()) + " samples");
  const std::size_t horizon = ground_truth.empty() ? 0 : ground_truth.front().size();

  std::vector<std::vector<MetricRow>> samples;
  samples.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].size() != horizon || ground_truth[i].size() != horizon)
      throw std::invalid_argument("evaluate: sample " + std::to_string(i) + " has " +
                                  std::to_string(predictions[i].size()) + " predicted and " +
                                  std::to_string(ground_truth[i].size()) + " true steps, expected " +
                                  std::to_string(horizon));
    std::vector<MetricRow> rows;
    rows.reserve(horizon);
    for (std::size_t t = 0; t < horizon; ++t)
      rows.push_back(stateMetrics(predictions[i][t], ground_truth[i][t]));
    samples.push_back(std::move(rows));
  }

  EvalReport report;
  report.sample_count = samples.size();
  aggregate(samples, horizon, report.per_step, report.mean);

  if (!labels.empty()) {
    std::map<std::string, std::vector<std::vector<MetricRow>>> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i) by_class[labels[i]].push_back(samples[i]);
    for (const auto& [label, group] : by_class) {
      ClassReport c;
      c.sample_count = group.size();
      aggregate(group, horizon, c.per_step, c.mean);
      report.per_class[label] = std::move(c);
    }
  }
  return report;
}

std::string reportCsv(const EvalReport& report) {
  std::ostringstream os;
  os << "step";
  for (auto n : kMetricNames) os << ',' << n;
  os << '\n';
  for (std::size_t t = 0; t < report.per_step.size(); ++t) {
    os << (t + 1);
    for (double v : report.per_step[t]) os << ',' << fmt(v);
    os << '\n';
  }
  os << "mean";
  for (double v : report.mean) os << ',' << fmt(v);
  os << '\n';
  return os.str();
}

json reportJson(const EvalReport& report) {
  json steps = json::array();
  for (const auto& r : report.per_step) steps.push_back(rowJson(r));
  json classes = json::object();
  for (const auto& [label, c] : report.per_class) {
    json cs = json::array();
    for (const auto& r : c.per_step) cs.push_back(rowJson(r));
    classes[label] = {{"per_step", cs}, {"mean", rowJson(c.mean)}, {"sample_count", c.sample_count}};
  }
  return {{"per_step", steps},
          {"mean", rowJson(report.mean)},
          {"sample_count", report.sample_count},
          {"per_class", classes}};
}

std::vector<ReportSeries> parseReportCsv(const std::string& text,
                                         const std::string& default_method) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) header = splitCsvLine(line);
  }
  if (header.empty()) throw ParseError("report CSV is empty");
  const bool multi = header.front() == "method";
  const std::size_t offset = multi ? 2 : 1;
  if (header.size() != offset + kNumMetrics || header[offset - 1] != "step")
    throw ParseError("line " + std::to_string(lineno) + ": unexpected report header");
  for (int m = 0; m < kNumMetrics; ++m)
    if (header[offset + m] != kMetricNames[m])
      throw ParseError("line " + std::to_string(lineno) + ": expected column '" +
                       std::string(kMetricNames[m]) + "', got '" + header[offset + m] + "'");

  std::vector<ReportSeries> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = splitCsvLine(line);
    if (cells.size() != header.size())
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    const std::string method = multi ? cells[0] : default_method;
    if (method.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty method name");
    const std::string& step = cells[offset - 1];
    if (step == "mean") continue;
    const double s = parseNumber(step, lineno);
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& r) { return r.method == method; });
    if (it == out.end()) {
      out.push_back({method, {}});
      it = std::prev(out.end());
    }
    if (s != static_cast<double>(it->per_step.size() + 1))
      throw ParseError("line " + std::to_string(lineno) + ": step " + step + " out of sequence");
    MetricRow row{};
    for (int m = 0; m < kNumMetrics; ++m) row[m] = parseNumber(cells[offset + m], lineno);
    it->per_step.push_back(row);
  }
  if (out.empty()) throw ParseError("report CSV has no step rows");
  return out;
}

std::string comparisonCsv(const std::vector<std::pair<std::string, EvalReport>>& reports) {
  std::ostringstream os;
  os << "method";
  for (auto n : kMetricNames) os << ',' << n;
  os << '\n';
  for (const auto& [name, r] : reports) {
    os << name;
    for (double v : r.mean) os << ',' << fmt(v);
    os << '\n';
  }
  return os.str();
}

std::string perStepCsv(const std::vector<std::pair<std::string, EvalReport>>& reports) {
  std::ostringstream os;
  os << "method,step";
  for (auto n : kMetricNames) os << ',' << n;
  os << '\n';
  for (const auto& [name, r] : reports) {
    for (std::size_t t = 0; t < r.per_step.size(); ++t) {
      os << name << ',' << (t + 1);
      for (double v : r.per_step[t]) os << ',' << fmt(v);
      os << '\n';
    }
  }
  return os.str();
}

std::string comparisonTable(const std::vector<std::pair<std::string, EvalReport>>& reports) {
  static constexpr std::array<const char*, kNumMetrics> kTitles = {
      "PA-MPJPE (mm)", "Head Pos. (mm)", "Gaze Pos. (mm)", "Hand Pos. (mm)", "Head Rot. (deg)"};
  MetricRow best;
  best.fill(std::numeric_limits<double>::infinity());
  for (const auto& [_, r] : reports)
    for (int m = 0; m < kNumMetrics; ++m) best[m] = std::min(best[m], r.mean[m]);

  std::size_t name_w = 7;
  for (const auto& [name, _] : reports) name_w = std::max(name_w, name.size());
  const std::size_t col_w = 22;

  std::ostringstream os;
  auto cell = [&](const std::string& s, std::size_t w) {
    os << ' ' << s << std::string(w > s.size() ? w - s.size() : 0, ' ') << " |";
  };
  os << '|';
  cell("Methods", name_w);
  for (auto t : kTitles) cell(t, col_w);
  os << '\n' << '|' << std::string(name_w + 2, '-') << '|';
  for (int m = 0; m < kNumMetrics; ++m) os << std::string(col_w + 2, '-') << '|';
  os << '\n';
  for (const auto& [name, r] : reports) {
    os << '|';
    cell(name, name_w);
    for (int m = 0; m < kNumMetrics; ++m) {
      char buf[64];
      if (r.mean[m] == best[m] || best[m] <= 0.0) {
        std::snprintf(buf, sizeof buf, "%.2f", r.mean[m]);
      } else {
        std::snprintf(buf, sizeof buf, "%.2f, +%.1f%%", r.mean[m],
                      100.0 * (r.mean[m] - best[m]) / best[m]);
      }
      cell(buf, col_w);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace vmf
