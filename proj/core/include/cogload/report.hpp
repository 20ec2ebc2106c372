#pragma once

#include "cogload/evaluation.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cogload::eval {

inline constexpr int kReportSchemaVersion = 1;

/// One row per metric with Mean/Std/Min/Max over a set of reports.
struct MetricTable {
  std::vector<std::string> groups;  // fold or participant per report
  std::map<std::string, MetricSummary> rows;
  bool operator==(const MetricTable&) const = default;
};

/// Summaries of Accuracy, F1, Precision, Recall, AUC-ROC and AUPRC (macro
/// averages) across reports.
MetricTable metric_table(const std::vector<std::string>& groups, const std::vector<ClassificationReport>& reports);

struct TrajectorySeries {
  std::string label;  // "P03 model/dual"
  std::string condition;
  std::vector<double> delays;
  bool operator==(const TrajectorySeries&) const = default;
};

std::vector<TrajectorySeries> trajectories(const std::vector<control::SessionLog>& logs);

struct EvaluationReport {
  std::string title;
  std::optional<MetricTable> offline;   // leave-one-participant-out folds
  std::optional<MetricTable> realtime;  // closed-loop predictions per participant
  std::optional<ClassificationReport> pooled;
  std::optional<ImportanceReport> importance;
  std::optional<ConvergenceReport> convergence;
  std::vector<TrajectorySeries> trajectories;
  bool operator==(const EvaluationReport&) const = default;
};

/// Non-finite numbers are written as null and read back as NaN.
std::string report_to_json(const EvaluationReport& report);
/// Throws SchemaViolation on malformed input or an unknown schema version.
EvaluationReport report_from_json(const std::string& text);

/// Header "Metric,Mean,Std,Min,Max", rows in the fixed metric order.
void write_metric_table_csv(std::ostream& out, const MetricTable& table);

std::string confusion_svg(const ClassificationReport& report);
std::string roc_svg(const ClassificationReport& report);
std::string trajectories_svg(const std::vector<TrajectorySeries>& series);
std::string importance_svg(const ImportanceReport& report);

/// Writes report.json plus whichever of offline_metrics.csv, realtime_metrics.csv, confusion.svg,
/// roc.svg, trajectories.svg and importance.svg have data. Returns the paths.
/// Throws IoFailure.
std::vector<std::string> emit_report(const EvaluationReport& report, const std::string& directory);

}  // namespace cogload::eval
