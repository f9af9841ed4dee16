#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace asdchat::report {

inline constexpr std::string_view kAsdChat = "asdchat";
inline constexpr std::string_view kInterventionist = "interventionist";
inline constexpr std::string_view kAggregateSubject = "avg";

/// One line of a metric file: subject, condition, metric, value[, provenance].
struct MetricRow {
  std::string subject;
  std::string condition;
  std::string metric;
  double value = 0.0;
  std::string provenance = "computed";  // or "fixture"

  bool operator==(const MetricRow&) const = default;
};

/// Tab-separated; a header line starting with "subject" and lines starting
/// with '#' are skipped. Rows without a provenance column take
/// `default_provenance`. PARSE_ERROR with the line number.
std::vector<MetricRow> parse_metric_rows(std::string_view text, std::string_view default_provenance = "computed");
std::string dump_metric_rows(const std::vector<MetricRow>& rows);

struct ComparisonRow {
  std::string subject;  // "avg" for the aggregate row
  std::string metric;
  double asdchat = 0.0;
  double interventionist = 0.0;
  double difference = 0.0;                  // asdchat - interventionist, rounded
  std::optional<double> percent_difference; // rounded; absent when interventionist is 0
  std::string provenance;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;  // metrics in first-seen order; subjects, then avg
};

/// Pairs conditions per subject and metric. Aggregates come from explicit
/// "avg" rows when both conditions have one, else from the mean of the
/// per-subject values of each condition. MISSING_CONDITION when a metric
/// lacks either condition entirely.
ComparisonReport build_report(const std::vector<MetricRow>& rows, int decimals = 2);

/// subject, metric, asdchat, interventionist, difference, percent_difference, provenance
std::string dump_report_tsv(const ComparisonReport& report, int decimals = 2);

/// One line per aggregate row, then a per-subject section.
std::string format_report_text(const ComparisonReport& report, int decimals = 2);

/// Fixed-point text with a sign for nonzero values, e.g. "+13.11", "-0.31".
std::string signed_fixed(double value, int decimals);

}  // namespace asdchat::report
