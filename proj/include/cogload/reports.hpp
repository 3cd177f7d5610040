#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cogload/analysis.hpp"
#include "cogload/protocols.hpp"
#include "cogload/response_times.hpp"

namespace cogload {

/// First line of every report: "# cogload <version> config=<hash>".
struct ReportStamp {
  std::string version;
  std::string config_hash;

  std::string line() const;
};

/// Shortest round-trip formatting; "nan"/"inf" never appear in valid reports.
std::string format_number(double v);

/// Half-up rounding used for displayed percentages.
long round_half_up(double v);

/// subject, <protocol>_<window>s_mean, <protocol>_<window>s_std, ... plus a
/// closing "mean" row holding the mean of the subject means.
void write_table1_csv(std::ostream& out, const ReportStamp& stamp, const AggregateTable& table);

struct Table2Row {
  CalibrationResult calibration;
  std::optional<double> calibration_stress_pct;
  std::optional<SurveyBurdenRow> survey;  // nullopt when the session has no survey recording
};

/// One row per (subject, session). Excluded subjects show "X" for cogload_pct.
void write_table2_csv(std::ostream& out, const ReportStamp& stamp, std::span<const Table2Row> rows);

void write_source_metrics_csv(std::ostream& out, const ReportStamp& stamp, const ModelPool& stress_pool);

void write_figure3_points_csv(std::ostream& out, const ReportStamp& stamp, std::span<const SourceTargetPoint> points);

struct ScopedCorrelation {
  std::string scope;  // "w30" or "pooled"
  CorrelationRecord record;
  std::string error;  // set instead of record values when undefined
};

void write_correlations_csv(std::ostream& out, const ReportStamp& stamp, std::span<const ScopedCorrelation> rows);

void write_leakage_csv(std::ostream& out, const ReportStamp& stamp, std::span<const LeakageRow> rows);

/// Per-question position mean difference (plain minus gamified).
void write_figure4_csv(std::ostream& out, const ReportStamp& stamp, const ResponseTimeTable& table);

/// Per-condition means and every question's duration.
void write_response_summary_csv(std::ostream& out, const ReportStamp& stamp, const ResponseTimeTable& table);

/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace cogload
