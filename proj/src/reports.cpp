#include "cogload/reports.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "cogload/error.hpp"

namespace cogload {

namespace {

std::string window_tag(double w) { return format_number(w) + "s"; }

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

std::string optional_percent(const std::optional<double>& v) {
  return v ? std::to_string(round_half_up(*v)) : "";
}

}  // namespace

std::string ReportStamp::line() const { return "# cogload " + version + " config=" + config_hash; }

std::string format_number(double v) {
  if (!std::isfinite(v)) throw ValidationError("non-finite value in report");
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

void write_table1_csv(std::ostream& out, const ReportStamp& stamp, const AggregateTable& table) {
  out << stamp.line() << "\n";
  out << "# std is the sample standard deviation; failed_runs=" << table.failed_runs << "\n";
  out << "subject";
  for (const auto& c : table.columns) {
    const auto name = std::string(to_string(c.protocol)) + "_" + window_tag(c.window_len_s);
    out << "," << name << "_mean," << name << "_std," << name << "_n";
  }
  out << "\n";
  for (std::size_t s = 0; s < table.subjects.size(); ++s) {
    out << table.subjects[s];
    for (const auto& cell : table.cells[s]) {
      if (cell) {
        out << "," << format_number(cell->mean) << "," << format_number(cell->std) << "," << cell->n;
      } else {
        out << ",,,0";
      }
    }
    out << "\n";
  }
  out << "mean";
  for (const auto& m : table.column_means) out << "," << optional_number(m) << ",,";
  out << "\n";
}

void write_table2_csv(std::ostream& out, const ReportStamp& stamp, std::span<const Table2Row> rows) {
  out << stamp.line() << "\n";
  out << "subject,session,calibration_f1,calibration_stress_pct,gamified,cogload_pct,stress_pct,"
         "calibration_stress_pct_raw,cogload_pct_raw,stress_pct_raw,excluded,selected_model\n";
  for (const auto& row : rows) {
    const auto& c = row.calibration;
    out << c.subject_id << "," << c.session_id << "," << format_number(c.calibration_f1) << ","
        << optional_percent(row.calibration_stress_pct) << ",";
    if (row.survey) {
      const auto& s = *row.survey;
      out << yes_no(s.gamified) << "," << (s.cogload_pct ? std::to_string(round_half_up(*s.cogload_pct)) : "X")
          << "," << round_half_up(s.stress_pct) << ",";
    } else {
      out << ",,,";
    }
    out << optional_number(row.calibration_stress_pct) << ",";
    if (row.survey) {
      out << optional_number(row.survey->cogload_pct) << "," << format_number(row.survey->stress_pct) << ",";
    } else {
      out << ",,";
    }
    out << yes_no(c.excluded) << "," << c.selected_model.generic_string() << "\n";
  }
}

void write_source_metrics_csv(std::ostream& out, const ReportStamp& stamp, const ModelPool& stress_pool) {
  out << stamp.line() << "\n";
  out << "window_len_s,run_id,test_subject,validation_subjects,source_train_f1,source_val_f1,source_test_f1,"
         "best_epoch,stopped_epoch\n";
  for (const auto& e : stress_pool.entries) {
    const auto& m = e.metrics;
    std::string val;
    for (const auto& v : m.fold.validation_subjects) val += (val.empty() ? "" : ";") + v;
    const auto src = m.source.value_or(SourceMetrics{});
    out << format_number(m.window_len_s) << "," << m.fold.run_id << "," << m.fold.test_subject << "," << val << ","
        << format_number(src.train_f1) << "," << format_number(src.val_f1) << "," << format_number(src.test_f1)
        << "," << m.best_epoch << "," << m.stopped_epoch << "\n";
  }
}

void write_figure3_points_csv(std::ostream& out, const ReportStamp& stamp, std::span<const SourceTargetPoint> points) {
  out << stamp.line() << "\n";
  out << "window_len_s,run_id,source_train_f1,source_val_f1,source_test_f1,target_f1,folds\n";
  for (const auto& p : points) {
    out << format_number(p.window_len_s) << "," << p.run_id << "," << format_number(p.source.train_f1) << ","
        << format_number(p.source.val_f1) << "," << format_number(p.source.test_f1) << ","
        << format_number(p.target_f1) << "," << p.folds << "\n";
  }
}

void write_correlations_csv(std::ostream& out, const ReportStamp& stamp, std::span<const ScopedCorrelation> rows) {
  out << stamp.line() << "\n";
  out << "scope,x,y,n,r,p,error\n";
  for (const auto& row : rows) {
    const auto& c = row.record;
    out << row.scope << "," << c.x_name << "," << c.y_name << "," << c.n << ",";
    if (row.error.empty()) {
      out << format_number(c.r) << "," << format_number(c.p) << ",\n";
    } else {
      out << ",," << row.error << "\n";
    }
  }
}

void write_leakage_csv(std::ostream& out, const ReportStamp& stamp, std::span<const LeakageRow> rows) {
  out << stamp.line() << "\n";
  out << "subject,condition,windows,stress_pct,stress_pct_raw\n";
  for (const auto& r : rows) {
    out << r.subject_id << "," << to_string(r.condition) << "," << r.windows << "," << round_half_up(r.stress_pct)
        << "," << format_number(r.stress_pct) << "\n";
  }
}

void write_figure4_csv(std::ostream& out, const ReportStamp& stamp, const ResponseTimeTable& table) {
  out << stamp.line() << "\n";
  out << "survey,question_index,mean_difference_s,subjects\n";
  for (const auto& d : table.differences) {
    out << d.survey << "," << d.question_index << "," << format_number(d.mean_difference_s) << "," << d.subjects
        << "\n";
  }
}

void write_response_summary_csv(std::ostream& out, const ReportStamp& stamp, const ResponseTimeTable& table) {
  out << stamp.line() << "\n";
  out << "# gamified_mean_s=" << (table.gamified ? format_number(table.gamified->mean_s) : "")
      << " gamified_questions=" << (table.gamified ? table.gamified->questions : 0)
      << " plain_mean_s=" << (table.plain ? format_number(table.plain->mean_s) : "")
      << " plain_questions=" << (table.plain ? table.plain->questions : 0) << "\n";
  out << "subject,session,survey,question_index,gamified,duration_s,last_question\n";
  for (const auto& q : table.questions) {
    out << q.event.subject_id << "," << q.event.session_id << "," << q.event.survey << "," << q.event.question_index
        << "," << yes_no(q.gamified) << "," << format_number(q.event.duration_s()) << "," << yes_no(q.last_question)
        << "\n";
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cogload
