#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogload/cnn.hpp"
#include "cogload/dataset.hpp"
#include "cogload/metrics.hpp"
#include "cogload/protocols.hpp"
#include "cogload/windowing.hpp"

namespace cogload {

struct AnalysisOptions {
  double window_len_s = 30.0;
  /// A subject is excluded unless some model scores strictly above this.
  double exclusion_threshold = 0.7;
  std::size_t step = 64;  // test step
  Normalization normalization = Normalization::PerWindowZScore;
  std::size_t jobs = 1;
};

/// A pool model's score on one calibration set.
struct ScoredModel {
  std::size_t pool_index = 0;
  int run_id = 0;
  std::string fold_key;
  double f1 = 0.0;
};

/// Highest F1; ties go to the lowest (run_id, fold key). nullopt when empty.
std::optional<std::size_t> select_best(std::span<const ScoredModel> scores);

struct CalibrationResult {
  std::string subject_id;
  std::string session_id;
  std::optional<std::size_t> selected;  // index into the pool
  std::filesystem::path selected_model;
  double calibration_f1 = 0.0;
  bool excluded = true;
};

/// Applies the exclusion rule to a finished selection.
CalibrationResult finish_calibration(std::string subject_id, std::string session_id,
                                     std::span<const ScoredModel> scores, const ModelPool& pool,
                                     double threshold);

/// One subject/session's Stroop + baseline recordings.
struct CalibrationSet {
  std::string subject_id;
  std::string session_id;
  std::vector<const SessionRecord*> records;
};

/// Scores every pool model on every calibration set (each model is loaded
/// once) and selects the best per set.
std::vector<CalibrationResult> calibrate_subjects(const ModelPool& pool, std::span<const CalibrationSet> sets,
                                                  const AnalysisOptions& options);

CalibrationResult calibrate_subject(const ModelPool& pool, const CalibrationSet& set,
                                    const AnalysisOptions& options);

/// Groups CognitiveLoad/Baseline records by (subject, session).
std::vector<CalibrationSet> calibration_sets(const std::vector<SessionRecord>& records);

/// Percentage of a record's test-step windows that `model` assigns class 1.
/// Throws ValidationError when the record is shorter than one window.
double positive_percentage(const cnn::ModelWeights& model, std::span<const SessionRecord* const> records,
                           const AnalysisOptions& options);

struct SurveyBurdenRow {
  std::string subject_id;
  std::string session_id;
  bool gamified = false;
  std::optional<double> cogload_pct;  // nullopt for excluded subjects
  double stress_pct = 0.0;
  double calibration_f1 = 0.0;
  std::optional<double> calibration_stress_pct;
  std::filesystem::path selected_model;
};

/// `selected_model` is null when the subject was excluded at calibration.
SurveyBurdenRow burden_percentages(const cnn::ModelWeights* selected_model, const cnn::ModelWeights& stress_model,
                                   const SessionRecord& survey_record, const AnalysisOptions& options);

struct LeakageRow {
  std::string subject_id;
  Condition condition = Condition::Baseline;
  double stress_pct = 0.0;
  std::size_t windows = 0;
};

/// Share of each pilot subject's windows, per condition, that the stress
/// detector labels as stressed.
std::vector<LeakageRow> stress_leakage_check(const cnn::ModelWeights& stress_model,
                                             const std::vector<SessionRecord>& pilot_records,
                                             const AnalysisOptions& options);

/// Index of the stress model with the highest source validation F1 at
/// `window_len_s` (ties: lowest run id).
std::optional<std::size_t> best_stress_model(const ModelPool& stress_pool, double window_len_s);

/// One point per pretrained model: its stress scores against the mean
/// target F1 of the models fine-tuned from it.
struct SourceTargetPoint {
  double window_len_s = 0.0;
  int run_id = 0;
  SourceMetrics source;
  double target_f1 = 0.0;
  std::size_t folds = 0;
};

std::vector<SourceTargetPoint> source_target_points(const ModelPool& finetuned);

/// Correlations of (source train, source validation, source test) F1 with
/// target F1. Throws ValidationError on zero variance.
std::array<CorrelationRecord, 3> correlate_source_target(std::span<const SourceTargetPoint> points);

}  // namespace cogload
