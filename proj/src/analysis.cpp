#include "cogload/analysis.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "cogload/error.hpp"
#include "cogload/parallel.hpp"
#include "cogload/weights_io.hpp"

namespace cogload {

namespace {

bool score_before(const ScoredModel& a, const ScoredModel& b) {
  if (a.f1 != b.f1) return a.f1 > b.f1;
  if (a.run_id != b.run_id) return a.run_id < b.run_id;
  if (a.fold_key != b.fold_key) return natural_less(a.fold_key, b.fold_key);
  return a.pool_index < b.pool_index;
}

WindowBatch eval_windows(std::span<const SessionRecord* const> records, const AnalysisOptions& opt) {
  WindowBatch batch;
  for (const auto* r : records) {
    const auto label = task_label(Task::CognitiveLoad, r->condition).value_or(0);
    batch.append(extract_windows(*r, opt.window_len_s, opt.step, opt.normalization, label));
  }
  return batch;
}

}  // namespace

std::optional<std::size_t> select_best(std::span<const ScoredModel> scores) {
  if (scores.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (score_before(scores[i], scores[best])) best = i;
  }
  return best;
}

CalibrationResult finish_calibration(std::string subject_id, std::string session_id,
                                     std::span<const ScoredModel> scores, const ModelPool& pool,
                                     double threshold) {
  CalibrationResult res;
  res.subject_id = std::move(subject_id);
  res.session_id = std::move(session_id);
  const auto best = select_best(scores);
  if (!best) throw ValidationError("calibration: empty model pool");
  const auto& s = scores[*best];
  res.selected = s.pool_index;
  res.calibration_f1 = s.f1;
  if (s.pool_index < pool.entries.size()) res.selected_model = pool.entries[s.pool_index].weights_path;
  res.excluded = !(s.f1 > threshold);
  return res;
}

std::vector<CalibrationSet> calibration_sets(const std::vector<SessionRecord>& records) {
  std::map<std::pair<std::string, std::string>, CalibrationSet> sets;
  for (const auto& r : records) {
    if (!task_label(Task::CognitiveLoad, r.condition)) continue;
    auto& set = sets[{r.subject_id, r.session_id}];
    set.subject_id = r.subject_id;
    set.session_id = r.session_id;
    set.records.push_back(&r);
  }
  std::vector<CalibrationSet> out;
  for (auto& [key, set] : sets) out.push_back(std::move(set));
  std::sort(out.begin(), out.end(), [](const CalibrationSet& a, const CalibrationSet& b) {
    if (a.subject_id != b.subject_id) return natural_less(a.subject_id, b.subject_id);
    return natural_less(a.session_id, b.session_id);
  });
  return out;
}

std::vector<CalibrationResult> calibrate_subjects(const ModelPool& pool, std::span<const CalibrationSet> sets,
                                                  const AnalysisOptions& opt) {
  if (pool.entries.empty()) throw ValidationError("calibration: empty model pool");
  std::vector<WindowBatch> batches;
  std::vector<std::vector<std::uint8_t>> truths;
  for (const auto& set : sets) {
    batches.push_back(eval_windows(set.records, opt));
    if (batches.back().empty()) {
      throw ValidationError("calibration: no windows for " + set.subject_id + "/" + set.session_id);
    }
    truths.push_back(batches.back().labels());
  }

  // scores[set][model]
  std::vector<std::vector<ScoredModel>> scores(sets.size(), std::vector<ScoredModel>(pool.entries.size()));
  parallel_for(pool.entries.size(), opt.jobs, [&](std::size_t m) {
    const auto& entry = pool.entries[m];
    const auto weights = cnn::load_weights(entry.weights_path, opt.window_len_s);
    for (std::size_t s = 0; s < sets.size(); ++s) {
      const auto pred = cnn::predict(weights, batches[s]);
      scores[s][m] = {m, entry.metrics.fold.run_id, entry.metrics.fold.fold_key(), weighted_f1(truths[s], pred)};
    }
  });

  std::vector<CalibrationResult> out;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    out.push_back(finish_calibration(sets[s].subject_id, sets[s].session_id, scores[s], pool, opt.exclusion_threshold));
    spdlog::info("calibration {}/{}: best F1 {:.3f}{}", out.back().subject_id, out.back().session_id,
                 out.back().calibration_f1, out.back().excluded ? " (excluded)" : "");
  }
  return out;
}

CalibrationResult calibrate_subject(const ModelPool& pool, const CalibrationSet& set, const AnalysisOptions& opt) {
  return calibrate_subjects(pool, std::span<const CalibrationSet>(&set, 1), opt).front();
}

double positive_percentage(const cnn::ModelWeights& model, std::span<const SessionRecord* const> records,
                           const AnalysisOptions& opt) {
  const auto batch = eval_windows(records, opt);
  if (batch.empty()) throw ValidationError("record is shorter than one window");
  const auto pred = cnn::predict(model, batch);
  const auto positives = std::count(pred.begin(), pred.end(), std::uint8_t{1});
  return 100.0 * static_cast<double>(positives) / static_cast<double>(pred.size());
}

SurveyBurdenRow burden_percentages(const cnn::ModelWeights* selected_model, const cnn::ModelWeights& stress_model,
                                   const SessionRecord& survey_record, const AnalysisOptions& opt) {
  SurveyBurdenRow row;
  row.subject_id = survey_record.subject_id;
  row.session_id = survey_record.session_id;
  row.gamified = survey_record.gamified.value_or(survey_record.condition == Condition::SurveyGamified);
  const SessionRecord* rec = &survey_record;
  const std::span<const SessionRecord* const> one(&rec, 1);
  if (selected_model != nullptr) row.cogload_pct = positive_percentage(*selected_model, one, opt);
  row.stress_pct = positive_percentage(stress_model, one, opt);
  return row;
}

std::vector<LeakageRow> stress_leakage_check(const cnn::ModelWeights& stress_model,
                                             const std::vector<SessionRecord>& pilot_records,
                                             const AnalysisOptions& opt) {
  std::map<std::pair<std::string, Condition>, std::vector<const SessionRecord*>> groups;
  for (const auto& r : pilot_records) {
    if (task_label(Task::CognitiveLoad, r.condition)) groups[{r.subject_id, r.condition}].push_back(&r);
  }
  std::vector<LeakageRow> out;
  for (const auto& [key, recs] : groups) {
    const auto batch = eval_windows(recs, opt);
    LeakageRow row{key.first, key.second, 0.0, batch.size()};
    if (!batch.empty()) {
      const auto pred = cnn::predict(stress_model, batch);
      row.stress_pct = 100.0 * static_cast<double>(std::count(pred.begin(), pred.end(), std::uint8_t{1})) /
                       static_cast<double>(pred.size());
    }
    out.push_back(row);
  }
  std::sort(out.begin(), out.end(), [](const LeakageRow& a, const LeakageRow& b) {
    if (a.subject_id != b.subject_id) return natural_less(a.subject_id, b.subject_id);
    return a.condition < b.condition;
  });
  return out;
}

std::optional<std::size_t> best_stress_model(const ModelPool& stress_pool, double window_len_s) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < stress_pool.entries.size(); ++i) {
    const auto& m = stress_pool.entries[i].metrics;
    if (std::abs(m.window_len_s - window_len_s) > 1e-9 || !m.source) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = stress_pool.entries[*best].metrics;
    if (m.source->val_f1 > b.source->val_f1 ||
        (m.source->val_f1 == b.source->val_f1 && m.fold.run_id < b.fold.run_id)) {
      best = i;
    }
  }
  return best;
}

std::vector<SourceTargetPoint> source_target_points(const ModelPool& finetuned) {
  std::map<std::pair<double, int>, SourceTargetPoint> points;
  for (const auto& e : finetuned.entries) {
    const auto& m = e.metrics;
    if (!m.source) {
      throw ValidationError("pool entry run " + std::to_string(m.fold.run_id) + " fold " + m.fold.test_subject +
                            " has no source metrics");
    }
    auto& p = points[{m.window_len_s, m.fold.run_id}];
    p.window_len_s = m.window_len_s;
    p.run_id = m.fold.run_id;
    p.source = *m.source;
    p.target_f1 += m.test_f1;
    ++p.folds;
  }
  std::vector<SourceTargetPoint> out;
  for (auto& [key, p] : points) {
    p.target_f1 /= static_cast<double>(p.folds);
    out.push_back(p);
  }
  return out;
}

std::array<CorrelationRecord, 3> correlate_source_target(std::span<const SourceTargetPoint> points) {
  std::vector<double> train, val, test, target;
  for (const auto& p : points) {
    train.push_back(p.source.train_f1);
    val.push_back(p.source.val_f1);
    test.push_back(p.source.test_f1);
    target.push_back(p.target_f1);
  }
  return {pearson(train, target, "source_train_f1", "target_f1"),
          pearson(val, target, "source_val_f1", "target_f1"),
          pearson(test, target, "source_test_f1", "target_f1")};
}

}  // namespace cogload
