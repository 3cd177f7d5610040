#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogload/cnn.hpp"
#include "cogload/dataset.hpp"
#include "cogload/trainer.hpp"
#include "cogload/windowing.hpp"

namespace cogload {

class RunLedger;

enum class Protocol { Vanilla, Pretrained, StressPretraining };

std::string_view to_string(Protocol p) noexcept;
Protocol parse_protocol(std::string_view s);

/// Number of validation subjects per fold: 2 on the pilot data (both
/// protocols), 1 on the stress-pretraining corpus.
std::size_t validation_count(Protocol p) noexcept;

struct FoldPlan {
  std::string test_subject;
  std::vector<std::string> validation_subjects;
  std::vector<std::string> training_subjects;
  int run_id = 0;
  std::uint64_t seed = 0;

  /// Identifies the fold within a run.
  const std::string& fold_key() const noexcept { return test_subject; }
  bool operator==(const FoldPlan&) const = default;
};

/// One plan per (run, test subject), ordered by run then subject. Validation
/// subjects are drawn without replacement from the remainder with a seed
/// derived from (master_seed, run_id, test_subject).
std::vector<FoldPlan> plan_loo_folds(std::vector<std::string> subjects, int runs,
                                     std::size_t validation_subjects, std::uint64_t master_seed);
std::vector<FoldPlan> plan_loo_folds(std::vector<std::string> subjects, int runs, Protocol protocol,
                                     std::uint64_t master_seed);

struct SourceMetrics {
  double train_f1 = 0.0;
  double val_f1 = 0.0;
  double test_f1 = 0.0;

  bool operator==(const SourceMetrics&) const = default;
};

struct RunMetrics {
  FoldPlan fold;
  double window_len_s = 0.0;
  Protocol protocol = Protocol::Vanilla;
  /// Weighted F1 on the held-out subject's test windows for this model's task.
  double test_f1 = 0.0;
  /// Stress-task scores of the pretrained model this run started from (or of
  /// the model itself, for stress pretraining runs).
  std::optional<SourceMetrics> source;
  /// Path of the pretrained weights a fine-tuned model started from.
  std::filesystem::path source_model;
  std::uint64_t train_seed = 0;
  int best_epoch = 0;
  int stopped_epoch = 0;
  bool failed = false;
  std::string failure;
};

struct PoolEntry {
  std::filesystem::path weights_path;
  RunMetrics metrics;
};

/// Trained models in (run_id, fold) order. Failed runs are kept out of
/// `entries` and listed in `failures`.
struct ModelPool {
  std::vector<PoolEntry> entries;
  std::vector<RunMetrics> failures;
};

struct ProtocolOptions {
  cnn::TrainSpec train;  // learning_rate applies to from-scratch training
  double finetune_learning_rate = 1e-4;
  StepSizes steps;
  Normalization normalization = Normalization::PerWindowZScore;
  std::uint64_t master_seed = 0;
  int runs = 40;
  std::size_t jobs = 1;
  /// Weights are written under model_dir/<protocol>/w<window>/.
  std::filesystem::path model_dir;
  RunLedger* ledger = nullptr;
};

/// Records usable for `task` (other conditions filtered out).
std::vector<const SessionRecord*> task_records(const std::vector<SessionRecord>& records, Task task);

/// Vanilla protocol: leave-one-subject-out on the pilot data, fresh Glorot
/// initialisation for every (run, fold).
ModelPool run_vanilla(const std::vector<SessionRecord>& pilot_records, double window_len_s,
                      const ProtocolOptions& options);

/// Stress-detection pretraining: one model per run. Run r holds out
/// subject r mod n for testing and one random validation subject.
ModelPool pretrain_wesad(const std::vector<SessionRecord>& wesad_records, double window_len_s,
                         const ProtocolOptions& options);

struct FinetuneResult {
  RunMetrics metrics;
  cnn::ModelWeights weights;
};

/// Continues training every layer of `pretrained` on the fold's pilot
/// subjects at the fine-tuning learning rate.
FinetuneResult finetune(const cnn::ModelWeights& pretrained, const std::vector<SessionRecord>& pilot_records,
                        const FoldPlan& fold, double window_len_s, const ProtocolOptions& options,
                        std::optional<SourceMetrics> source = std::nullopt);

/// Pretrained protocol: every pilot fold of run r fine-tunes the stress model
/// of run r.
ModelPool run_pretrained(const ModelPool& stress_pool, const std::vector<SessionRecord>& pilot_records,
                         double window_len_s, const ProtocolOptions& options);

struct AggregateCell {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1); 0 for n = 1
  std::size_t n = 0;
};

struct AggregateColumn {
  Protocol protocol = Protocol::Vanilla;
  double window_len_s = 0.0;

  bool operator==(const AggregateColumn&) const = default;
};

/// Per-subject mean/std of test F1 for each (protocol, window) column plus
/// the column means of the subject means.
struct AggregateTable {
  std::vector<std::string> subjects;
  std::vector<AggregateColumn> columns;
  /// cells[s][c]; nullopt where a subject has no successful run.
  std::vector<std::vector<std::optional<AggregateCell>>> cells;
  std::vector<std::optional<double>> column_means;
  std::size_t failed_runs = 0;
};

AggregateTable aggregate(std::span<const RunMetrics> metrics);

}  // namespace cogload
