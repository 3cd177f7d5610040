#include "cogload/protocols.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "cogload/error.hpp"
#include "cogload/hashing.hpp"
#include "cogload/ledger.hpp"
#include "cogload/metrics.hpp"
#include "cogload/parallel.hpp"
#include "cogload/weights_io.hpp"

namespace cogload {

namespace fs = std::filesystem;

std::string_view to_string(Protocol p) noexcept {
  switch (p) {
    case Protocol::Vanilla:
      return "vanilla";
    case Protocol::Pretrained:
      return "pretrained";
    case Protocol::StressPretraining:
      return "stress_pretraining";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view s) {
  if (s == "vanilla") return Protocol::Vanilla;
  if (s == "pretrained") return Protocol::Pretrained;
  if (s == "stress_pretraining") return Protocol::StressPretraining;
  throw ValidationError("unknown protocol '" + std::string(s) + "'");
}

std::size_t validation_count(Protocol p) noexcept {
  return p == Protocol::StressPretraining ? 1 : 2;
}

std::vector<FoldPlan> plan_loo_folds(std::vector<std::string> subjects, int runs,
                                     std::size_t validation_subjects, std::uint64_t master_seed) {
  std::sort(subjects.begin(), subjects.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
  if (std::adjacent_find(subjects.begin(), subjects.end()) != subjects.end()) {
    throw ValidationError("plan_loo_folds: duplicate subject ids");
  }
  if (subjects.size() < 4) {
    throw ValidationError("leave-one-subject-out needs at least 4 subjects, got " + std::to_string(subjects.size()));
  }
  if (validation_subjects < 1 || validation_subjects + 2 > subjects.size()) {
    throw ValidationError("cannot hold out " + std::to_string(validation_subjects) +
                          " validation subjects from " + std::to_string(subjects.size()));
  }
  if (runs < 1) throw ValidationError("runs must be at least 1");

  std::vector<FoldPlan> plans;
  plans.reserve(static_cast<std::size_t>(runs) * subjects.size());
  for (int run = 0; run < runs; ++run) {
    for (const auto& test : subjects) {
      FoldPlan plan;
      plan.run_id = run;
      plan.test_subject = test;
      plan.seed = derive_seed(derive_seed(master_seed, static_cast<std::uint64_t>(run)), test);

      std::vector<std::string> rest;
      for (const auto& s : subjects) {
        if (s != test) rest.push_back(s);
      }
      Rng rng(derive_seed(plan.seed, "validation"));
      for (std::size_t k = 0; k < validation_subjects; ++k) {
        const auto j = k + rng.below(rest.size() - k);
        std::swap(rest[k], rest[j]);
      }
      plan.validation_subjects.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(validation_subjects));
      plan.training_subjects.assign(rest.begin() + static_cast<std::ptrdiff_t>(validation_subjects), rest.end());
      auto by_name = [](const auto& a, const auto& b) { return natural_less(a, b); };
      std::sort(plan.validation_subjects.begin(), plan.validation_subjects.end(), by_name);
      std::sort(plan.training_subjects.begin(), plan.training_subjects.end(), by_name);
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

std::vector<FoldPlan> plan_loo_folds(std::vector<std::string> subjects, int runs, Protocol protocol,
                                     std::uint64_t master_seed) {
  return plan_loo_folds(std::move(subjects), runs, validation_count(protocol), master_seed);
}

std::vector<const SessionRecord*> task_records(const std::vector<SessionRecord>& records, Task task) {
  std::vector<const SessionRecord*> out;
  for (const auto& r : records) {
    if (task_label(task, r.condition)) out.push_back(&r);
  }
  return out;
}

namespace {

struct FoldBatches {
  WindowBatch train;
  WindowBatch validation;
  WindowBatch test;
};

std::vector<const SessionRecord*> select(const std::vector<const SessionRecord*>& records,
                                         const std::vector<std::string>& subjects) {
  const std::set<std::string> wanted(subjects.begin(), subjects.end());
  std::vector<const SessionRecord*> out;
  for (const auto* r : records) {
    if (wanted.count(r->subject_id) != 0) out.push_back(r);
  }
  return out;
}

void assert_no_leakage(const WindowBatch& batch, const std::string& test_subject, const char* split) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.subject(i) == test_subject) {
      throw Error(std::string("test subject ") + test_subject + " leaked into the " + split + " batch");
    }
  }
}

FoldBatches build_fold(const std::vector<const SessionRecord*>& records, const FoldPlan& plan, Task task,
                       double window_len_s, const ProtocolOptions& opt) {
  FoldBatches b;
  const auto train_recs = select(records, plan.training_subjects);
  const auto val_recs = select(records, plan.validation_subjects);
  const auto test_recs = select(records, {plan.test_subject});
  b.train = build_training_batches(train_recs, task, window_len_s, opt.normalization, opt.steps);
  b.validation = build_eval_batches(val_recs, task, window_len_s, Split::Validation, opt.normalization, opt.steps);
  b.test = build_eval_batches(test_recs, task, window_len_s, Split::Test, opt.normalization, opt.steps);
  assert_no_leakage(b.train, plan.test_subject, "training");
  assert_no_leakage(b.validation, plan.test_subject, "validation");
  return b;
}

double f1_on(const cnn::ModelWeights& w, const WindowBatch& batch) {
  if (batch.empty()) throw ValidationError("cannot score an empty batch");
  const auto pred = cnn::predict(w, batch);
  const auto truth = batch.labels();
  return weighted_f1(truth, pred);
}

std::string window_tag(double window_len_s) {
  std::ostringstream os;
  os << window_len_s;
  return os.str();
}

fs::path weights_path(const ProtocolOptions& opt, Protocol protocol, double window_len_s, const FoldPlan& plan) {
  return opt.model_dir / std::string(to_string(protocol)) / ("w" + window_tag(window_len_s)) /
         ("run" + std::to_string(plan.run_id) + "_" + plan.test_subject + ".cogw");
}

double common_fs(const std::vector<const SessionRecord*>& records) {
  if (records.empty()) throw ValidationError("no usable records");
  const double fs = records.front()->signal.fs_hz;
  for (const auto* r : records) {
    if (r->signal.fs_hz != fs) throw ValidationError("records mix sampling rates");
  }
  return fs;
}

void require_conditions(const std::vector<const SessionRecord*>& records, Task task) {
  std::map<std::string, std::set<std::uint8_t>> seen;
  for (const auto* r : records) seen[r->subject_id].insert(*task_label(task, r->condition));
  for (const auto& [subject, labels] : seen) {
    if (labels.size() != 2) {
      throw ValidationError("subject " + subject + " lacks one of the two " + std::string(to_string(task)) +
                            " classes");
    }
  }
}

// Runs one job per plan, collects results in plan order, and records them.
template <class Job>
ModelPool run_jobs(const std::vector<FoldPlan>& plans, const ProtocolOptions& opt, Job&& job) {
  std::vector<PoolEntry> results(plans.size());
  const std::size_t seq0 = opt.ledger != nullptr ? opt.ledger->reserve(plans.size()) : 0;
  parallel_for(plans.size(), opt.jobs, [&](std::size_t i) {
    results[i] = job(plans[i]);
    if (opt.ledger != nullptr) opt.ledger->record(seq0 + i, results[i].metrics, results[i].weights_path);
  });
  ModelPool pool;
  for (auto& r : results) {
    if (r.metrics.failed) {
      pool.failures.push_back(std::move(r.metrics));
    } else {
      pool.entries.push_back(std::move(r));
    }
  }
  if (!pool.failures.empty()) {
    spdlog::warn("{} of {} runs failed and are excluded", pool.failures.size(), plans.size());
  }
  return pool;
}

}  // namespace

ModelPool run_vanilla(const std::vector<SessionRecord>& pilot_records, double window_len_s,
                      const ProtocolOptions& opt) {
  opt.train.validate();
  const auto records = task_records(pilot_records, Task::CognitiveLoad);
  require_conditions(records, Task::CognitiveLoad);
  const double fs = common_fs(records);
  const auto arch = cnn::architecture_for(window_samples(window_len_s, fs));
  std::vector<std::string> subjects;
  for (const auto* r : records) subjects.push_back(r->subject_id);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  const auto plans = plan_loo_folds(subjects, opt.runs, Protocol::Vanilla, opt.master_seed);

  spdlog::info("vanilla: {} s windows, {} folds", window_len_s, plans.size());
  return run_jobs(plans, opt, [&](const FoldPlan& plan) {
    PoolEntry entry;
    auto& m = entry.metrics;
    m.fold = plan;
    m.window_len_s = window_len_s;
    m.protocol = Protocol::Vanilla;
    m.train_seed = derive_seed(plan.seed, "vanilla/" + window_tag(window_len_s));

    const auto batches = build_fold(records, plan, Task::CognitiveLoad, window_len_s, opt);
    cnn::TrainSpec spec = opt.train;
    spec.seed = derive_seed(m.train_seed, "train");
    try {
      auto result = cnn::train(cnn::glorot_init(arch, derive_seed(m.train_seed, "init")), batches.train,
                               batches.validation, spec);
      auto& w = result.weights;
      w.meta = {window_len_s, fs, "cognitive_load", "vanilla", plan.run_id, plan.fold_key(), m.train_seed};
      m.best_epoch = result.trace.best_epoch;
      m.stopped_epoch = result.trace.stopped_epoch;
      m.test_f1 = f1_on(w, batches.test);
      entry.weights_path = weights_path(opt, Protocol::Vanilla, window_len_s, plan);
      cnn::save_weights(w, entry.weights_path);
      spdlog::info("vanilla w{} run {} test {}: F1 {:.4f} (best epoch {})", window_len_s, plan.run_id,
                   plan.test_subject, m.test_f1, m.best_epoch);
    } catch (const NonFiniteError& e) {
      m.failed = true;
      m.failure = e.what();
      spdlog::warn("vanilla run {} fold {} failed: {}", plan.run_id, plan.test_subject, e.what());
    }
    return entry;
  });
}

ModelPool pretrain_wesad(const std::vector<SessionRecord>& wesad_records, double window_len_s,
                         const ProtocolOptions& opt) {
  opt.train.validate();
  const auto records = task_records(wesad_records, Task::Stress);
  require_conditions(records, Task::Stress);
  const double fs = common_fs(records);
  const auto arch = cnn::architecture_for(window_samples(window_len_s, fs));
  std::vector<std::string> subjects;
  for (const auto* r : records) subjects.push_back(r->subject_id);
  std::sort(subjects.begin(), subjects.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());

  const auto all = plan_loo_folds(subjects, opt.runs, Protocol::StressPretraining,
                                  derive_seed(opt.master_seed, "stress_pretraining"));
  std::vector<FoldPlan> plans;
  for (int run = 0; run < opt.runs; ++run) {
    const auto& test = subjects[static_cast<std::size_t>(run) % subjects.size()];
    for (const auto& p : all) {
      if (p.run_id == run && p.test_subject == test) plans.push_back(p);
    }
  }

  spdlog::info("stress pretraining: {} s windows, {} runs", window_len_s, plans.size());
  return run_jobs(plans, opt, [&](const FoldPlan& plan) {
    PoolEntry entry;
    auto& m = entry.metrics;
    m.fold = plan;
    m.window_len_s = window_len_s;
    m.protocol = Protocol::StressPretraining;
    m.train_seed = derive_seed(plan.seed, "stress/" + window_tag(window_len_s));

    const auto batches = build_fold(records, plan, Task::Stress, window_len_s, opt);
    spdlog::info("stress run {}: {} training windows", plan.run_id, batches.train.size());
    cnn::TrainSpec spec = opt.train;
    spec.seed = derive_seed(m.train_seed, "train");
    try {
      auto result = cnn::train(cnn::glorot_init(arch, derive_seed(m.train_seed, "init")), batches.train,
                               batches.validation, spec);
      auto& w = result.weights;
      w.meta = {window_len_s, fs, "stress", "stress_pretraining", plan.run_id, plan.fold_key(), m.train_seed};
      m.best_epoch = result.trace.best_epoch;
      m.stopped_epoch = result.trace.stopped_epoch;
      SourceMetrics s{f1_on(w, batches.train), f1_on(w, batches.validation), f1_on(w, batches.test)};
      m.source = s;
      m.test_f1 = s.test_f1;
      entry.weights_path = weights_path(opt, Protocol::StressPretraining, window_len_s, plan);
      cnn::save_weights(w, entry.weights_path);
      spdlog::info("stress w{} run {}: F1 train {:.3f} val {:.3f} test {:.3f}", window_len_s, plan.run_id,
                   s.train_f1, s.val_f1, s.test_f1);
    } catch (const NonFiniteError& e) {
      m.failed = true;
      m.failure = e.what();
      spdlog::warn("stress run {} failed: {}", plan.run_id, e.what());
    }
    return entry;
  });
}

FinetuneResult finetune(const cnn::ModelWeights& pretrained, const std::vector<SessionRecord>& pilot_records,
                        const FoldPlan& fold, double window_len_s, const ProtocolOptions& opt,
                        std::optional<SourceMetrics> source) {
  if (std::abs(pretrained.meta.window_len_s - window_len_s) > 1e-9) {
    throw ValidationError("pretrained model uses " + std::to_string(pretrained.meta.window_len_s) +
                          " s windows, fine-tuning requested " + std::to_string(window_len_s) + " s");
  }
  const auto records = task_records(pilot_records, Task::CognitiveLoad);
  const double fs = common_fs(records);
  if (window_samples(window_len_s, fs) != pretrained.arch.input_len) {
    throw ShapeError("pretrained model input length does not match the pilot windows");
  }

  FinetuneResult out{{}, pretrained};
  auto& m = out.metrics;
  m.fold = fold;
  m.window_len_s = window_len_s;
  m.protocol = Protocol::Pretrained;
  m.source = source;
  m.train_seed = derive_seed(fold.seed, "finetune/" + window_tag(window_len_s));

  const auto batches = build_fold(records, fold, Task::CognitiveLoad, window_len_s, opt);
  cnn::TrainSpec spec = opt.train;
  spec.learning_rate = opt.finetune_learning_rate;
  spec.seed = derive_seed(m.train_seed, "train");
  auto result = cnn::train(pretrained, batches.train, batches.validation, spec);
  out.weights = std::move(result.weights);
  out.weights.meta = {window_len_s, fs, "cognitive_load", "pretrained", fold.run_id, fold.fold_key(), m.train_seed};
  m.best_epoch = result.trace.best_epoch;
  m.stopped_epoch = result.trace.stopped_epoch;
  m.test_f1 = f1_on(out.weights, batches.test);
  return out;
}

ModelPool run_pretrained(const ModelPool& stress_pool, const std::vector<SessionRecord>& pilot_records,
                         double window_len_s, const ProtocolOptions& opt) {
  opt.train.validate();
  const auto records = task_records(pilot_records, Task::CognitiveLoad);
  require_conditions(records, Task::CognitiveLoad);
  std::vector<std::string> subjects;
  for (const auto* r : records) subjects.push_back(r->subject_id);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  const auto plans = plan_loo_folds(subjects, opt.runs, Protocol::Pretrained, opt.master_seed);

  std::map<int, const PoolEntry*> by_run;
  for (const auto& e : stress_pool.entries) {
    if (std::abs(e.metrics.window_len_s - window_len_s) < 1e-9) by_run[e.metrics.fold.run_id] = &e;
  }

  spdlog::info("fine-tuning: {} s windows, {} folds", window_len_s, plans.size());
  return run_jobs(plans, opt, [&](const FoldPlan& plan) {
    PoolEntry entry;
    const auto it = by_run.find(plan.run_id);
    if (it == by_run.end()) {
      auto& m = entry.metrics;
      m.fold = plan;
      m.window_len_s = window_len_s;
      m.protocol = Protocol::Pretrained;
      m.failed = true;
      m.failure = "no pretrained model for run " + std::to_string(plan.run_id);
      return entry;
    }
    const auto pretrained = cnn::load_weights(it->second->weights_path, window_len_s);
    try {
      auto result = finetune(pretrained, pilot_records, plan, window_len_s, opt, it->second->metrics.source);
      result.metrics.source_model = it->second->weights_path;
      entry.metrics = std::move(result.metrics);
      entry.weights_path = weights_path(opt, Protocol::Pretrained, window_len_s, plan);
      cnn::save_weights(result.weights, entry.weights_path);
      spdlog::info("pretrained w{} run {} test {}: F1 {:.4f}", window_len_s, plan.run_id, plan.test_subject,
                   entry.metrics.test_f1);
    } catch (const NonFiniteError& e) {
      auto& m = entry.metrics;
      m = RunMetrics{};
      m.fold = plan;
      m.window_len_s = window_len_s;
      m.protocol = Protocol::Pretrained;
      m.source = it->second->metrics.source;
      m.failed = true;
      m.failure = e.what();
      spdlog::warn("fine-tune run {} fold {} failed: {}", plan.run_id, plan.test_subject, e.what());
    }
    return entry;
  });
}

AggregateTable aggregate(std::span<const RunMetrics> metrics) {
  if (metrics.empty()) throw ValidationError("aggregate: no runs");
  AggregateTable table;
  std::vector<std::string> subjects;
  for (const auto& m : metrics) {
    if (m.failed) {
      ++table.failed_runs;
      continue;
    }
    subjects.push_back(m.fold.test_subject);
    const AggregateColumn col{m.protocol, m.window_len_s};
    if (std::find(table.columns.begin(), table.columns.end(), col) == table.columns.end()) {
      table.columns.push_back(col);
    }
  }
  std::sort(subjects.begin(), subjects.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  table.subjects = subjects;
  std::sort(table.columns.begin(), table.columns.end(), [](const AggregateColumn& a, const AggregateColumn& b) {
    if (a.protocol != b.protocol) return a.protocol < b.protocol;
    return a.window_len_s < b.window_len_s;
  });

  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> values;
  for (const auto& m : metrics) {
    if (m.failed) continue;
    const auto s = static_cast<std::size_t>(
        std::find(subjects.begin(), subjects.end(), m.fold.test_subject) - subjects.begin());
    const AggregateColumn col{m.protocol, m.window_len_s};
    const auto c = static_cast<std::size_t>(
        std::find(table.columns.begin(), table.columns.end(), col) - table.columns.begin());
    values[{s, c}].push_back(m.test_f1);
  }

  table.cells.assign(subjects.size(), std::vector<std::optional<AggregateCell>>(table.columns.size()));
  table.column_means.assign(table.columns.size(), std::nullopt);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    double sum_of_means = 0.0;
    std::size_t filled = 0;
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      const auto it = values.find({s, c});
      if (it == values.end()) continue;
      const auto& v = it->second;
      AggregateCell cell;
      cell.n = v.size();
      for (double x : v) cell.mean += x;
      cell.mean /= static_cast<double>(v.size());
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - cell.mean) * (x - cell.mean);
        cell.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
      table.cells[s][c] = cell;
      sum_of_means += cell.mean;
      ++filled;
    }
    if (filled > 0) table.column_means[c] = sum_of_means / static_cast<double>(filled);
  }
  return table;
}

}  // namespace cogload
