#include "cogload/windowing.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <cmath>
#include <ostream>

#include "cogload/error.hpp"

namespace cogload {

std::string_view to_string(Task t) noexcept {
  return t == Task::CognitiveLoad ? "cognitive_load" : "stress";
}

Task parse_task(std::string_view s) {
  if (s == "cognitive_load") return Task::CognitiveLoad;
  if (s == "stress") return Task::Stress;
  throw ValidationError("unknown task '" + std::string(s) + "'");
}

std::string_view to_string(Normalization n) noexcept {
  return n == Normalization::None ? "none" : "per_window_zscore";
}

Normalization parse_normalization(std::string_view s) {
  if (s == "none") return Normalization::None;
  if (s == "per_window_zscore") return Normalization::PerWindowZScore;
  throw ValidationError("unknown normalization '" + std::string(s) + "'");
}

std::optional<std::uint8_t> task_label(Task task, Condition c) noexcept {
  switch (task) {
    case Task::CognitiveLoad:
      if (c == Condition::CognitiveLoad) return 1;
      if (c == Condition::Baseline) return 0;
      return std::nullopt;
    case Task::Stress:
      if (c == Condition::Stress) return 1;
      if (c == Condition::Amusement || c == Condition::WesadBaseline) return 0;
      return std::nullopt;
  }
  return std::nullopt;
}

std::size_t training_step(Task task, Condition c, const StepSizes& steps) {
  const auto label = task_label(task, c);
  if (!label) {
    throw ValidationError("condition '" + std::string(to_string(c)) + "' is not part of the " +
                          std::string(to_string(task)) + " task");
  }
  if (task == Task::CognitiveLoad) return *label ? steps.cl_positive : steps.cl_negative;
  return *label ? steps.stress_positive : steps.stress_negative;
}

std::size_t window_samples(double window_len_s, double fs_hz) {
  const double product = window_len_s * fs_hz;
  const double rounded = std::round(product);
  if (!(window_len_s > 0.0) || !(fs_hz > 0.0) || rounded < 1.0) {
    throw ValidationError("window length and sampling rate must be positive");
  }
  if (std::abs(product - rounded) > 1e-9 * std::max(1.0, product)) {
    throw ValidationError("window of " + std::to_string(window_len_s) + " s at " +
                          std::to_string(fs_hz) + " Hz is not a whole number of samples");
  }
  return static_cast<std::size_t>(rounded);
}

std::size_t window_count(std::size_t n, std::size_t len, std::size_t step) noexcept {
  if (len == 0 || step == 0 || n < len) return 0;
  return (n - len) / step + 1;
}

std::vector<std::uint8_t> WindowBatch::labels() const {
  std::vector<std::uint8_t> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.label);
  return out;
}

WindowSource WindowBatch::source(std::size_t i) const {
  const auto& e = entries_.at(i);
  const auto& r = records_[e.record];
  return {r.subject_id, r.session_id, r.condition, e.start};
}

const std::string& WindowBatch::subject(std::size_t i) const {
  return records_[entries_.at(i).record].subject_id;
}

void zscore_in_place(std::span<float> row) {
  if (row.empty()) return;
  double mean = 0.0;
  for (float v : row) mean += v;
  mean /= static_cast<double>(row.size());
  double var = 0.0;
  for (float v : row) {
    const double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(row.size());
  const double sd = std::sqrt(var);
  // Flat windows (sensor dropout) carry no waveform; emit zeros.
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    std::fill(row.begin(), row.end(), 0.0f);
    return;
  }
  for (float& v : row) v = static_cast<float>((v - mean) / sd);
}

void WindowBatch::copy_row(std::size_t i, std::span<float> out) const {
  const auto& e = entries_.at(i);
  if (out.size() != length_) throw ShapeError("copy_row: buffer has wrong length");
  const auto& samples = *records_[e.record].samples;
  std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(e.start), length_, out.begin());
  if (normalization_ == Normalization::PerWindowZScore) zscore_in_place(out);
}

std::vector<float> WindowBatch::row(std::size_t i) const {
  std::vector<float> out(length_);
  copy_row(i, out);
  return out;
}

std::vector<float> WindowBatch::dense() const {
  std::vector<float> out(size() * length_);
  for (std::size_t i = 0; i < size(); ++i) {
    copy_row(i, std::span<float>(out).subspan(i * length_, length_));
  }
  return out;
}

void WindowBatch::append(const WindowBatch& other) {
  if (other.empty() && other.records_.empty()) {
    warnings_.insert(warnings_.end(), other.warnings_.begin(), other.warnings_.end());
    return;
  }
  if (records_.empty() && entries_.empty()) {
    length_ = other.length_;
    normalization_ = other.normalization_;
  }
  if (other.length_ != length_ || other.normalization_ != normalization_) {
    throw ShapeError("cannot append window batches with different length or normalisation");
  }
  const auto offset = static_cast<std::uint32_t>(records_.size());
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
  for (auto e : other.entries_) {
    e.record += offset;
    entries_.push_back(e);
  }
  warnings_.insert(warnings_.end(), other.warnings_.begin(), other.warnings_.end());
}

void WindowBatch::add_record(const SessionRecord& record, std::size_t step, std::uint8_t label) {
  if (step == 0) throw ValidationError("step must be at least 1 sample");
  const std::size_t n = record.signal.samples.size();
  const std::size_t count = window_count(n, length_, step);
  if (count == 0) {
    auto msg = record.subject_id + "/" + record.session_id + "/" +
               std::string(to_string(record.condition)) + ": " + std::to_string(n) +
               " samples is shorter than one window of " + std::to_string(length_);
    spdlog::warn("{}", msg);
    warnings_.push_back(std::move(msg));
    return;
  }
  records_.push_back({std::make_shared<const std::vector<float>>(record.signal.samples),
                      record.subject_id, record.session_id, record.condition});
  const auto idx = static_cast<std::uint32_t>(records_.size() - 1);
  entries_.reserve(entries_.size() + count);
  for (std::size_t k = 0; k < count; ++k) entries_.push_back({idx, label, k * step});
}

WindowBatch extract_windows(const SessionRecord& record, double window_len_s, std::size_t step,
                            Normalization normalization, std::uint8_t label) {
  WindowBatch batch(window_samples(window_len_s, record.signal.fs_hz), normalization);
  batch.add_record(record, step, label);
  return batch;
}

WindowBatch extract_windows(const SessionRecord& record, double window_len_s, std::size_t step,
                            Normalization normalization, Task task) {
  const auto label = task_label(task, record.condition);
  if (!label) {
    throw ValidationError("condition '" + std::string(to_string(record.condition)) +
                          "' is not part of the " + std::string(to_string(task)) + " task");
  }
  return extract_windows(record, window_len_s, step, normalization, *label);
}

namespace {

std::size_t common_length(std::span<const SessionRecord* const> records, double window_len_s) {
  std::optional<std::size_t> len;
  for (const auto* r : records) {
    const auto l = window_samples(window_len_s, r->signal.fs_hz);
    if (len && *len != l) throw ValidationError("records mix sampling rates within one batch");
    len = l;
  }
  return len.value_or(0);
}

}  // namespace

WindowBatch build_training_batches(std::span<const SessionRecord* const> records, Task task,
                                   double window_len_s, Normalization normalization,
                                   const StepSizes& steps) {
  WindowBatch batch(common_length(records, window_len_s), normalization);
  for (const auto* r : records) {
    const auto step = training_step(task, r->condition, steps);
    batch.add_record(*r, step, *task_label(task, r->condition));
  }
  return batch;
}

WindowBatch build_eval_batches(std::span<const SessionRecord* const> records, Task task,
                               double window_len_s, Split split, Normalization normalization,
                               const StepSizes& steps) {
  if (split == Split::Train) throw ValidationError("build_eval_batches: use build_training_batches for training");
  const std::size_t step = split == Split::Validation ? steps.validation : steps.test;
  WindowBatch batch(common_length(records, window_len_s), normalization);
  for (const auto* r : records) {
    const auto label = task_label(task, r->condition);
    if (!label) {
      throw ValidationError("condition '" + std::string(to_string(r->condition)) +
                            "' is not part of the " + std::string(to_string(task)) + " task");
    }
    batch.add_record(*r, step, *label);
  }
  return batch;
}

std::vector<const SessionRecord*> pointers_to(const std::vector<SessionRecord>& records) {
  std::vector<const SessionRecord*> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(&r);
  return out;
}

void write_batch_csv(const WindowBatch& batch, std::ostream& out) {
  std::vector<float> row(batch.length());
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch.copy_row(i, row);
    for (float v : row) {
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
      out.write(buf.data(), end - buf.data());
      out.put(',');
    }
    out << static_cast<int>(batch.label(i)) << '\n';
  }
}

std::size_t count_training_windows(std::span<const SessionRecord* const> records, Task task,
                                   double window_len_s, const StepSizes& steps) {
  std::size_t total = 0;
  for (const auto* r : records) {
    const auto len = window_samples(window_len_s, r->signal.fs_hz);
    total += window_count(r->signal.samples.size(), len, training_step(task, r->condition, steps));
  }
  return total;
}

}  // namespace cogload
