#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogload/dataset.hpp"

namespace cogload {

enum class Task { CognitiveLoad, Stress };
enum class Normalization { None, PerWindowZScore };
enum class Split { Train, Validation, Test };

std::string_view to_string(Task t) noexcept;
Task parse_task(std::string_view s);
std::string_view to_string(Normalization n) noexcept;
Normalization parse_normalization(std::string_view s);

/// Per-condition step sizes in samples. Training steps differ per class to
/// offset class imbalance; evaluation steps are uniform.
struct StepSizes {
  std::size_t cl_positive = 8;
  std::size_t cl_negative = 4;
  std::size_t stress_positive = 12;
  std::size_t stress_negative = 18;
  std::size_t validation = 32;
  std::size_t test = 64;
};

/// Binary label of `c` under `task`, or nullopt when the condition does not
/// belong to the task.
std::optional<std::uint8_t> task_label(Task task, Condition c) noexcept;

/// Training step for a condition under a task.
std::size_t training_step(Task task, Condition c, const StepSizes& steps);

/// round(window_len_s * fs_hz); throws ValidationError when the product is
/// not an integer or not positive.
std::size_t window_samples(double window_len_s, double fs_hz);

/// floor((n - len) / step) + 1 for n >= len, else 0.
std::size_t window_count(std::size_t n, std::size_t len, std::size_t step) noexcept;

struct WindowSource {
  std::string subject_id;
  std::string session_id;
  Condition condition = Condition::Baseline;
  std::size_t start_sample = 0;
};

/// Fixed-length windows over one or more records. Rows are views into the
/// shared source signals and are materialised (and normalised) on demand, so
/// a batch of 10^5 long windows costs only its index.
class WindowBatch {
 public:
  WindowBatch() = default;
  WindowBatch(std::size_t length, Normalization normalization)
      : length_(length), normalization_(normalization) {}

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t length() const noexcept { return length_; }
  Normalization normalization() const noexcept { return normalization_; }

  std::uint8_t label(std::size_t i) const { return entries_.at(i).label; }
  std::vector<std::uint8_t> labels() const;
  WindowSource source(std::size_t i) const;

  /// Subject of row i without materialising the whole source.
  const std::string& subject(std::size_t i) const;

  /// Writes row i into out (size length()).
  void copy_row(std::size_t i, std::span<float> out) const;
  std::vector<float> row(std::size_t i) const;

  /// Row-major n x length() copy of every window.
  std::vector<float> dense() const;

  /// Concatenates; both batches must share length and normalisation.
  void append(const WindowBatch& other);

  /// Records too short to yield a window.
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Adds every window of `samples` starting at 0, step, 2*step, ...
  void add_record(const SessionRecord& record, std::size_t step, std::uint8_t label);

 private:
  struct RecordRef {
    std::shared_ptr<const std::vector<float>> samples;
    std::string subject_id;
    std::string session_id;
    Condition condition;
  };
  struct Entry {
    std::uint32_t record;
    std::uint8_t label;
    std::size_t start;
  };

  std::size_t length_ = 0;
  Normalization normalization_ = Normalization::PerWindowZScore;
  std::vector<RecordRef> records_;
  std::vector<Entry> entries_;
  std::vector<std::string> warnings_;
};

/// Z-scores `row` in place; constant rows become zeros.
void zscore_in_place(std::span<float> row);

WindowBatch extract_windows(const SessionRecord& record, double window_len_s, std::size_t step,
                            Normalization normalization, std::uint8_t label);

/// Label taken from the task mapping; throws ValidationError if the record's
/// condition is not part of the task.
WindowBatch extract_windows(const SessionRecord& record, double window_len_s, std::size_t step,
                            Normalization normalization, Task task);

/// Per-condition training steps, concatenated in the given record order.
WindowBatch build_training_batches(std::span<const SessionRecord* const> records, Task task,
                                   double window_len_s,
                                   Normalization normalization = Normalization::PerWindowZScore,
                                   const StepSizes& steps = {});

/// Uniform validation or test step for both classes.
WindowBatch build_eval_batches(std::span<const SessionRecord* const> records, Task task,
                               double window_len_s, Split split,
                               Normalization normalization = Normalization::PerWindowZScore,
                               const StepSizes& steps = {});

std::vector<const SessionRecord*> pointers_to(const std::vector<SessionRecord>& records);

/// Debug dump: one row per window, label in the last column.
void write_batch_csv(const WindowBatch& batch, std::ostream& out);

/// Number of training windows a set of records would yield, without building it.
std::size_t count_training_windows(std::span<const SessionRecord* const> records, Task task,
                                   double window_len_s, const StepSizes& steps = {});

}  // namespace cogload
