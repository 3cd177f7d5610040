#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cogload {

/// Recording condition. CognitiveLoad/Baseline come from the Stroop protocol,
/// Stress/Amusement/WesadBaseline from the stress-pretraining corpus.
enum class Condition {
  CognitiveLoad,
  Baseline,
  Stress,
  Amusement,
  WesadBaseline,
  SurveyGamified,
  SurveyPlain,
};

std::string_view to_string(Condition c) noexcept;

/// Accepts the snake_case names produced by to_string().
Condition parse_condition(std::string_view s);

bool is_survey(Condition c) noexcept;

/// A uniformly sampled blood volume pulse series.
struct PpgSignal {
  double start_epoch = 0.0;
  double fs_hz = 64.0;
  std::vector<float> samples;

  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / fs_hz;
  }
};

/// Sampling information supplied out of band for headerless BVP files.
struct SignalHeader {
  double start_epoch = 0.0;
  double fs_hz = 64.0;
};

struct RecordKey {
  std::string subject_id;
  std::string session_id;
  Condition condition = Condition::Baseline;

  auto operator<=>(const RecordKey&) const = default;
};

struct SessionRecord {
  std::string subject_id;
  std::string session_id;
  Condition condition = Condition::Baseline;
  PpgSignal signal;
  /// Set for survey recordings only.
  std::optional<bool> gamified;

  RecordKey key() const { return {subject_id, session_id, condition}; }
};

struct ManifestEntry {
  std::filesystem::path path;
  RecordKey key;
  std::optional<bool> gamified;
  std::optional<SignalHeader> header;
};

/// A dataset listing plus its resolved records; entries[i] produced records[i].
/// Both are sorted by subject (numeric-aware), session, condition.
struct DatasetManifest {
  std::string dataset_name;
  std::string notes;
  std::vector<ManifestEntry> entries;
  std::vector<SessionRecord> records;
};

/// Numeric-aware ordering: "2" < "10", "s2" < "s10".
bool natural_less(std::string_view a, std::string_view b);

/// Canonical record ordering used everywhere a deterministic order is needed.
bool record_less(const RecordKey& a, const RecordKey& b);

/// Reads a BVP CSV. Without `header` the Empatica layout is expected
/// (start epoch, sampling rate, then one sample per line). With `header` the
/// file is a single headerless column.
PpgSignal load_bvp_csv(const std::filesystem::path& path,
                       std::optional<SignalHeader> header = std::nullopt);
PpgSignal parse_bvp_csv(std::istream& in, const std::string& source_name,
                        std::optional<SignalHeader> header = std::nullopt);

/// Writes the Empatica layout. Samples use shortest round-trip formatting.
void write_bvp_csv(const PpgSignal& signal, const std::filesystem::path& path);

/// Manifest document: {dataset_name, notes?, records:[{path, subject, session,
/// condition, gamified?, fs_hz?, start_epoch?}]}. Paths resolve relative to the
/// manifest's directory. Supplying fs_hz selects the headerless BVP layout.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Splits one subject's converter CSV ("sample_index,bvp,label") into one
/// record per contiguous same-label run. Kept labels are baseline, stress and
/// amusement; ignorable protocol labels are dropped; anything else throws.
std::vector<SessionRecord> split_wesad_labels(std::istream& in, const std::string& subject_id,
                                              double fs_hz = 64.0,
                                              const std::string& source_name = "<stream>");

/// Loads every *.csv in `dir` as one converter file; subject id = file stem.
std::vector<SessionRecord> load_wesad_dir(const std::filesystem::path& dir);

/// Sorted distinct subject ids.
std::vector<std::string> subjects_of(const std::vector<SessionRecord>& records);

}  // namespace cogload
