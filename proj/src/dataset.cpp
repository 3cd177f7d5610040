#include "cogload/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "cogload/error.hpp"

namespace cogload {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Condition, std::string_view>, 7> kConditionNames{{
    {Condition::CognitiveLoad, "cognitive_load"},
    {Condition::Baseline, "baseline"},
    {Condition::Stress, "stress"},
    {Condition::Amusement, "amusement"},
    {Condition::WesadBaseline, "wesad_baseline"},
    {Condition::SurveyGamified, "survey_gamified"},
    {Condition::SurveyPlain, "survey_plain"},
}};

// WESAD protocol states that are not part of the binary stress task.
constexpr std::array<std::string_view, 5> kIgnorableWesadLabels{
    "transient", "undefined", "meditation", "ignore", "none"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

template <typename T>
T parse_or_throw(std::string_view field, const std::string& source, std::size_t line,
                 const char* what) {
  T v{};
  if (!parse_number(field, v)) {
    throw ParseError(source, line, std::string("malformed ") + what + " '" + std::string(trim(field)) + "'");
  }
  return v;
}

// Reads one physical line; strips CR. Returns false at EOF.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void validate_signal(const PpgSignal& s, const std::string& source) {
  if (!(s.fs_hz > 0.0) || !std::isfinite(s.fs_hz)) {
    throw ValidationError(source + ": sampling rate must be positive, got " + std::to_string(s.fs_hz));
  }
  if (s.samples.empty()) throw ValidationError(source + ": no samples");
}

Condition wesad_condition(std::string_view label) {
  if (label == "baseline") return Condition::WesadBaseline;
  if (label == "stress") return Condition::Stress;
  if (label == "amusement") return Condition::Amusement;
  throw ValidationError("not a kept label");
}

bool is_kept_wesad_label(std::string_view label) {
  return label == "baseline" || label == "stress" || label == "amusement";
}

bool is_ignorable_wesad_label(std::string_view label) {
  return std::find(kIgnorableWesadLabels.begin(), kIgnorableWesadLabels.end(), label) !=
         kIgnorableWesadLabels.end();
}

}  // namespace

std::string_view to_string(Condition c) noexcept {
  for (const auto& [cond, name] : kConditionNames) {
    if (cond == c) return name;
  }
  return "unknown";
}

Condition parse_condition(std::string_view s) {
  for (const auto& [cond, name] : kConditionNames) {
    if (name == s) return cond;
  }
  throw ValidationError("unknown condition '" + std::string(s) + "'");
}

bool is_survey(Condition c) noexcept {
  return c == Condition::SurveyGamified || c == Condition::SurveyPlain;
}

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      auto na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if (a.size() - i != b.size() - j) return a.size() - i < b.size() - j;
  return a < b;
}

bool record_less(const RecordKey& a, const RecordKey& b) {
  if (a.subject_id != b.subject_id) return natural_less(a.subject_id, b.subject_id);
  if (a.session_id != b.session_id) return natural_less(a.session_id, b.session_id);
  return a.condition < b.condition;
}

PpgSignal parse_bvp_csv(std::istream& in, const std::string& source_name,
                        std::optional<SignalHeader> header) {
  PpgSignal signal;
  std::string line;
  std::size_t lineno = 0;

  auto header_field = [&](const char* what) -> double {
    if (!next_line(in, line)) throw ValidationError(source_name + ": missing " + what + " header line");
    ++lineno;
    // E4 exports repeat the header value once per column.
    std::string_view first = line;
    if (auto comma = first.find(','); comma != std::string_view::npos) first = first.substr(0, comma);
    return parse_or_throw<double>(first, source_name, lineno, what);
  };

  if (header) {
    signal.start_epoch = header->start_epoch;
    signal.fs_hz = header->fs_hz;
  } else {
    signal.start_epoch = header_field("start epoch");
    signal.fs_hz = header_field("sampling rate");
  }
  if (!(signal.fs_hz > 0.0)) {
    throw ValidationError(source_name + ": sampling rate must be positive, got " +
                          std::to_string(signal.fs_hz));
  }

  while (next_line(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    signal.samples.push_back(parse_or_throw<float>(t, source_name, lineno, "sample"));
  }
  validate_signal(signal, source_name);
  return signal;
}

PpgSignal load_bvp_csv(const fs::path& path, std::optional<SignalHeader> header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open BVP file " + path.string());
  return parse_bvp_csv(in, path.string(), header);
}

void write_bvp_csv(const PpgSignal& signal, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::array<char, 64> buf{};
  auto emit = [&](auto v) {
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.write(buf.data(), end - buf.data());
    out.put('\n');
  };
  emit(signal.start_epoch);
  emit(signal.fs_hz);
  for (float v : signal.samples) emit(v);
  if (!out) throw Error("write failed for " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }

  DatasetManifest manifest;
  const fs::path base = path.parent_path();
  try {
    manifest.dataset_name = doc.at("dataset_name").get<std::string>();
    manifest.notes = doc.value("notes", std::string{});
    const auto& records = doc.at("records");
    if (!records.is_array() || records.empty()) {
      throw ValidationError("manifest " + path.string() + ": records list is empty");
    }
    for (const auto& r : records) {
      ManifestEntry e;
      e.path = base / r.at("path").get<std::string>();
      e.key.subject_id = r.at("subject").get<std::string>();
      e.key.session_id = r.at("session").get<std::string>();
      e.key.condition = parse_condition(r.at("condition").get<std::string>());
      if (r.contains("gamified")) e.gamified = r.at("gamified").get<bool>();
      if (r.contains("fs_hz")) {
        e.header = SignalHeader{r.value("start_epoch", 0.0), r.at("fs_hz").get<double>()};
      }
      manifest.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }

  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return record_less(a.key, b.key); });
  for (std::size_t i = 1; i < manifest.entries.size(); ++i) {
    const auto& k = manifest.entries[i].key;
    if (k == manifest.entries[i - 1].key) {
      throw ValidationError("manifest " + path.string() + ": duplicate record (" + k.subject_id +
                            ", " + k.session_id + ", " + std::string(to_string(k.condition)) + ")");
    }
  }

  for (const auto& e : manifest.entries) {
    SessionRecord rec;
    rec.subject_id = e.key.subject_id;
    rec.session_id = e.key.session_id;
    rec.condition = e.key.condition;
    if (is_survey(e.key.condition)) {
      const bool from_condition = e.key.condition == Condition::SurveyGamified;
      if (e.gamified && *e.gamified != from_condition) {
        throw ValidationError("manifest " + path.string() + ": gamified flag contradicts condition for " +
                              e.key.subject_id + "/" + e.key.session_id);
      }
      rec.gamified = from_condition;
    } else if (e.gamified) {
      throw ValidationError("manifest " + path.string() + ": gamified flag on non-survey record " +
                            e.key.subject_id + "/" + e.key.session_id);
    }
    if (!fs::exists(e.path)) throw ValidationError("manifest references missing file " + e.path.string());
    rec.signal = load_bvp_csv(e.path, e.header);
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

std::vector<SessionRecord> split_wesad_labels(std::istream& in, const std::string& subject_id,
                                              double fs_hz, const std::string& source_name) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line)) throw ValidationError(source_name + ": empty converter file");
  ++lineno;
  if (trim(line) != "sample_index,bvp,label") {
    throw ParseError(source_name, lineno, "expected header 'sample_index,bvp,label'");
  }

  std::vector<SessionRecord> out;
  std::map<Condition, int> seen;
  SessionRecord* current = nullptr;
  std::string current_label;
  std::uint64_t last_index = 0;
  bool have_last = false;

  while (next_line(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto c1 = t.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : t.find(',', c1 + 1);
    if (c2 == std::string_view::npos) throw ParseError(source_name, lineno, "expected 3 columns");
    const auto index = parse_or_throw<std::uint64_t>(t.substr(0, c1), source_name, lineno, "sample_index");
    const auto bvp = parse_or_throw<float>(t.substr(c1 + 1, c2 - c1 - 1), source_name, lineno, "bvp");
    const auto label = trim(t.substr(c2 + 1));

    const bool contiguous = have_last && index == last_index + 1;
    last_index = index;
    have_last = true;

    if (!is_kept_wesad_label(label)) {
      if (!is_ignorable_wesad_label(label)) {
        throw ParseError(source_name, lineno, "unknown label '" + std::string(label) + "'");
      }
      current = nullptr;
      continue;
    }
    if (current == nullptr || !contiguous || label != current_label) {
      const Condition cond = wesad_condition(label);
      SessionRecord rec;
      rec.subject_id = subject_id;
      rec.condition = cond;
      rec.session_id = "seg" + std::to_string(seen[cond]++);
      rec.signal.fs_hz = fs_hz;
      rec.signal.start_epoch = static_cast<double>(index) / fs_hz;
      out.push_back(std::move(rec));
      current = &out.back();
      current_label = std::string(label);
    }
    current->signal.samples.push_back(bvp);
  }
  return out;
}

std::vector<SessionRecord> load_wesad_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("converter directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  if (files.empty()) throw ValidationError("no converter CSV files in " + dir.string());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });

  std::vector<SessionRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + f.string());
    auto recs = split_wesad_labels(in, f.stem().string(), 64.0, f.string());
    spdlog::debug("{}: {} segments", f.filename().string(), recs.size());
    for (auto& r : recs) out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const SessionRecord& a, const SessionRecord& b) {
    return record_less(a.key(), b.key());
  });
  return out;
}

std::vector<std::string> subjects_of(const std::vector<SessionRecord>& records) {
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.subject_id);
  std::sort(ids.begin(), ids.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace cogload
