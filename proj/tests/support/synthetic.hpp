#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cogload/dataset.hpp"
#include "cogload/windowing.hpp"

namespace cogload::testing {

/// Pulse-like wave at `beat_hz` with Gaussian noise, 64 Hz by default.
std::vector<float> pulse_wave(std::size_t n, double beat_hz, double noise, std::uint64_t seed, double fs = 64.0);

SessionRecord make_record(std::string subject, std::string session, Condition condition, std::vector<float> samples,
                          double fs = 64.0);

/// Cognitive load beats faster than baseline, so the classes stay separable
/// after per-window normalisation.
struct PilotShape {
  int subjects = 4;
  double cl_seconds = 90.0;
  double baseline_seconds = 90.0;
  double noise = 0.05;
  std::uint64_t seed = 1;
};

std::vector<SessionRecord> synthetic_pilot(const PilotShape& shape);

/// Writes BVP files plus manifest.json; returns the manifest path.
std::filesystem::path write_pilot_dataset(const std::filesystem::path& dir, const PilotShape& shape);

/// One converter CSV per subject: baseline, stress, amusement segments plus
/// a dropped "transient" segment in between.
void write_wesad_dir(const std::filesystem::path& dir, int subjects, double segment_seconds, std::uint64_t seed);

/// Survey dataset: per (subject, session) a Stroop pair and one survey
/// recording; alternating gamified flags. Writes manifest.json and
/// response_times.csv and returns the manifest path.
std::filesystem::path write_survey_dataset(const std::filesystem::path& dir, int subjects, std::uint64_t seed);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

/// Two-class batch of constant-offset windows plus noise (class 1 above 0,
/// class 0 below), without normalisation.
WindowBatch offset_batch(std::size_t per_class, std::size_t length, double noise, std::uint64_t seed);

std::string read_file(const std::filesystem::path& p);

}  // namespace cogload::testing
