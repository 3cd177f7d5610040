#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cogload/protocols.hpp"
#include "cogload/trainer.hpp"
#include "cogload/windowing.hpp"

namespace cogload {

struct CalibrationConfig {
  double window_len_s = 30.0;
  double threshold = 0.7;
  Protocol pool = Protocol::Pretrained;
};

/// Experiment configuration. Relative dataset paths resolve against the
/// directory of the config file.
struct RunConfig {
  std::filesystem::path pilot_manifest;
  std::filesystem::path wesad_dir;
  std::filesystem::path survey_manifest;
  std::filesystem::path response_times;
  std::vector<double> window_lens{10.0, 30.0, 60.0};
  int runs = 40;
  std::uint64_t master_seed = 0;
  std::size_t jobs = 0;  // 0: all hardware threads
  std::filesystem::path output_dir = "out";
  cnn::TrainSpec train;
  double finetune_learning_rate = 1e-4;
  StepSizes steps;
  Normalization normalization = Normalization::PerWindowZScore;
  CalibrationConfig calibration;

  /// Checks value ranges (not paths).
  void validate() const;

  /// Canonical JSON of every setting that influences results. Excludes jobs
  /// and output_dir; dataset paths are kept as written.
  nlohmann::json canonical() const;

  /// First 16 hex digits of SHA-256 over canonical().dump().
  std::string hash() const;

  ProtocolOptions protocol_options() const;

  /// Spellings of the dataset paths as they appeared in the file.
  struct Spelled {
    std::string pilot_manifest, wesad_dir, survey_manifest, response_times;
  } spelled;
};

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Parses "10,30,60".
std::vector<double> parse_window_list(const std::string& s);

}  // namespace cogload
