#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cogload/config.hpp"
#include "cogload/reports.hpp"

namespace cogload {

/// Output layout under config.output_dir:
///   models/<protocol>/w<window>/run<r>_<subject>.cogw
///   <protocol>/ledger.jsonl, <protocol>/pool_w<window>.json
///   cache/pretrain-<key>/       stress models, reused across commands
///   reports/*.csv
/// Every command validates its inputs before writing anything and returns
/// the report files it wrote.
std::vector<std::filesystem::path> cmd_vanilla(const RunConfig& config);
std::vector<std::filesystem::path> cmd_pretrain(const RunConfig& config);
std::vector<std::filesystem::path> cmd_finetune(const RunConfig& config);
std::vector<std::filesystem::path> cmd_survey(const RunConfig& config);
std::vector<std::filesystem::path> cmd_response_times(const RunConfig& config);
std::vector<std::filesystem::path> cmd_report(const RunConfig& config);

ReportStamp stamp_for(const RunConfig& config);

/// Content-addressed directory of the stress-pretraining pool.
std::filesystem::path pretrain_cache_dir(const RunConfig& config);

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace cogload
