#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>

#include "cogload/protocols.hpp"

namespace cogload {

/// Paths are written relative to `base` when they live under it.
nlohmann::json to_json(const RunMetrics& m, const std::filesystem::path& base);
RunMetrics run_metrics_from_json(const nlohmann::json& j, const std::filesystem::path& base);

nlohmann::json to_json(const FoldPlan& f);
FoldPlan fold_plan_from_json(const nlohmann::json& j);

/// Pool index written next to the weights: {"header":..., "entries":[...], "failures":[...]}.
void save_pool(const ModelPool& pool, const std::filesystem::path& path, const nlohmann::json& header);
ModelPool load_pool(const std::filesystem::path& path);

/// Append-only JSON-lines run ledger. Jobs may finish in any order; each
/// reserves a sequence number up front and lines are released strictly in
/// sequence order, so the file is identical for any worker count.
class RunLedger {
 public:
  RunLedger(const std::filesystem::path& path, const nlohmann::json& header);
  ~RunLedger();
  RunLedger(const RunLedger&) = delete;
  RunLedger& operator=(const RunLedger&) = delete;

  /// Reserves `n` consecutive sequence numbers; returns the first.
  std::size_t reserve(std::size_t n);

  void record(std::size_t seq, const RunMetrics& metrics, const std::filesystem::path& weights);

  const std::filesystem::path& path() const noexcept { return path_; }
  const std::filesystem::path& base() const noexcept { return base_; }

  /// Lines still waiting for an earlier sequence number.
  std::size_t pending() const;

 private:
  void write_line(const std::string& line);

  std::filesystem::path path_;
  std::filesystem::path base_;
  std::ofstream out_;
  mutable std::mutex mutex_;
  std::size_t next_seq_ = 0;
  std::size_t reserved_ = 0;
  std::map<std::size_t, std::string> buffered_;
};

}  // namespace cogload
