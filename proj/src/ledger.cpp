#include "cogload/ledger.hpp"

#include <spdlog/spdlog.h>

#include "cogload/error.hpp"

namespace cogload {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (p.empty()) return {};
  if (base.empty()) return p.generic_string();
  const auto rel = p.lexically_normal().lexically_relative(base.lexically_normal());
  if (rel.empty()) return p.generic_string();
  return rel.generic_string();
}

fs::path resolve(const std::string& s, const fs::path& base) {
  if (s.empty()) return {};
  fs::path p(s);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

json to_json(const FoldPlan& f) {
  return {{"run_id", f.run_id},
          {"test_subject", f.test_subject},
          {"validation_subjects", f.validation_subjects},
          {"training_subjects", f.training_subjects},
          {"seed", f.seed}};
}

FoldPlan fold_plan_from_json(const json& j) {
  FoldPlan f;
  f.run_id = j.at("run_id").get<int>();
  f.test_subject = j.at("test_subject").get<std::string>();
  f.validation_subjects = j.at("validation_subjects").get<std::vector<std::string>>();
  f.training_subjects = j.at("training_subjects").get<std::vector<std::string>>();
  f.seed = j.at("seed").get<std::uint64_t>();
  return f;
}

json to_json(const RunMetrics& m, const fs::path& base) {
  json j = {{"protocol", to_string(m.protocol)},
            {"window_len_s", m.window_len_s},
            {"fold", to_json(m.fold)},
            {"train_seed", m.train_seed},
            {"test_f1", m.test_f1},
            {"best_epoch", m.best_epoch},
            {"stopped_epoch", m.stopped_epoch},
            {"failed", m.failed}};
  if (m.source) {
    j["source"] = {{"train_f1", m.source->train_f1}, {"val_f1", m.source->val_f1}, {"test_f1", m.source->test_f1}};
  }
  if (!m.source_model.empty()) j["source_model"] = relative_to(m.source_model, base);
  if (m.failed) j["failure"] = m.failure;
  return j;
}

RunMetrics run_metrics_from_json(const json& j, const fs::path& base) {
  RunMetrics m;
  m.protocol = parse_protocol(j.at("protocol").get<std::string>());
  m.window_len_s = j.at("window_len_s").get<double>();
  m.fold = fold_plan_from_json(j.at("fold"));
  m.train_seed = j.at("train_seed").get<std::uint64_t>();
  m.test_f1 = j.at("test_f1").get<double>();
  m.best_epoch = j.at("best_epoch").get<int>();
  m.stopped_epoch = j.at("stopped_epoch").get<int>();
  m.failed = j.at("failed").get<bool>();
  if (j.contains("source")) {
    const auto& s = j.at("source");
    m.source = SourceMetrics{s.at("train_f1").get<double>(), s.at("val_f1").get<double>(),
                             s.at("test_f1").get<double>()};
  }
  if (j.contains("source_model")) m.source_model = resolve(j.at("source_model").get<std::string>(), base);
  if (j.contains("failure")) m.failure = j.at("failure").get<std::string>();
  return m;
}

void save_pool(const ModelPool& pool, const fs::path& path, const json& header) {
  const fs::path base = path.parent_path();
  json doc = {{"header", header}, {"entries", json::array()}, {"failures", json::array()}};
  for (const auto& e : pool.entries) {
    json j = to_json(e.metrics, base);
    j["weights"] = relative_to(e.weights_path, base);
    doc["entries"].push_back(std::move(j));
  }
  for (const auto& f : pool.failures) doc["failures"].push_back(to_json(f, base));
  if (!base.empty()) fs::create_directories(base);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write pool index " + path.string());
  out << doc.dump(1) << '\n';
}

ModelPool load_pool(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pool index " + path.string());
  const fs::path base = path.parent_path();
  ModelPool pool;
  try {
    const json doc = json::parse(in);
    for (const auto& j : doc.at("entries")) {
      pool.entries.push_back({resolve(j.at("weights").get<std::string>(), base), run_metrics_from_json(j, base)});
    }
    for (const auto& j : doc.at("failures")) pool.failures.push_back(run_metrics_from_json(j, base));
  } catch (const json::exception& e) {
    throw ValidationError("pool index " + path.string() + ": " + e.what());
  }
  return pool;
}

RunLedger::RunLedger(const fs::path& path, const json& header) : path_(path), base_(path.parent_path()) {
  if (!base_.empty()) fs::create_directories(base_);
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error("cannot open run ledger " + path.string());
  json h = header;
  h["type"] = "header";
  write_line(h.dump());
}

RunLedger::~RunLedger() {
  if (!buffered_.empty()) {
    spdlog::warn("run ledger {} closed with {} out-of-order records pending", path_.string(), buffered_.size());
  }
}

std::size_t RunLedger::reserve(std::size_t n) {
  std::lock_guard lock(mutex_);
  const std::size_t base = reserved_;
  reserved_ += n;
  return base;
}

std::size_t RunLedger::pending() const {
  std::lock_guard lock(mutex_);
  return buffered_.size();
}

void RunLedger::record(std::size_t seq, const RunMetrics& metrics, const fs::path& weights) {
  json j = to_json(metrics, base_);
  j["type"] = "run";
  j["seq"] = seq;
  j["weights"] = relative_to(weights, base_);
  std::lock_guard lock(mutex_);
  if (seq >= reserved_) throw Error("run ledger: sequence number was never reserved");
  buffered_.emplace(seq, j.dump());
  while (!buffered_.empty() && buffered_.begin()->first == next_seq_) {
    write_line(buffered_.begin()->second);
    buffered_.erase(buffered_.begin());
    ++next_seq_;
  }
}

void RunLedger::write_line(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error("write failed for run ledger " + path_.string());
}

}  // namespace cogload
