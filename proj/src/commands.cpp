#include "cogload/commands.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "cogload/analysis.hpp"
#include "cogload/error.hpp"
#include "cogload/hashing.hpp"
#include "cogload/ledger.hpp"
#include "cogload/response_times.hpp"
#include "cogload/weights_io.hpp"

namespace cogload {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_path(const fs::path& p, const char* what, bool directory = false) {
  if (p.empty()) throw ValidationError(std::string("config does not set ") + what);
  const bool ok = directory ? fs::is_directory(p) : fs::is_regular_file(p);
  if (!ok) throw ValidationError(std::string(what) + " not found: " + p.string());
}

std::string window_name(double w) { return format_number(w); }

fs::path pool_path(const fs::path& dir, double w) { return dir / ("pool_w" + window_name(w) + ".json"); }

fs::path protocol_dir(const RunConfig& c, Protocol p) { return c.output_dir / std::string(to_string(p)); }

fs::path reports_dir(const RunConfig& c) { return c.output_dir / "reports"; }

json header_for(const RunConfig& c, const std::string& command) {
  return {{"tool", "cogload"}, {"version", COGLOAD_VERSION}, {"config", c.hash()}, {"command", command}};
}

template <class Writer>
fs::path emit(const fs::path& path, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  write_file_atomic(path, os.str());
  spdlog::info("wrote {}", path.string());
  return path;
}

std::vector<SessionRecord> load_pilot(const RunConfig& c) {
  require_path(c.pilot_manifest, "pilot_manifest");
  auto m = load_manifest(c.pilot_manifest);
  spdlog::info("pilot dataset '{}': {} records", m.dataset_name, m.records.size());
  return std::move(m.records);
}

std::vector<SessionRecord> load_wesad(const RunConfig& c) {
  require_path(c.wesad_dir, "wesad_dir", true);
  auto records = load_wesad_dir(c.wesad_dir);
  if (records.empty()) throw ValidationError("no converted recordings in " + c.wesad_dir.string());
  spdlog::info("stress corpus: {} segments from {} subjects", records.size(), subjects_of(records).size());
  return records;
}

std::string wesad_content_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += f.filename().string() + ":" + sha256_file_hex(f) + "\n";
  return sha256_hex(acc);
}

std::string pretrain_key(const RunConfig& c) {
  json j = c.canonical();
  j.erase("pilot_manifest");
  j.erase("survey_manifest");
  j.erase("response_times");
  j.erase("window_lens");
  j.erase("calibration");
  j["wesad_dir"] = wesad_content_hash(c.wesad_dir);
  j["train"].erase("finetune_learning_rate");
  j["format"] = COGLOAD_VERSION;
  return sha256_hex(j.dump()).substr(0, 16);
}

/// Loads the cached stress pool for `w` or trains and caches it.
ModelPool stress_pool_for(const RunConfig& c, const std::vector<SessionRecord>& wesad, double w,
                          const fs::path& cache) {
  const auto path = pool_path(cache, w);
  if (fs::exists(path)) {
    try {
      auto pool = load_pool(path);
      spdlog::info("reusing cached stress pool {}", path.string());
      return pool;
    } catch (const Error& e) {
      spdlog::warn("ignoring unreadable cache {}: {}", path.string(), e.what());
    }
  }
  auto opt = c.protocol_options();
  opt.model_dir = cache / "models";
  RunLedger ledger(cache / ("ledger_w" + window_name(w) + ".jsonl"), header_for(c, "pretrain"));
  opt.ledger = &ledger;
  auto pool = pretrain_wesad(wesad, w, opt);
  save_pool(pool, path, header_for(c, "pretrain"));
  return pool;
}

ModelPool load_required_pool(const fs::path& path, const char* command) {
  if (!fs::exists(path)) {
    throw ValidationError("missing " + path.string() + "; run the '" + command + "' command first");
  }
  return load_pool(path);
}

std::vector<RunMetrics> all_metrics(const ModelPool& pool) {
  std::vector<RunMetrics> out;
  for (const auto& e : pool.entries) out.push_back(e.metrics);
  out.insert(out.end(), pool.failures.begin(), pool.failures.end());
  return out;
}

std::vector<ScopedCorrelation> correlations(const std::vector<SourceTargetPoint>& points,
                                            const std::vector<double>& windows) {
  std::vector<ScopedCorrelation> out;
  auto add = [&](const std::string& scope, const std::vector<SourceTargetPoint>& pts) {
    static const char* names[3] = {"source_train_f1", "source_val_f1", "source_test_f1"};
    try {
      for (const auto& r : correlate_source_target(pts)) out.push_back({scope, r, ""});
    } catch (const ValidationError& e) {
      for (const char* n : names) out.push_back({scope, {n, "target_f1", pts.size(), 0.0, 1.0}, e.what()});
    }
  };
  for (double w : windows) {
    std::vector<SourceTargetPoint> pts;
    std::copy_if(points.begin(), points.end(), std::back_inserter(pts),
                 [&](const SourceTargetPoint& p) { return p.window_len_s == w; });
    add("w" + window_name(w), pts);
  }
  if (windows.size() > 1) add("pooled", points);
  return out;
}

AnalysisOptions analysis_options(const RunConfig& c) {
  AnalysisOptions a;
  a.window_len_s = c.calibration.window_len_s;
  a.exclusion_threshold = c.calibration.threshold;
  a.step = c.steps.test;
  a.normalization = c.normalization;
  a.jobs = c.jobs;
  return a;
}

std::vector<SessionRecord> load_survey(const RunConfig& c) {
  require_path(c.survey_manifest, "survey_manifest");
  auto m = load_manifest(c.survey_manifest);
  if (calibration_sets(m.records).empty()) {
    throw ValidationError("survey manifest " + c.survey_manifest.string() + " has no calibration recordings");
  }
  return std::move(m.records);
}

std::optional<fs::path> figure4(const RunConfig& c, const std::vector<SessionRecord>& survey, bool with_summary,
                                std::vector<fs::path>& written) {
  if (c.response_times.empty()) return std::nullopt;
  require_path(c.response_times, "response_times");
  const auto events = load_response_times(c.response_times);
  const auto table = response_time_analysis(events, gamified_sessions(survey));
  const auto stamp = stamp_for(c);
  auto path = emit(reports_dir(c) / "figure4_response_times.csv",
                   [&](std::ostream& os) { write_figure4_csv(os, stamp, table); });
  written.push_back(path);
  if (with_summary) {
    written.push_back(emit(reports_dir(c) / "response_times.csv",
                           [&](std::ostream& os) { write_response_summary_csv(os, stamp, table); }));
  }
  if (table.gamified && table.plain) {
    spdlog::info("mean seconds per question: gamified {:.2f}, plain {:.2f}", table.gamified->mean_s,
                 table.plain->mean_s);
  }
  return path;
}

}  // namespace

ReportStamp stamp_for(const RunConfig& config) { return {COGLOAD_VERSION, config.hash()}; }

fs::path pretrain_cache_dir(const RunConfig& config) {
  require_path(config.wesad_dir, "wesad_dir", true);
  return config.output_dir / "cache" / ("pretrain-" + pretrain_key(config));
}

std::vector<fs::path> cmd_vanilla(const RunConfig& c) {
  const auto pilot = load_pilot(c);
  auto opt = c.protocol_options();
  opt.model_dir = c.output_dir / "models";
  const auto dir = protocol_dir(c, Protocol::Vanilla);
  RunLedger ledger(dir / "ledger.jsonl", header_for(c, "vanilla"));
  opt.ledger = &ledger;
  std::vector<RunMetrics> metrics;
  for (double w : c.window_lens) {
    spdlog::info("vanilla: {} s windows, {} runs", w, c.runs);
    const auto pool = run_vanilla(pilot, w, opt);
    save_pool(pool, pool_path(dir, w), header_for(c, "vanilla"));
    const auto m = all_metrics(pool);
    metrics.insert(metrics.end(), m.begin(), m.end());
  }
  const auto stamp = stamp_for(c);
  const auto table = aggregate(metrics);
  return {emit(reports_dir(c) / "table1_vanilla.csv", [&](std::ostream& os) { write_table1_csv(os, stamp, table); })};
}

std::vector<fs::path> cmd_pretrain(const RunConfig& c) {
  const auto wesad = load_wesad(c);
  const auto cache = pretrain_cache_dir(c);
  std::vector<fs::path> written;
  const auto stamp = stamp_for(c);
  for (double w : c.window_lens) {
    const auto pool = stress_pool_for(c, wesad, w, cache);
    written.push_back(emit(reports_dir(c) / ("stress_source_w" + window_name(w) + ".csv"),
                           [&](std::ostream& os) { write_source_metrics_csv(os, stamp, pool); }));
  }
  return written;
}

std::vector<fs::path> cmd_finetune(const RunConfig& c) {
  const auto pilot = load_pilot(c);
  const auto wesad = load_wesad(c);
  const auto cache = pretrain_cache_dir(c);
  auto opt = c.protocol_options();
  opt.model_dir = c.output_dir / "models";
  const auto dir = protocol_dir(c, Protocol::Pretrained);
  RunLedger ledger(dir / "ledger.jsonl", header_for(c, "finetune"));
  opt.ledger = &ledger;
  std::vector<RunMetrics> metrics;
  std::vector<SourceTargetPoint> points;
  for (double w : c.window_lens) {
    const auto stress = stress_pool_for(c, wesad, w, cache);
    spdlog::info("fine-tuning: {} s windows, {} runs", w, c.runs);
    const auto pool = run_pretrained(stress, pilot, w, opt);
    save_pool(pool, pool_path(dir, w), header_for(c, "finetune"));
    const auto m = all_metrics(pool);
    metrics.insert(metrics.end(), m.begin(), m.end());
    const auto p = source_target_points(pool);
    points.insert(points.end(), p.begin(), p.end());
  }
  const auto stamp = stamp_for(c);
  const auto table = aggregate(metrics);
  const auto corr = correlations(points, c.window_lens);
  return {
      emit(reports_dir(c) / "table1_pretrained.csv", [&](std::ostream& os) { write_table1_csv(os, stamp, table); }),
      emit(reports_dir(c) / "figure3_points.csv",
           [&](std::ostream& os) { write_figure3_points_csv(os, stamp, points); }),
      emit(reports_dir(c) / "figure3_correlations.csv",
           [&](std::ostream& os) { write_correlations_csv(os, stamp, corr); }),
  };
}

std::vector<fs::path> cmd_survey(const RunConfig& c) {
  const auto survey = load_survey(c);
  const double w = c.calibration.window_len_s;
  const auto calib_pool = load_required_pool(pool_path(protocol_dir(c, c.calibration.pool), w),
                                             c.calibration.pool == Protocol::Vanilla ? "vanilla" : "finetune");
  const auto stress_pool = load_required_pool(pool_path(pretrain_cache_dir(c), w), "pretrain");
  std::optional<std::vector<SessionRecord>> pilot;
  if (!c.pilot_manifest.empty()) pilot = load_pilot(c);
  if (!c.response_times.empty()) require_path(c.response_times, "response_times");

  const auto best = best_stress_model(stress_pool, w);
  if (!best) throw ValidationError("no stress model with source metrics at " + window_name(w) + " s");
  const auto stress_model = cnn::load_weights(stress_pool.entries[*best].weights_path, w);
  spdlog::info("stress detector: run {} (source validation F1 {:.3f})", stress_pool.entries[*best].metrics.fold.run_id,
               stress_pool.entries[*best].metrics.source->val_f1);

  const auto opt = analysis_options(c);
  const auto sets = calibration_sets(survey);
  const auto calibrations = calibrate_subjects(calib_pool, sets, opt);

  std::map<std::pair<std::string, std::string>, const SessionRecord*> survey_records;
  for (const auto& r : survey) {
    if (!is_survey(r.condition)) continue;
    if (!survey_records.emplace(std::pair{r.subject_id, r.session_id}, &r).second) {
      throw ValidationError("two survey recordings for " + r.subject_id + "/" + r.session_id);
    }
  }

  std::vector<Table2Row> rows;
  std::size_t included = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    Table2Row row;
    row.calibration = calibrations[i];
    row.calibration.selected_model =
        row.calibration.selected_model.lexically_normal().lexically_relative(c.output_dir.lexically_normal());
    row.calibration_stress_pct = positive_percentage(stress_model, sets[i].records, opt);
    const auto it = survey_records.find({sets[i].subject_id, sets[i].session_id});
    if (it != survey_records.end()) {
      std::optional<cnn::ModelWeights> selected;
      if (!calibrations[i].excluded) selected = cnn::load_weights(calibrations[i].selected_model, w);
      row.survey = burden_percentages(selected ? &*selected : nullptr, stress_model, *it->second, opt);
      row.survey->calibration_f1 = calibrations[i].calibration_f1;
    }
    included += calibrations[i].excluded ? 0 : 1;
    rows.push_back(std::move(row));
  }
  spdlog::info("{} of {} calibration sessions have a detector above {}", included, rows.size(),
               c.calibration.threshold);

  const auto stamp = stamp_for(c);
  std::vector<fs::path> written;
  written.push_back(
      emit(reports_dir(c) / "table2_survey_burden.csv", [&](std::ostream& os) { write_table2_csv(os, stamp, rows); }));
  if (pilot) {
    const auto leakage = stress_leakage_check(stress_model, *pilot, opt);
    written.push_back(
        emit(reports_dir(c) / "stress_leakage.csv", [&](std::ostream& os) { write_leakage_csv(os, stamp, leakage); }));
  }
  figure4(c, survey, false, written);
  return written;
}

std::vector<fs::path> cmd_response_times(const RunConfig& c) {
  require_path(c.response_times, "response_times");
  const auto survey = load_survey(c);
  std::vector<fs::path> written;
  figure4(c, survey, true, written);
  return written;
}

std::vector<fs::path> cmd_report(const RunConfig& c) {
  std::vector<RunMetrics> metrics;
  for (Protocol p : {Protocol::Vanilla, Protocol::Pretrained}) {
    for (double w : c.window_lens) {
      const auto path = pool_path(protocol_dir(c, p), w);
      if (!fs::exists(path)) continue;
      const auto m = all_metrics(load_pool(path));
      metrics.insert(metrics.end(), m.begin(), m.end());
    }
  }
  if (metrics.empty()) {
    throw ValidationError("no model pools under " + c.output_dir.string() + "; run 'vanilla' or 'finetune' first");
  }
  const auto stamp = stamp_for(c);
  const auto table = aggregate(metrics);
  return {emit(reports_dir(c) / "table1.csv", [&](std::ostream& os) { write_table1_csv(os, stamp, table); })};
}

int run_cli(int argc, const char* const* argv) {
  static const auto logger = [] {
    auto l = std::make_shared<spdlog::logger>("cogload", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    spdlog::set_default_logger(l);
    return l;
  }();

  CLI::App app{"Cognitive-load detection from wrist PPG"};
  app.set_version_flag("--version", std::string(COGLOAD_VERSION));
  app.require_subcommand(1);

  fs::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::string windows;
  std::optional<std::size_t> jobs;
  std::string out;
  bool quiet = false;

  struct Sub {
    const char* name;
    const char* help;
    std::vector<fs::path> (*fn)(const RunConfig&);
  };
  const Sub subs[] = {
      {"vanilla", "Train from scratch with leave-one-subject-out folds", cmd_vanilla},
      {"pretrain", "Train (or reuse cached) stress detectors", cmd_pretrain},
      {"finetune", "Fine-tune stress detectors on the pilot folds", cmd_finetune},
      {"survey", "Calibrate detectors per participant and measure survey burden", cmd_survey},
      {"response-times", "Per-question response time analysis", cmd_response_times},
      {"report", "Combine trained pools into one aggregate table", cmd_report},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> commands;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--runs", runs, "Repetitions per fold")->check(CLI::PositiveNumber);
    sub->add_option("--windows", windows, "Window lengths in seconds, e.g. 10,30,60");
    sub->add_option("--jobs", jobs, "Worker threads (0: all cores)");
    sub->add_option("--out", out, "Output directory");
    sub->add_flag("-q,--quiet", quiet, "Only log warnings and errors");
    commands.emplace_back(sub, &s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  logger->set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    auto config = load_config(config_path);
    if (seed) config.master_seed = *seed;
    if (runs) config.runs = *runs;
    if (!windows.empty()) config.window_lens = parse_window_list(windows);
    if (jobs) config.jobs = *jobs;
    if (!out.empty()) config.output_dir = out;
    config.validate();
    for (const auto& [sub, s] : commands) {
      if (sub->parsed()) {
        spdlog::info("{}: config {} seed {} runs {}", s->name, config.hash(), config.master_seed, config.runs);
        s->fn(config);
      }
    }
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace cogload
