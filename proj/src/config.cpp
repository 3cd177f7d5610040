#include "cogload/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "cogload/error.hpp"
#include "cogload/hashing.hpp"

namespace cogload {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json* field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (const auto* v = field(obj, key)) {
    try {
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config " + where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError("unknown config key '" + key + "' in " + where);
    }
  }
}

fs::path resolve_path(const std::string& s, const fs::path& base) {
  if (s.empty()) return {};
  fs::path p(s);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

std::vector<double> parse_window_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = std::min(s.find(',', pos), s.size());
    const std::string_view tok(s.data() + pos, comma - pos);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ValidationError("bad window length '" + std::string(tok) + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

void RunConfig::validate() const {
  if (window_lens.empty()) throw ValidationError("window_lens is empty");
  for (std::size_t i = 0; i < window_lens.size(); ++i) {
    const double w = window_lens[i];
    if (w != 10.0 && w != 30.0 && w != 60.0) {
      throw ValidationError("window length " + std::to_string(w) + " is not one of 10, 30, 60");
    }
    if (std::find(window_lens.begin(), window_lens.begin() + static_cast<std::ptrdiff_t>(i), w) !=
        window_lens.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw ValidationError("window length listed twice");
    }
  }
  if (runs < 1) throw ValidationError("runs must be >= 1");
  train.validate();
  if (!(finetune_learning_rate > 0.0)) throw ValidationError("finetune_learning_rate must be > 0");
  for (std::size_t s : {steps.cl_positive, steps.cl_negative, steps.stress_positive, steps.stress_negative,
                        steps.validation, steps.test}) {
    if (s == 0) throw ValidationError("step sizes must be >= 1");
  }
  if (!(calibration.threshold >= 0.0 && calibration.threshold <= 1.0)) {
    throw ValidationError("calibration threshold must lie in [0, 1]");
  }
  if (calibration.pool == Protocol::StressPretraining) {
    throw ValidationError("calibration pool must be vanilla or pretrained");
  }
  if (calibration.window_len_s != 10.0 && calibration.window_len_s != 30.0 && calibration.window_len_s != 60.0) {
    throw ValidationError("calibration window must be one of 10, 30, 60");
  }
}

json RunConfig::canonical() const {
  json j;
  j["pilot_manifest"] = spelled.pilot_manifest;
  j["wesad_dir"] = spelled.wesad_dir;
  j["survey_manifest"] = spelled.survey_manifest;
  j["response_times"] = spelled.response_times;
  j["window_lens"] = window_lens;
  j["runs"] = runs;
  j["master_seed"] = master_seed;
  j["train"] = {{"learning_rate", train.learning_rate},
                {"finetune_learning_rate", finetune_learning_rate},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience},
                {"batch_size", train.batch_size},
                {"restore_best", train.restore_best},
                {"beta1", train.adam.beta1},
                {"beta2", train.adam.beta2},
                {"epsilon", train.adam.epsilon}};
  j["steps"] = {{"cl_positive", steps.cl_positive},         {"cl_negative", steps.cl_negative},
                {"stress_positive", steps.stress_positive}, {"stress_negative", steps.stress_negative},
                {"validation", steps.validation},           {"test", steps.test}};
  j["normalization"] = std::string(to_string(normalization));
  j["calibration"] = {{"window_len_s", calibration.window_len_s},
                      {"threshold", calibration.threshold},
                      {"pool", std::string(to_string(calibration.pool))}};
  return j;
}

std::string RunConfig::hash() const { return sha256_hex(canonical().dump()).substr(0, 16); }

ProtocolOptions RunConfig::protocol_options() const {
  ProtocolOptions o;
  o.train = train;
  o.finetune_learning_rate = finetune_learning_rate;
  o.steps = steps;
  o.normalization = normalization;
  o.master_seed = master_seed;
  o.runs = runs;
  o.jobs = jobs;
  return o;
}

RunConfig parse_config(const json& doc, const fs::path& base) {
  check_keys(doc,
             {"pilot_manifest", "wesad_dir", "survey_manifest", "response_times", "window_lens", "runs",
              "master_seed", "jobs", "output_dir", "train", "steps", "normalization", "calibration"},
             "top level");
  RunConfig c;
  read(doc, "pilot_manifest", c.spelled.pilot_manifest);
  read(doc, "wesad_dir", c.spelled.wesad_dir);
  read(doc, "survey_manifest", c.spelled.survey_manifest);
  read(doc, "response_times", c.spelled.response_times);
  c.pilot_manifest = resolve_path(c.spelled.pilot_manifest, base);
  c.wesad_dir = resolve_path(c.spelled.wesad_dir, base);
  c.survey_manifest = resolve_path(c.spelled.survey_manifest, base);
  c.response_times = resolve_path(c.spelled.response_times, base);
  read(doc, "window_lens", c.window_lens);
  read(doc, "runs", c.runs);
  read(doc, "master_seed", c.master_seed);
  read(doc, "jobs", c.jobs);
  std::string out;
  read(doc, "output_dir", out);
  if (!out.empty()) c.output_dir = resolve_path(out, base);
  if (const auto* t = field(doc, "train")) {
    check_keys(*t,
               {"learning_rate", "finetune_learning_rate", "max_epochs", "patience", "batch_size", "restore_best",
                "beta1", "beta2", "epsilon"},
               "train");
    read(*t, "learning_rate", c.train.learning_rate);
    read(*t, "finetune_learning_rate", c.finetune_learning_rate);
    read(*t, "max_epochs", c.train.max_epochs);
    read(*t, "patience", c.train.patience);
    read(*t, "batch_size", c.train.batch_size);
    read(*t, "restore_best", c.train.restore_best);
    read(*t, "beta1", c.train.adam.beta1);
    read(*t, "beta2", c.train.adam.beta2);
    read(*t, "epsilon", c.train.adam.epsilon);
  }
  if (const auto* s = field(doc, "steps")) {
    check_keys(*s, {"cl_positive", "cl_negative", "stress_positive", "stress_negative", "validation", "test"},
               "steps");
    read(*s, "cl_positive", c.steps.cl_positive);
    read(*s, "cl_negative", c.steps.cl_negative);
    read(*s, "stress_positive", c.steps.stress_positive);
    read(*s, "stress_negative", c.steps.stress_negative);
    read(*s, "validation", c.steps.validation);
    read(*s, "test", c.steps.test);
  }
  if (const auto* n = field(doc, "normalization")) c.normalization = parse_normalization(n->get<std::string>());
  if (const auto* cal = field(doc, "calibration")) {
    check_keys(*cal, {"window_len_s", "threshold", "pool"}, "calibration");
    read(*cal, "window_len_s", c.calibration.window_len_s);
    read(*cal, "threshold", c.calibration.threshold);
    if (const auto* p = field(*cal, "pool")) c.calibration.pool = parse_protocol(p->get<std::string>());
  }
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return parse_config(doc, path.parent_path());
}

}  // namespace cogload
