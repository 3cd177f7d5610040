#include "cogload/response_times.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <tuple>

#include "cogload/error.hpp"

namespace cogload {

namespace {

constexpr std::string_view kHeader = "subject,session,survey,question_index,start_epoch_s,end_epoch_s";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, const std::string& source, std::size_t line, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(source, line, std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

std::vector<ResponseEvent> parse_response_times(std::istream& in, const std::string& source) {
  std::vector<ResponseEvent> events;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kHeader) throw ParseError(source, lineno, "expected header '" + std::string(kHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 6) throw ParseError(source, lineno, "expected 6 fields, got " + std::to_string(f.size()));
    ResponseEvent e;
    e.subject_id = std::string(f[0]);
    e.session_id = std::string(f[1]);
    e.survey = std::string(f[2]);
    e.question_index = parse_number<int>(f[3], source, lineno, "question_index");
    e.start_epoch_s = parse_number<double>(f[4], source, lineno, "start_epoch_s");
    e.end_epoch_s = parse_number<double>(f[5], source, lineno, "end_epoch_s");
    if (e.subject_id.empty() || e.session_id.empty() || e.survey.empty()) {
      throw ParseError(source, lineno, "empty identifier field");
    }
    if (!std::isfinite(e.start_epoch_s) || !std::isfinite(e.end_epoch_s)) {
      throw ParseError(source, lineno, "non-finite timestamp");
    }
    if (e.end_epoch_s < e.start_epoch_s) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": end_epoch_s precedes start_epoch_s");
    }
    events.push_back(std::move(e));
  }
  if (!header_seen) throw ParseError(source, 1, "missing header");
  return events;
}

std::vector<ResponseEvent> load_response_times(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return parse_response_times(in, path.string());
}

GamifiedMap gamified_sessions(const std::vector<SessionRecord>& survey_records) {
  GamifiedMap out;
  for (const auto& r : survey_records) {
    if (!is_survey(r.condition)) continue;
    const bool g = r.gamified.value_or(r.condition == Condition::SurveyGamified);
    const auto [it, inserted] = out.emplace(std::pair{r.subject_id, r.session_id}, g);
    if (!inserted && it->second != g) {
      throw ValidationError("session " + r.subject_id + "/" + r.session_id + " is both gamified and plain");
    }
  }
  return out;
}

ResponseTimeTable response_time_analysis(const std::vector<ResponseEvent>& events, const GamifiedMap& gamified) {
  using SurveyKey = std::tuple<std::string, std::string, std::string>;
  std::map<SurveyKey, int> last_index;
  std::set<std::tuple<std::string, std::string, std::string, int>> seen;
  std::vector<std::string> survey_order;
  for (const auto& e : events) {
    if (!gamified.count({e.subject_id, e.session_id})) {
      throw ValidationError("response times for unknown survey session " + e.subject_id + "/" + e.session_id);
    }
    if (!seen.emplace(e.subject_id, e.session_id, e.survey, e.question_index).second) {
      throw ValidationError("duplicate response time for " + e.subject_id + "/" + e.session_id + "/" + e.survey +
                            " question " + std::to_string(e.question_index));
    }
    auto [it, inserted] = last_index.emplace(SurveyKey{e.subject_id, e.session_id, e.survey}, e.question_index);
    if (!inserted) it->second = std::max(it->second, e.question_index);
    if (std::find(survey_order.begin(), survey_order.end(), e.survey) == survey_order.end()) {
      survey_order.push_back(e.survey);
    }
  }

  ResponseTimeTable table;
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  // (survey, question) -> subject -> durations per variant
  std::map<std::pair<std::string, int>, std::map<std::string, std::array<std::vector<double>, 2>>> by_position;
  for (const auto& e : events) {
    QuestionTiming q{e, gamified.at({e.subject_id, e.session_id}), false};
    q.last_question = last_index.at({e.subject_id, e.session_id, e.survey}) == e.question_index;
    table.questions.push_back(q);
    if (q.last_question) continue;
    const int v = q.gamified ? 1 : 0;
    sum[v] += e.duration_s();
    ++count[v];
    by_position[{e.survey, e.question_index}][e.subject_id][v].push_back(e.duration_s());
  }
  if (count[1] > 0) table.gamified = ConditionMean{sum[1] / static_cast<double>(count[1]), count[1]};
  if (count[0] > 0) table.plain = ConditionMean{sum[0] / static_cast<double>(count[0]), count[0]};

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (const auto& survey : survey_order) {
    for (auto it = by_position.lower_bound({survey, std::numeric_limits<int>::min()});
         it != by_position.end() && it->first.first == survey; ++it) {
      PositionDifference d{survey, it->first.second, 0.0, 0};
      for (const auto& [subject, variants] : it->second) {
        if (variants[0].empty() || variants[1].empty()) continue;
        d.mean_difference_s += mean(variants[0]) - mean(variants[1]);
        ++d.subjects;
      }
      if (d.subjects == 0) continue;
      d.mean_difference_s /= static_cast<double>(d.subjects);
      table.differences.push_back(d);
    }
  }
  return table;
}

}  // namespace cogload
