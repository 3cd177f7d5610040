#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cogload/dataset.hpp"

namespace cogload {

/// One answered question: "subject,session,survey,question_index,start_epoch_s,end_epoch_s".
struct ResponseEvent {
  std::string subject_id;
  std::string session_id;
  std::string survey;
  int question_index = 0;
  double start_epoch_s = 0.0;
  double end_epoch_s = 0.0;

  double duration_s() const noexcept { return end_epoch_s - start_epoch_s; }
};

std::vector<ResponseEvent> parse_response_times(std::istream& in, const std::string& source_name = "<stream>");
std::vector<ResponseEvent> load_response_times(const std::filesystem::path& path);

struct QuestionTiming {
  ResponseEvent event;
  bool gamified = false;
  /// The highest question index of its (subject, session, survey).
  bool last_question = false;
};

struct ConditionMean {
  double mean_s = 0.0;
  std::size_t questions = 0;
};

/// Mean over subjects of (plain - gamified) duration at one question position.
struct PositionDifference {
  std::string survey;
  int question_index = 0;
  double mean_difference_s = 0.0;
  std::size_t subjects = 0;
};

struct ResponseTimeTable {
  std::vector<QuestionTiming> questions;
  std::optional<ConditionMean> gamified;
  std::optional<ConditionMean> plain;
  std::vector<PositionDifference> differences;
};

/// `gamified` maps (subject, session) to the session's survey variant.
/// Events for sessions missing from the map are rejected.
using GamifiedMap = std::map<std::pair<std::string, std::string>, bool>;

GamifiedMap gamified_sessions(const std::vector<SessionRecord>& survey_records);

/// Last question of every survey is kept in `questions` but left out of the
/// means and the difference series.
ResponseTimeTable response_time_analysis(const std::vector<ResponseEvent>& events, const GamifiedMap& gamified);

}  // namespace cogload
