#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "synthetic.hpp"

namespace cogload {
namespace {

namespace fs = std::filesystem;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(COGLOAD_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = testing::temp_dir("cli_pipeline");
    testing::write_pilot_dataset(root_ / "pilot", {.subjects = 4, .cl_seconds = 30, .baseline_seconds = 30});
    testing::write_wesad_dir(root_ / "wesad", 4, 30.0, 3);
    testing::write_survey_dataset(root_ / "survey", 2, 4);
    config_ = write_config(root_, {{"pilot_manifest", "pilot/manifest.json"},
                                   {"wesad_dir", "wesad"},
                                   {"survey_manifest", "survey/manifest.json"},
                                   {"response_times", "survey/response_times.csv"},
                                   {"window_lens", {10}},
                                   {"runs", 1},
                                   {"master_seed", 5},
                                   {"train", {{"max_epochs", 3}, {"patience", 2}}},
                                   {"calibration", {{"window_len_s", 10}}}});
    for (const auto& [out, jobs] : {std::pair{"out1", 1}, std::pair{"out2", 2}}) {
      for (const char* cmd : {"vanilla", "pretrain", "finetune", "survey", "response-times", "report"}) {
        const auto code = run(std::string(cmd) + " -q --config " + config_.string() + " --jobs " +
                                  std::to_string(jobs) + " --out " + (root_ / out).string(),
                              root_ / (std::string(out) + "_" + cmd + ".log"));
        exit_codes_.push_back(code);
      }
    }
  }

  static inline fs::path root_;
  static inline fs::path config_;
  static inline std::vector<int> exit_codes_;
};

const char* const kReports[] = {"table1_vanilla.csv",   "stress_source_w10.csv",     "table1_pretrained.csv",
                                "figure3_points.csv",   "table2_survey_burden.csv",  "stress_leakage.csv",
                                "figure4_response_times.csv", "response_times.csv", "table1.csv"};

TEST_F(CliPipeline, AllCommandsSucceed) {
  for (std::size_t i = 0; i < exit_codes_.size(); ++i) EXPECT_EQ(exit_codes_[i], 0) << "command " << i;
  for (const char* r : kReports) EXPECT_TRUE(fs::exists(root_ / "out1" / "reports" / r)) << r;
}

TEST_F(CliPipeline, ReportsIdenticalAcrossJobCounts) {
  for (const char* r : kReports) {
    EXPECT_EQ(testing::read_file(root_ / "out1" / "reports" / r), testing::read_file(root_ / "out2" / "reports" / r))
        << r;
  }
  EXPECT_EQ(testing::read_file(root_ / "out1" / "vanilla" / "ledger.jsonl"),
            testing::read_file(root_ / "out2" / "vanilla" / "ledger.jsonl"));
}

TEST_F(CliPipeline, RerunIsBytewiseIdentical) {
  const auto before = testing::read_file(root_ / "out1" / "reports" / "table1_vanilla.csv");
  ASSERT_EQ(run("vanilla -q --config " + config_.string() + " --out " + (root_ / "out1").string(), root_ / "rerun.log"),
            0);
  EXPECT_EQ(testing::read_file(root_ / "out1" / "reports" / "table1_vanilla.csv"), before);
}

TEST_F(CliPipeline, ReportsCarryStamp) {
  const auto text = testing::read_file(root_ / "out1" / "reports" / "table2_survey_burden.csv");
  EXPECT_EQ(text.rfind("# cogload ", 0), 0u);
  EXPECT_NE(text.find("config="), std::string::npos);
}

TEST(Cli, MissingManifestFailsBeforeWriting) {
  const auto dir = testing::temp_dir("cli_missing");
  const auto cfg = write_config(dir, {{"pilot_manifest", "nope/manifest.json"}, {"window_lens", {10}}, {"runs", 1}});
  EXPECT_NE(run("vanilla --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "log"), 0);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, EmptySurveyManifestFails) {
  const auto dir = testing::temp_dir("cli_empty_survey");
  std::ofstream(dir / "manifest.json") << R"({"records": []})";
  const auto cfg = write_config(dir, {{"survey_manifest", "manifest.json"}, {"window_lens", {10}}, {"runs", 1}});
  EXPECT_NE(run("survey --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "log"), 0);
  EXPECT_FALSE(fs::exists(dir / "out" / "reports"));
}

TEST(Cli, BadArguments) {
  const auto dir = testing::temp_dir("cli_args");
  const auto cfg = write_config(dir, nlohmann::json::object());
  EXPECT_NE(run("", dir / "log"), 0);
  EXPECT_NE(run("vanilla", dir / "log"), 0);
  EXPECT_NE(run("vanilla --config " + cfg.string() + " --windows 25", dir / "log"), 0);
  EXPECT_NE(run("vanilla --config " + (dir / "absent.json").string(), dir / "log"), 0);
}

}  // namespace
}  // namespace cogload
