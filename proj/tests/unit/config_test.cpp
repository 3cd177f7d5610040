#include <gtest/gtest.h>

#include "cogload/config.hpp"
#include "cogload/error.hpp"

namespace cogload {
namespace {

using nlohmann::json;

TEST(Config, Defaults) {
  const auto c = parse_config(json::object(), "/base");
  EXPECT_EQ(c.window_lens, (std::vector<double>{10, 30, 60}));
  EXPECT_EQ(c.runs, 40);
  EXPECT_EQ(c.train.learning_rate, 1e-3);
  EXPECT_EQ(c.finetune_learning_rate, 1e-4);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.train.patience, 10);
  EXPECT_EQ(c.train.max_epochs, 200);
  EXPECT_EQ(c.steps.cl_positive, 8u);
  EXPECT_EQ(c.steps.cl_negative, 4u);
  EXPECT_EQ(c.steps.stress_positive, 12u);
  EXPECT_EQ(c.steps.stress_negative, 18u);
  EXPECT_EQ(c.steps.validation, 32u);
  EXPECT_EQ(c.steps.test, 64u);
  EXPECT_EQ(c.calibration.threshold, 0.7);
  EXPECT_EQ(c.calibration.window_len_s, 30.0);
  EXPECT_EQ(c.hash().size(), 16u);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config(json{{"window_len", 30}}, "/"), ValidationError);
  EXPECT_THROW(parse_config(json{{"train", {{"lr", 0.1}}}}, "/"), ValidationError);
  EXPECT_THROW(parse_config(json{{"runs", "many"}}, "/"), ValidationError);
}

TEST(Config, RangeChecks) {
  EXPECT_THROW(parse_config(json{{"window_lens", {20}}}, "/"), ValidationError);
  EXPECT_THROW(parse_config(json{{"window_lens", {30, 30}}}, "/"), ValidationError);
  EXPECT_THROW(parse_config(json{{"runs", 0}}, "/"), ValidationError);
  EXPECT_THROW(parse_config(json{{"calibration", {{"threshold", 1.5}}}}, "/"), ValidationError);
  EXPECT_THROW(parse_config(json{{"calibration", {{"pool", "stress_pretraining"}}}}, "/"), ValidationError);
}

TEST(Config, HashIgnoresJobsAndOutput) {
  const auto a = parse_config(json{{"runs", 3}, {"jobs", 1}, {"output_dir", "x"}}, "/base");
  const auto b = parse_config(json{{"runs", 3}, {"jobs", 8}, {"output_dir", "y"}}, "/elsewhere");
  EXPECT_EQ(a.hash(), b.hash());
  const auto c = parse_config(json{{"runs", 4}}, "/base");
  EXPECT_NE(a.hash(), c.hash());
  const auto d = parse_config(json{{"runs", 3}, {"master_seed", 1}}, "/base");
  EXPECT_NE(a.hash(), d.hash());
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  const auto c = parse_config(json{{"pilot_manifest", "data/m.json"}, {"output_dir", "out2"},
                                   {"survey_manifest", "/abs/s.json"}},
                              "/cfg");
  EXPECT_EQ(c.pilot_manifest, std::filesystem::path("/cfg/data/m.json"));
  EXPECT_EQ(c.output_dir, std::filesystem::path("/cfg/out2"));
  EXPECT_EQ(c.survey_manifest, std::filesystem::path("/abs/s.json"));
  EXPECT_TRUE(c.wesad_dir.empty());
  EXPECT_EQ(c.canonical().at("pilot_manifest"), "data/m.json");
}

TEST(Config, ProtocolOptionsCarrySettings) {
  const auto c = parse_config(json{{"runs", 5}, {"master_seed", 9}, {"train", {{"finetune_learning_rate", 0.01}}}},
                              "/");
  const auto o = c.protocol_options();
  EXPECT_EQ(o.runs, 5);
  EXPECT_EQ(o.master_seed, 9u);
  EXPECT_EQ(o.finetune_learning_rate, 0.01);
}

TEST(Config, WindowList) {
  EXPECT_EQ(parse_window_list("10,30"), (std::vector<double>{10, 30}));
  EXPECT_EQ(parse_window_list("60"), (std::vector<double>{60}));
  EXPECT_THROW(parse_window_list("10,,30"), ValidationError);
  EXPECT_THROW(parse_window_list("ten"), ValidationError);
}

}  // namespace
}  // namespace cogload
