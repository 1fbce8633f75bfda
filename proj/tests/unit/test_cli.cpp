#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "stsc/cli.hpp"
#include "stsc/error.hpp"
#include "stsc/io.hpp"

using namespace stsc;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

const char* kSmokeConfig = R"({
  "synth": {"sensor_count": 10, "day_count": 15},
  "dataset": {"anchor_stride": 3},
  "training": {"pretrain_x_epochs": 1, "pretrain_y_epochs": 2, "lfmm_epochs": 1,
               "finetune_epochs": 1, "batch_size": 64},
  "evaluation": {"mlp_epochs": 2}
})";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stsc_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = scratch("pipeline");
    write_file_atomic(root_ / "config.json", kSmokeConfig);
    for (const char* run : {"a", "b"}) {
      const std::string out = (root_ / run).string();
      const std::string cfg = (root_ / "config.json").string();
      ASSERT_EQ(run_cli({"synth", "--config", cfg, "--out", out}).status, cli::kOk);
      const Result r = run_cli({"all", "--config", cfg, "--out", out});
      ASSERT_EQ(r.status, cli::kOk) << r.err;
    }
  }
  static void TearDownTestSuite() {
    if (!std::getenv("STSC_KEEP")) fs::remove_all(root_);
  }
  static fs::path root_;
};
fs::path Pipeline::root_;

}  // namespace

TEST(Cli, HelpListsSubcommandsAndFlags) {
  const Result r = run_cli({"--help"});
  EXPECT_EQ(r.status, 0);
  for (const char* sub : {"synth", "clean", "neighbors", "dataset", "pretrain-x", "pretrain-y",
                          "train", "predict", "evaluate", "stats", "all", "--config", "--out",
                          "--seed", "--threads"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  const Result p = run_cli({"predict", "--help"});
  EXPECT_EQ(p.status, 0);
  for (const char* flag : {"--at", "--sensor", "--horizon"})
    EXPECT_NE(p.out.find(flag), std::string::npos) << flag;
}

TEST(Cli, UnknownFlagOrSubcommandIsConfigError) {
  EXPECT_EQ(run_cli({"train", "--bogus"}).status, cli::kConfigError);
  EXPECT_EQ(run_cli({"explode"}).status, cli::kConfigError);
  EXPECT_EQ(run_cli({}).status, cli::kConfigError);
}

TEST(Cli, UnknownConfigKeyNamesTheKey) {
  const fs::path dir = scratch("badkey");
  write_file_atomic(dir / "config.json", R"({"training": {"learning_rat": 0.1}})");
  const Result r = run_cli({"clean", "--config", (dir / "config.json").string(), "--out", dir.string()});
  EXPECT_EQ(r.status, cli::kConfigError);
  EXPECT_NE(r.err.find("learning_rat"), std::string::npos) << r.err;
  fs::remove_all(dir);
}

TEST(Cli, ConfigParsing) {
  const cli::RunConfig c = cli::parse_config(R"({"seed": 7, "dataset": {"lag_days": [1, 7]}})");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.dataset.lag_days, (std::vector<std::size_t>{1, 7}));
  EXPECT_EQ(c.evaluation.knn_k, 17u);
  try {
    cli::parse_config(R"({"training": {"batch_size": "big"}})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
  }
  // config_json round-trips through the parser.
  const cli::RunConfig back = cli::parse_config(cli::config_json(c));
  EXPECT_EQ(cli::config_json(back), cli::config_json(c));
}

TEST(Cli, MissingInputIsExitTwoWithPath) {
  const fs::path dir = scratch("missing");
  const Result r = run_cli({"clean", "--out", dir.string()});
  EXPECT_EQ(r.status, cli::kMissingInput);
  EXPECT_NE(r.err.find("speeds.csv"), std::string::npos) << r.err;
  const Result c = run_cli({"train", "--config", (dir / "nope.json").string()});
  EXPECT_EQ(c.status, cli::kMissingInput);
  EXPECT_NE(c.err.find("nope.json"), std::string::npos) << c.err;
  fs::remove_all(dir);
}

TEST(Cli, OutputDirFallsBackToEnvironment) {
  const fs::path dir = scratch("env");
  ::setenv("STSC_OUT", dir.string().c_str(), 1);
  const Result r = run_cli({"synth", "--seed", "3"});
  ::unsetenv("STSC_OUT");
  ASSERT_EQ(r.status, cli::kOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "speeds.csv"));
  EXPECT_TRUE(fs::exists(dir / "sensors.csv"));
  fs::remove_all(dir);
}

TEST_F(Pipeline, AllWritesFiveHorizonReport) {
  const fs::path a = root_ / "a";
  for (const char* f : {"cleaned.csv", "clean_report.json", "neighbors.csv", "dataset/meta.json",
                        "dataset/samples.bin", "dae_x.ckpt", "dae_y.ckpt", "model.ckpt",
                        "metrics.csv", "sensor_mae.csv", "chart_mae.svg", "chart_rmse.svg",
                        "chart_mape.svg", "kwt.csv", "mct.csv", "run_summary.jsonl"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  const std::string metrics = read_file(a / "metrics.csv");
  EXPECT_EQ(lines(metrics), 1u + 5u * 5u);
  for (const char* t : {"proposed,5,", "proposed,60,", "persistence,30,", "historical_average,15,",
                        "knn,45,", "mlp,60,"})
    EXPECT_NE(metrics.find(t), std::string::npos) << t;
  EXPECT_EQ(lines(read_file(a / "run_summary.jsonl")), 9u);  // synth + 8 steps of `all`
}

TEST_F(Pipeline, RerunIsByteIdentical) {
  EXPECT_EQ(read_file(root_ / "a" / "metrics.csv"), read_file(root_ / "b" / "metrics.csv"));
  EXPECT_EQ(read_file(root_ / "a" / "model.ckpt"), read_file(root_ / "b" / "model.ckpt"));
}

TEST_F(Pipeline, PredictPrintsTwelveTimestampedValues) {
  const std::string out = (root_ / "a").string();
  const Result r = run_cli({"predict", "--out", out, "--at", "2017-06-15 13:00", "--sensor", "S3"});
  ASSERT_EQ(r.status, cli::kOk) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  ASSERT_EQ(rows.size(), 12u) << r.out;
  EXPECT_EQ(rows.front().substr(0, 17), "2017-06-15 13:05,");
  EXPECT_EQ(rows.back().substr(0, 17), "2017-06-15 14:00,");
  for (const auto& row : rows) {
    const double mph = std::stod(row.substr(17));
    EXPECT_GT(mph, 0.0);
    EXPECT_LT(mph, 120.0);
  }
  const Result one =
      run_cli({"predict", "--out", out, "--at", "2017-06-15 13:00", "--sensor", "S3", "--horizon", "30"});
  EXPECT_EQ(lines(one.out), 1u);
  EXPECT_EQ(one.out.substr(0, 17), "2017-06-15 13:30,");
}

TEST_F(Pipeline, PredictOutsideAnchorRangeIsDataError) {
  const std::string out = (root_ / "a").string();
  const Result r = run_cli({"predict", "--out", out, "--at", "2017-06-15 09:00", "--sensor", "S3"});
  EXPECT_EQ(r.status, cli::kDataError);
  const Result s = run_cli({"predict", "--out", out, "--at", "2017-06-15 13:00", "--sensor", "S99"});
  EXPECT_EQ(s.status, cli::kDataError);
}

TEST_F(Pipeline, StepsRequireTheirInputs) {
  const fs::path dir = scratch("order");
  fs::copy(root_ / "a" / "speeds.csv", dir / "speeds.csv");
  fs::copy(root_ / "a" / "sensors.csv", dir / "sensors.csv");
  const Result r = run_cli({"train", "--out", dir.string()});
  EXPECT_EQ(r.status, cli::kMissingInput);
  fs::remove_all(dir);
}
