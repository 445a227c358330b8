#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "relop/common.hpp"

namespace fs = std::filesystem;
using relop::read_file;
using relop::write_file;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(RELOP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Pipeline : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("relop_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const std::string data = RELOP_DATA_DIR;
    write_file(conf(),
               "seed = 3\n"
               "work_dir = " + work() + "\n"
               "synth.tweets_per_class = 120\n"
               "synth.users = 150\n"
               "oowe.epochs = 2\n"
               "oowe.embed_dim = 10\n"
               "predict.labels = " + data + "/initial_labels_8.csv\n"
               "predict.truth = " + data + "/outcome_2016.csv\n"
               "predict.k = 6\n"
               "sweep.points = " + work() + "/manifold_points.tsv\n"
               "sweep.truth = " + work() + "/manifold_truth.csv\n"
               "sweep.runs = 2\n"
               "sweep.k_max = 6\n"
               "metrics.runs = 2\n"
               "metrics.k_max = 6\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string conf() const { return (dir_ / "test.conf").string(); }
  std::string work() const { return (dir_ / "work").string(); }
  std::string stage(const std::string& name, const std::string& extra = "") const {
    return name + " --config " + conf() + (extra.empty() ? "" : " " + extra);
  }

  fs::path dir_;
};

const std::vector<std::string> kStages{"synth", "ingest", "hashtag-net", "label-tweets", "train", "aggregate",
                                       "embed", "predict", "sweep", "metrics", "plot", "verify"};

}  // namespace

TEST_F(Pipeline, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate --config " + conf()), 1);
  EXPECT_EQ(run("synth"), 1);
  EXPECT_EQ(run("synth --config " + (dir_ / "missing.conf").string()), 1);
  EXPECT_EQ(run(stage("synth", "--no.such.key 3")), 1);
  EXPECT_EQ(run(stage("synth", "--synth.classes")), 1);
  EXPECT_EQ(run(stage("synth", "--synth.classes 9")), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Pipeline, DataErrorsExitTwo) {
  EXPECT_EQ(run(stage("ingest")), 2);  // no posts yet
  EXPECT_FALSE(fs::exists(fs::path(work()) / "tweets.tsv"));
  write_file((dir_ / "bad.tsv").string(), "a\t1\t2\nb\t3\n");
  EXPECT_EQ(run(stage("embed", "--predict.points " + (dir_ / "bad.tsv").string())), 2);
}

TEST_F(Pipeline, LockedWorkDirectory) {
  fs::create_directories(work());
  write_file(work() + "/.relop.lock", "");
  EXPECT_EQ(run(stage("synth")), 2);
  fs::remove(work() + "/.relop.lock");
  EXPECT_EQ(run(stage("synth")), 0);
}

TEST_F(Pipeline, VerificationFailureExitsThree) {
  write_file((dir_ / "broken.bin").string(), "not a model");
  EXPECT_EQ(run(stage("verify", "--verify.model " + (dir_ / "broken.bin").string())), 3);
  EXPECT_NE(read_file(work() + "/verify_report.txt").find("FAIL oowe_gradients"), std::string::npos);
}

TEST_F(Pipeline, ConfigPrint) {
  const std::string out = (dir_ / "printed.txt").string();
  const std::string cmd = std::string(RELOP_CLI) + " config print --config " + conf() + " --oowe.alpha=0.25 > " + out;
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const auto text = read_file(out);
  EXPECT_NE(text.find("oowe.alpha = 0.25\n"), std::string::npos);
  EXPECT_NE(text.find("seed = 3\n"), std::string::npos);
}

TEST_F(Pipeline, EndToEnd) {
  for (const auto& s : kStages) ASSERT_EQ(run(stage(s)), 0) << s;
  for (const char* f : {"posts.jsonl", "tweets.tsv", "vocab.tsv", "hashtag_edges.tsv", "hashtag_labels.csv",
                        "training.tsv", "model.bin", "embeddings.tsv", "opinion_points.tsv", "state_points.tsv",
                        "state_summary.csv", "state_mds.tsv", "predictions.csv", "prediction_eval.json", "sweep.csv",
                        "quality.csv", "k_selection.json", "state_scatter.svg", "verify_report.txt"})
    EXPECT_TRUE(fs::exists(fs::path(work()) / f)) << f;

  const auto manifest = relop::split(read_file(work() + "/manifest.jsonl"), '\n');
  std::vector<std::string> names;
  for (const auto& line : manifest) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    names.push_back(j.at("stage").get<std::string>());
    EXPECT_TRUE(j.contains("config_hash"));
    EXPECT_TRUE(j.at("outputs").is_object());
  }
  EXPECT_EQ(names, kStages);

  const auto eval = nlohmann::json::parse(read_file(work() + "/prediction_eval.json"));
  EXPECT_TRUE(eval.is_object());
  EXPECT_EQ(read_file(work() + "/verify_report.txt").find("FAIL"), std::string::npos);
}

TEST_F(Pipeline, RerunReproducesStageOutputs) {
  for (const char* s : {"synth", "ingest", "hashtag-net"}) ASSERT_EQ(run(stage(s)), 0) << s;
  const auto edges = read_file(work() + "/hashtag_edges.tsv");
  const auto tweets = read_file(work() + "/tweets.tsv");
  for (const char* s : {"synth", "ingest", "hashtag-net"}) ASSERT_EQ(run(stage(s)), 0) << s;
  EXPECT_EQ(read_file(work() + "/hashtag_edges.tsv"), edges);
  EXPECT_EQ(read_file(work() + "/tweets.tsv"), tweets);
  ASSERT_EQ(run(stage("synth", "--seed 4")), 0);
  ASSERT_EQ(run(stage("ingest", "--seed 4")), 0);
  EXPECT_NE(read_file(work() + "/tweets.tsv"), tweets);
}
