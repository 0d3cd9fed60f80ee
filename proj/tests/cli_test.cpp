#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include "segkey/dataset.hpp"
#include "segkey/report.hpp"

namespace segkey {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "segkey");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "segkey_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    ASSERT_EQ(run({"--seed", "7", "gen-data", "--train", "4", "--dev", "2", "--test", "2",
                   "--size", "16", "--out", (root_ / "data").string()})
                  .code,
              0);
    std::ofstream(root_ / "train.json")
        << R"({"epochs": 1, "batch_size": 2, "model": {"widths": [4, 6, 8, 8]}})";
    ASSERT_EQ(run({"--seed", "1", "gen-key", "--out", key()}).code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string path(const std::string& name) { return (root_ / name).string(); }
  static std::string key() { return path("k.key"); }
  static std::string data() { return path("data"); }

  static Result train(const std::string& protect, const std::string& out) {
    return run({"train", "--config", path("train.json"), "--protect", protect, "--key-file",
                key(), "--data", data(), "--out", out});
  }

  static fs::path root_;
};

fs::path CliTest::root_;

TEST_F(CliTest, GenKeyIsDeterministicWithSeed) {
  ASSERT_EQ(run({"--seed", "1", "gen-key", "--out", path("k2.key")}).code, 0);
  EXPECT_EQ(slurp(key()), slurp(path("k2.key")));
  EXPECT_EQ(slurp(key()).size(), 65u);
}

TEST_F(CliTest, TrainIsIdempotent) {
  ASSERT_EQ(train("hooks=6", path("a.ckpt")).code, 0);
  ASSERT_EQ(train("hooks=6", path("b.ckpt")).code, 0);
  EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
  EXPECT_EQ(slurp(path("a.ckpt.curves.csv")), slurp(path("b.ckpt.curves.csv")));
  EXPECT_TRUE(fs::exists(path("a.ckpt.log")));
}

TEST_F(CliTest, EvalWritesOneReportPerCondition) {
  ASSERT_EQ(train("hooks=6", path("m.ckpt")).code, 0);
  const auto r = run({"eval", "--checkpoint", path("m.ckpt"), "--data", data(), "--key-file",
                      key(), "--conditions", "correct,no_perm,incorrect", "--n-keys", "100",
                      "--out-dir", path("reports")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t json = 0, csv = 0;
  for (const auto& e : fs::directory_iterator(path("reports"))) {
    json += e.path().extension() == ".json";
    csv += e.path().extension() == ".csv";
  }
  EXPECT_EQ(json, 3u);
  EXPECT_EQ(csv, 3u);
  EXPECT_EQ(read_report(path("reports/model-6_incorrect.json")).per_key.size(), 100u);
}

TEST_F(CliTest, EvalWithoutKeyFails) {
  ASSERT_EQ(train("hooks=2", path("h2.ckpt")).code, 0);
  const auto r = run({"eval", "--checkpoint", path("h2.ckpt"), "--data", data(), "--conditions",
                      "correct", "--out-dir", path("nokey")});
  EXPECT_EQ(r.code, cli::kMissingKey);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliTest, MalformedCheckpointFails) {
  std::ofstream(path("junk.ckpt")) << "not a checkpoint";
  const auto r = run({"eval", "--checkpoint", path("junk.ckpt"), "--data", data(),
                      "--conditions", "no_perm", "--out-dir", path("junk")});
  EXPECT_EQ(r.code, cli::kMalformedInput);
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  EXPECT_EQ(run({"gen-key", "--out", path("x.key"), "--bogus"}).code, cli::kUsage);
  EXPECT_EQ(run({}).code, cli::kUsage);
}

TEST_F(CliTest, TrainConfigRejectsUnknownFields) {
  std::ofstream(path("bad.json")) << R"({"epochs": 1, "learning_rate": 3})";
  const auto r = run({"train", "--config", path("bad.json"), "--data", data(), "--out",
                      path("bad.ckpt")});
  EXPECT_NE(r.code, 0);
}

TEST_F(CliTest, TransformImageRoundTrip) {
  const auto sample = generate_sample(3, Split::kTrain, 0, 32);
  save_sample(path("img.ppm"), path("img.pgm"), sample);
  for (const char* kind : {"shf", "np", "ffx"}) {
    ASSERT_EQ(run({"transform-image", "--kind", kind, "--block-size", "4", "--key-file", key(),
                   "--in", path("img.ppm"), "--out", path("enc.ppm")})
                  .code,
              0);
    EXPECT_NE(slurp(path("enc.ppm")), slurp(path("img.ppm")));
    ASSERT_EQ(run({"transform-image", "--kind", kind, "--block-size", "4", "--key-file", key(),
                   "--in", path("enc.ppm"), "--out", path("dec.ppm"), "--decrypt"})
                  .code,
              0);
    EXPECT_EQ(slurp(path("dec.ppm")), slurp(path("img.ppm"))) << kind;
  }
}

TEST_F(CliTest, NonDividingBlockSizeFails) {
  save_sample(path("img3.ppm"), path("img3.pgm"), generate_sample(3, Split::kTrain, 1, 32));
  const auto r = run({"transform-image", "--kind", "shf", "--block-size", "3", "--key-file",
                      key(), "--in", path("img3.ppm"), "--out", path("enc3.ppm")});
  EXPECT_EQ(r.code, cli::kInvalidArgument);
  EXPECT_NE(r.err.find("divide"), std::string::npos) << r.err;
}

TEST_F(CliTest, ReportBuildsBothTables) {
  std::vector<std::string> args{"report", "--out-dir", path("tables")};
  for (std::size_t b : {2u, 4u, 8u, 16u, 32u})
    for (const char* kind : {"shf", "np", "ffx"})
      for (auto cond : {ConditionKind::kCorrect, ConditionKind::kPlain, ConditionKind::kIncorrect}) {
        EvalReport r;
        r.model = std::string(kind) + "-b" + std::to_string(b);
        r.condition = cond;
        r.n_keys = cond == ConditionKind::kIncorrect ? 1 : 0;
        r.mean_iou = 0.5;
        r.per_class = {0.5};
        if (r.n_keys) r.per_key = {0.5};
        args.push_back(write_report(path("sweep"), r).string());
      }
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("tables/table2.csv"));
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& row : rows) EXPECT_EQ(std::count(row.begin(), row.end(), ','), 9);
  EXPECT_TRUE(fs::exists(path("tables/table1.csv")));
}

TEST_F(CliTest, AttackWritesResult) {
  ASSERT_EQ(train("hooks=4", path("h4.ckpt")).code, 0);
  const auto r = run({"attack", "--checkpoint", path("h4.ckpt"), "--data", data(), "--trials",
                      "3", "--out", path("attack.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(path("attack.json"));
  EXPECT_NE(text.find("best_score"), std::string::npos);
  EXPECT_NE(text.find("best_key"), std::string::npos);
}

}  // namespace
}  // namespace segkey
