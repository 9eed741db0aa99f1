// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "biasaudit/error.hpp"
#include "cli.hpp"

namespace {

namespace fs = std::filesystem;
using namespace biasaudit;

const fs::path kData = BIASAUDIT_DATA;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv("BIASAUDIT_CONFIG");
    ::unsetenv("BIASAUDIT_LIBRARY");
  }
  const std::string sample = (kData / "sample.csv").string();
};

TEST_F(Cli, DetectWritesTheOutputTree) {
  const auto dir = fresh_dir("biasaudit_cli_detect");
  const auto r = run({"detect", sample, "-f", "gender", "--out", dir.string()});
  EXPECT_EQ(r.code, cli::kComplete) << r.err;
  EXPECT_NE(r.out.find("status: finished"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("headline: level"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "report.md"));
  EXPECT_TRUE(fs::exists(dir / "findings.json"));
  EXPECT_TRUE(fs::exists(dir / "logs" / "session.jsonl"));
}

TEST_F(Cli, DetectIsReproducible) {
  const auto a = fresh_dir("biasaudit_cli_rep_a");
  const auto b = fresh_dir("biasaudit_cli_rep_b");
  ASSERT_EQ(run({"detect", sample, "-f", "gender,income", "--out", a.string()}).code, cli::kComplete);
  ASSERT_EQ(run({"detect", sample, "-f", "gender,income", "--out", b.string()}).code, cli::kComplete);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
}

TEST_F(Cli, UnknownFeatureListsTheColumns) {
  const auto r = run({"detect", sample, "-f", "salary", "--out", fresh_dir("biasaudit_cli_unk").string()});
  EXPECT_EQ(r.code, cli::kError);
  EXPECT_NE(r.err.find("salary"), std::string::npos);
  EXPECT_NE(r.err.find("gender"), std::string::npos);
}

TEST_F(Cli, ZeroBudgetIsIncomplete) {
  const auto dir = fresh_dir("biasaudit_cli_budget");
  const auto r = run({"detect", sample, "-f", "gender", "--budget", "0", "--out", dir.string()});
  EXPECT_EQ(r.code, cli::kIncomplete) << r.err;
  EXPECT_NE(slurp(dir / "report.md").find("Incomplete"), std::string::npos);
}

TEST_F(Cli, ReplAnswersFollowUps) {
  const auto dir = fresh_dir("biasaudit_cli_repl");
  const auto r = run({"repl", sample, "-f", "gender", "--out", dir.string()},
                     "please add a pie chart\nalso show the entropy\nquit\n");
  EXPECT_EQ(r.code, cli::kComplete) << r.err;
  const auto log = slurp(dir / "logs" / "session.jsonl");
  EXPECT_NE(log.find("\"revision\":3"), std::string::npos);
}

TEST_F(Cli, ReplQuitAndEofEndCleanly) {
  EXPECT_EQ(run({"repl", sample, "-f", "gender", "--out", fresh_dir("biasaudit_cli_q").string()}, "quit\n").code,
            cli::kComplete);
  EXPECT_EQ(run({"repl", sample, "-f", "gender", "--out", fresh_dir("biasaudit_cli_eof").string()}, "").code,
            cli::kComplete);
}

TEST_F(Cli, ChatModeWithoutKeyFailsBeforeAnyRequest) {
  const auto cfg = fs::temp_directory_path() / "biasaudit_cli_chat.json";
  std::ofstream(cfg) << R"({"mode": "chat", "chat": {"api_key_env": "BIASAUDIT_CLI_TEST_UNSET_KEY"}})";
  ::unsetenv("BIASAUDIT_CLI_TEST_UNSET_KEY");
  const auto r = run({"detect", sample, "-f", "gender", "--config", cfg.string(), "--out",
                      fresh_dir("biasaudit_cli_chat").string()});
  EXPECT_EQ(r.code, cli::kError);
  EXPECT_NE(r.err.find("BIASAUDIT_CLI_TEST_UNSET_KEY"), std::string::npos) << r.err;
}

TEST(Config, RejectsStoredSecrets) {
  for (const char* text : {R"({"api_key": "sk-123"})", R"({"chat": {"token": "x"}})", R"({"chat": {"Secret": "x"}})",
                           R"({"colour": "blue"})", R"({"chat": {"timeout_s": -1}})", R"([1])"}) {
    try {
      cli::parse_config(nlohmann::json::parse(text));
      ADD_FAILURE() << "accepted " << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidArgument) << text;
    }
  }
  const auto c = cli::parse_config(nlohmann::json::parse(
      R"({"mode": "chat", "out": "o", "chat": {"api_key_env": "MY_KEY", "model": "m", "max_attempts": 5}})"));
  EXPECT_EQ(c.mode, cli::RunMode::Chat);
  EXPECT_EQ(c.chat.api_key_env, "MY_KEY");
  EXPECT_EQ(c.chat.max_attempts, 5);
}

TEST_F(Cli, SynthValidatesStrength) {
  const auto dir = fresh_dir("biasaudit_cli_synth");
  const auto bad = run({"synth", "--scenario", "num_num", "--strength", "1.5", "--out", dir.string()});
  EXPECT_EQ(bad.code, cli::kError);
  EXPECT_NE(bad.err.find("InvalidSpec"), std::string::npos) << bad.err;
  const auto ok = run({"synth", "--scenario", "cat_num", "--level", "4", "--n", "300", "--out", dir.string()});
  EXPECT_EQ(ok.code, cli::kComplete) << ok.err;
  EXPECT_TRUE(fs::exists(dir / "synth_cat_num.csv"));
  const auto spec = nlohmann::json::parse(slurp(dir / "synth_cat_num.json"));
  EXPECT_EQ(spec.at("n"), 300);
}

TEST_F(Cli, MethodsListAndShow) {
  const auto list = run({"methods", "list"});
  EXPECT_EQ(list.code, cli::kComplete) << list.err;
  EXPECT_NE(list.out.find("A-0-1"), std::string::npos);
  const auto show = run({"methods", "show", "A-0-2"});
  EXPECT_EQ(nlohmann::json::parse(show.out).at("id"), "A-0-2");
  EXPECT_EQ(run({"methods", "show", "nope"}).code, cli::kError);
  const auto search = run({"methods", "search", "--scenario", "cat_dist", "--text", "ratio", "--top-k", "1"});
  EXPECT_EQ(search.out.rfind("A-0-2", 0), 0u) << search.out;
}

TEST_F(Cli, MethodsAddToACopy) {
  const auto lib = fs::temp_directory_path() / "biasaudit_cli_lib.json";
  fs::copy_file(kData / "method_library.json", lib, fs::copy_options::overwrite_existing);
  const auto entry = fs::temp_directory_path() / "biasaudit_cli_entry.json";
  std::ofstream(entry) << R"({"id": "C-42", "intention": "Rank correlation between two numerical features.",
    "method": {"step_1": "Rank.", "step_2": "Correlate."}, "field": "General",
    "tags": {"bias_type": "Correlation", "data_type": "num_num", "domain": "General"}})";
  EXPECT_EQ(run({"methods", "add", entry.string(), "--library", lib.string()}).code, cli::kComplete);
  EXPECT_EQ(run({"methods", "show", "C-42", "--library", lib.string()}).code, cli::kComplete);
  EXPECT_EQ(run({"methods", "add", entry.string(), "--library", lib.string()}).code, cli::kError);
}

TEST_F(Cli, BenchOnTheSampleTaskset) {
  const auto dir = fresh_dir("biasaudit_cli_bench");
  const auto r = run({"bench", (kData / "sample_taskset.json").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, cli::kComplete) << r.err;
  EXPECT_NE(r.out.find("# Benchmark results"), std::string::npos);
  EXPECT_NE(r.out.find("Overall"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "benchmark.md"));
  EXPECT_TRUE(fs::exists(dir / "results.json"));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kError);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kError);
  EXPECT_EQ(run({"detect"}).code, cli::kError);
  EXPECT_EQ(run({"--help"}).code, cli::kComplete);
}

}  // namespace
