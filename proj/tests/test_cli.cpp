#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vbitn/cli.hpp"
#include "vbitn/config.hpp"

using namespace vbitn;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::string last_line(const std::string& s) {
  const auto body = s.substr(0, s.size() - (s.ends_with('\n') ? 1 : 0));
  return body.substr(body.rfind('\n') == std::string::npos ? 0 : body.rfind('\n') + 1);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  CliTest()
      : dir(fs::temp_directory_path() /
            ("vbitn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    setenv("VBITN_RUN_DIR", (dir / "runs").c_str(), 1);
  }
  ~CliTest() override { fs::remove_all(dir); }

  // Writes a small three-domain config whose data lives under this test's directory.
  fs::path write_config(const std::string& run_id) {
    TrainConfig c;
    c.domains = {"ink", "paint", "neon"};
    c.widths = {4, 8};
    c.batch_size = 4;
    c.epochs = 1;
    c.train_count = 8;
    c.test_count = 4;
    c.checkpoint_every = 2;
    c.seed = 21;
    c.run_id = run_id;
    c.data_root = (dir / "data").string();
    const auto path = dir / (run_id + ".ini");
    std::ofstream(path) << c.to_ini();
    return path;
  }

  // gen-data plus train; returns the checkpoint path.
  std::string trained_checkpoint() {
    const auto cfg = write_config("base");
    EXPECT_EQ(run({"gen-data", "--config", cfg.string(), "--out", (dir / "data").string()}).code, 0);
    auto t = run({"train", "--config", cfg.string()});
    EXPECT_EQ(t.code, 0) << t.err;
    return first_line(t.out).substr(0, t.out.find(' '));
  }

  fs::path dir;
};

}  // namespace

TEST_F(CliTest, GenDataWritesSplits) {
  auto r = run({"gen-data", "--domains", "ink,paint", "--train", "3", "--test", "2", "--seed", "4", "--out",
                (dir / "d").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "d" / "ink" / "train"));
  EXPECT_TRUE(fs::exists(dir / "d" / "paint" / "test"));
  EXPECT_TRUE(r.err.empty());
}

TEST_F(CliTest, GenDataWithoutSeedReportsTheChosenOne) {
  auto r = run({"gen-data", "--domains", "ink,paint", "--train", "1", "--test", "1", "--out", (dir / "d").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.err.rfind("seed: ", 0), 0u);
}

TEST_F(CliTest, TrainingTwiceGivesTheSameCheckpointHash) {
  const auto cfg = write_config("same");
  ASSERT_EQ(run({"gen-data", "--config", cfg.string(), "--out", (dir / "data").string()}).code, 0);
  auto a = run({"train", "--config", cfg.string()});
  setenv("VBITN_RUN_DIR", (dir / "runs_again").c_str(), 1);
  auto b = run({"train", "--config", cfg.string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto hash_a = first_line(a.out).substr(a.out.find(' ') + 1);
  const auto hash_b = first_line(b.out).substr(b.out.find(' ') + 1);
  EXPECT_EQ(hash_a.size(), 16u);
  EXPECT_EQ(hash_a, hash_b);
  EXPECT_TRUE(fs::exists(dir / "runs" / "same" / "log.ndjson"));
  EXPECT_TRUE(fs::exists(dir / "runs_again" / "same" / "log.ndjson"));
}

TEST_F(CliTest, OneHotMixWritesTheSameBytesAsTranslate) {
  const auto ckpt = trained_checkpoint();
  auto t = run({"translate", "--ckpt", ckpt, "--target", "neon", "--seed", "8", "--index", "2", "--out",
                (dir / "t").string()});
  auto m = run({"mix", "--ckpt", ckpt, "--weights", "0,1", "--seed", "8", "--index", "2", "--out",
                (dir / "m").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_EQ(slurp(dir / "t" / "000.png"), slurp(dir / "m" / "000.png"));
  auto prov = nlohmann::json::parse(slurp(dir / "m" / "provenance.json"));
  EXPECT_EQ(prov["chosen_decoder"], "neon");
  EXPECT_EQ(prov["seed"], 8);
}

TEST_F(CliTest, EditStyleWritesEverySampleWithProvenance) {
  const auto ckpt = trained_checkpoint();
  auto r = run({"edit-style", "--ckpt", ckpt, "--target", "paint", "--l", "8", "--seed", "3", "--out",
                (dir / "s").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int i = 0; i < 8; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%03d.png", i);
    EXPECT_TRUE(fs::exists(dir / "s" / name)) << name;
  }
  auto prov = nlohmann::json::parse(slurp(dir / "s" / "provenance.json"));
  EXPECT_EQ(prov["l"], 8);
  ASSERT_EQ(prov["outputs"].size(), 8u);
  EXPECT_EQ(prov["outputs"][0]["latents"]["z"], prov["outputs"][7]["latents"]["z"]);
  EXPECT_NE(prov["outputs"][0]["latents"]["y"], prov["outputs"][7]["latents"]["y"]);
}

TEST_F(CliTest, UsageErrorsExitTwoWithOneLine) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"translate", "--bogus"}, {"frobnicate"}, {}, {"gen-data", "--domains", "ink,sketch", "--seed", "1"}}) {
    auto r = run(args);
    EXPECT_EQ(r.code, 2) << (args.empty() ? "" : args[0]);
    EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  }
}

TEST_F(CliTest, BadTargetsAndWeightsAreUsageErrors) {
  const auto ckpt = trained_checkpoint();
  EXPECT_EQ(run({"translate", "--ckpt", ckpt, "--target", "ink", "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"translate", "--ckpt", ckpt, "--target", "sketch", "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"mix", "--ckpt", ckpt, "--weights", "1", "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"mix", "--ckpt", ckpt, "--weights", "a,b", "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"edit-style", "--ckpt", ckpt, "--target", "paint", "--l", "0", "--seed", "1"}).code, 2);
}

TEST_F(CliTest, RuntimeFailuresExitOne) {
  auto missing = run({"translate", "--ckpt", (dir / "absent.vbit").string(), "--target", "paint", "--seed", "1"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(missing.err, "error: missing-checkpoint: no checkpoint at " + (dir / "absent.vbit").string() + "\n");

  std::ofstream(dir / "bad.ini") << "[train]\nepochs = many\n";
  auto bad = run({"train", "--config", (dir / "bad.ini").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(bad.err.rfind("error: config: ", 0), 0u) << bad.err;

  std::ofstream(dir / "junk.vbit") << "junk";
  auto junk = run({"eval", "--ckpt", (dir / "junk.vbit").string(), "--seed", "1"});
  EXPECT_EQ(junk.code, 1);
  EXPECT_EQ(junk.err.rfind("error: checkpoint: ", 0), 0u) << junk.err;

  auto no_data = run({"train", "--config", write_config("nodata").string()});
  EXPECT_EQ(no_data.code, 1);
  EXPECT_EQ(last_line(no_data.err).rfind("error: missing-data: ", 0), 0u) << no_data.err;
}

TEST_F(CliTest, HelpExitsZero) {
  auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("edit-style"), std::string::npos);
}
