#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "dummf/forecaster.hpp"
#include "dummf/trainer.hpp"
#include "dummf/scene_io.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace dummf {
namespace {

namespace fs = std::filesystem;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd =
      "SOURCE_DATE_EPOCH=1700000000 '" + std::string(DUMMF_CLI_PATH) + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string data(const std::string& name) { return "'" + (fs::path(DUMMF_TEST_DATA_DIR) / name).string() + "'"; }
std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

class Cli : public ::testing::Test {
 protected:
  test::TempDir dir{"cli"};
  fs::path log() const { return dir / "out.txt"; }
  int sh(const std::string& args) { return run(args, log()); }
  std::string output() const { return read_text_file(log()); }
};

TEST_F(Cli, VersionAndUsage) {
  EXPECT_EQ(sh("--version"), 0);
  EXPECT_NE(output().find("dummf"), std::string::npos);
  EXPECT_EQ(sh(""), 2);
  EXPECT_EQ(sh("bogus"), 2);
  EXPECT_EQ(sh("train --data /nonexistent --config /nonexistent --out x"), 2);
}

TEST_F(Cli, Pipeline) {
  ASSERT_EQ(sh("synth --config " + data("synthetic_tiny.json") + " --seed 2 --out " + q(dir / "scenes")), 0) << output();
  EXPECT_TRUE(fs::exists(dir / "scenes" / "scene_00005.json"));
  EXPECT_TRUE(fs::exists(dir / "scenes" / "synth.manifest.json"));

  ASSERT_EQ(sh("train --data " + q(dir / "scenes") + " --config " + data("train_tiny.json") + " --out " +
               q(dir / "ck.bin")),
            0)
      << output();
  const std::string log = read_text_file(dir / "ck.bin.log.jsonl");
  ASSERT_EQ(std::count(log.begin(), log.end(), '\n'), 1);
  const auto line = nlohmann::json::parse(log.substr(0, log.find('\n')));
  EXPECT_EQ(line["epoch"], 1);
  EXPECT_TRUE(line.contains("L_lR"));
  EXPECT_TRUE(line.contains("L_gR"));

  const fs::path scene = dir / "scenes" / "scene_00000.json";
  ASSERT_EQ(sh("forecast --ckpt " + q(dir / "ck.bin") + " --scene " + q(scene) +
               " --intents 2 --steps 2 --seed 4 --out " + q(dir / "pred.json")),
            0)
      << output();
  const auto pred = predictions_from_json(read_text_file(dir / "pred.json"));
  EXPECT_EQ(pred.branches.size(), 4u);
  EXPECT_EQ(pred.branches[0].persons.size(), 2u);
  EXPECT_EQ(pred.branches[0].persons[0].size(), 30u);

  ASSERT_EQ(sh("eval --pred " + q(dir / "pred.json") + " --gt " + q(scene) + " --out " + q(dir / "report.json")), 0)
      << output();
  const auto rep = nlohmann::json::parse(read_text_file(dir / "report.json"));
  ASSERT_EQ(rep.size(), 2u);
  EXPECT_EQ(rep[0]["horizon_s"], 1.0);
  EXPECT_GE(rep[1]["metrics"]["fpd"].get<double>(), 0.0);
  const std::string csv = read_text_file(dir / "report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

  // a scene scored against itself
  ASSERT_EQ(sh("eval --pred " + q(scene) + " --gt " + q(scene) + " --out " + q(dir / "self.json")), 0) << output();
  EXPECT_EQ(nlohmann::json::parse(read_text_file(dir / "self.json"))[0]["metrics"]["ade"], 0.0);

  ASSERT_EQ(sh("train --data " + q(dir / "scenes") + " --config " + data("train_tiny.json") + " --out " +
               q(dir / "ck.bin") + " --resume --epochs 2"),
            0)
      << output();
  EXPECT_EQ(load_checkpoint(dir / "ck.bin").epoch, 2u);
  const std::string log2 = read_text_file(dir / "ck.bin.log.jsonl");
  EXPECT_EQ(std::count(log2.begin(), log2.end(), '\n'), 2);
}

TEST_F(Cli, Compose) {
  ASSERT_EQ(sh("ingest --asf " + data("fixtures/humanoid.asf") + " --amc " + data("fixtures/humanoid_walk.amc") +
               " --mapping " + data("fixtures/humanoid_mapping.json") + " --history-len 2 --out " + q(dir / "clips")),
            0)
      << output();
  const auto clips = read_scene_dir(dir / "clips");
  ASSERT_EQ(clips.size(), 1u);
  const Scene& clip = clips[0];
  EXPECT_EQ(clip.person_count(), 1u);
  EXPECT_EQ(clip.joint_count(), 15u);
}

TEST_F(Cli, Errors) {
  std::ofstream(dir / "bad.bin") << "not a checkpoint";
  ASSERT_EQ(sh("synth --config " + data("synthetic_tiny.json") + " --count 1 --out " + q(dir / "s")), 0);
  EXPECT_EQ(sh("forecast --ckpt " + q(dir / "bad.bin") + " --scene " + q(dir / "s" / "scene_00000.json") +
               " --out " + q(dir / "p.json")),
            1);
  EXPECT_NE(output().find("error"), std::string::npos);
  std::ofstream(dir / "cfg.json") << R"({"epochs": 1, "mystery": 2})";
  EXPECT_EQ(sh("train --data " + q(dir / "s") + " --config " + q(dir / "cfg.json") + " --out " + q(dir / "c.bin")), 2);
  EXPECT_NE(output().find("mystery"), std::string::npos);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_EQ(sh("eval --pred " + q(dir / "broken.json") + " --gt " + q(dir / "s" / "scene_00000.json") + " --out " +
               q(dir / "r.json")),
            1);
  EXPECT_NE(output().find("broken.json"), std::string::npos);
}

}  // namespace
}  // namespace dummf
